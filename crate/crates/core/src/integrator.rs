//! Time integration of the full truncated equation with online diagnostics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};
use crate::ode::{integrate, sample_grid, Control, OdeOptions};
use crate::spectral::{Convolver, ModeVector, Params};

/// Tail fraction above which a run is no longer trusted.
pub const TAIL_LIMIT: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Sobolev exponents recorded at every sample.
    pub sobolev_s: Vec<f64>,
    pub keep_states: bool,
    pub tail_limit: f64,
    pub max_step: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { sobolev_s: vec![1.0], keep_states: true, tail_limit: TAIL_LIMIT, max_step: 0.1 }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    TruncationBreach { t: f64, tail: f64, limit: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: Params,
    pub sobolev_s: Vec<f64>,
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub momentum: Vec<f64>,
    pub mean_abs: Vec<f64>,
    /// `sobolev[i][j]` is `‖u(times[j])‖²_{H^{s_i}}`.
    pub sobolev: Vec<Vec<f64>>,
    pub tail_fraction: Vec<f64>,
    /// Empty unless states were requested.
    pub states: Vec<ModeVector>,
    pub termination: Termination,
}

impl Trajectory {
    fn new(params: Params, sobolev_s: Vec<f64>) -> Self {
        let k = sobolev_s.len();
        Self {
            params,
            sobolev_s,
            times: Vec::new(),
            mass: Vec::new(),
            momentum: Vec::new(),
            mean_abs: Vec::new(),
            sobolev: vec![Vec::new(); k],
            tail_fraction: Vec::new(),
            states: Vec::new(),
            termination: Termination::Completed,
        }
    }

    fn record(&mut self, t: f64, u: &ModeVector, keep: bool) {
        self.times.push(t);
        self.mass.push(u.mass());
        self.momentum.push(u.momentum());
        self.mean_abs.push(u.mean().norm());
        for (s, col) in self.sobolev_s.iter().zip(self.sobolev.iter_mut()) {
            col.push(u.sobolev_sq(*s));
        }
        self.tail_fraction.push(u.tail_fraction());
        if keep {
            self.states.push(u.clone());
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    /// Turns a guard-triggered stop into an error.
    pub fn require_complete(self) -> Result<Self> {
        match self.termination {
            Termination::Completed => Ok(self),
            Termination::TruncationBreach { t, tail, limit } => {
                Err(SzegoError::TruncationBreach { t, tail, limit })
            }
        }
    }

    pub fn last_state(&self) -> Option<&ModeVector> {
        self.states.last()
    }

    /// Sobolev series for exponent `s`, if it was recorded.
    pub fn sobolev_series(&self, s: f64) -> Option<&[f64]> {
        self.sobolev_s.iter().position(|&x| x == s).map(|i| self.sobolev[i].as_slice())
    }

    /// `max_t |ℳ(u(t)) − ℳ(u₀)| / ℳ(u₀)`.
    pub fn momentum_drift(&self) -> f64 {
        let m0 = self.momentum.first().copied().unwrap_or(0.0);
        let scale = if m0 > 0.0 { m0 } else { 1.0 };
        self.momentum.iter().map(|m| (m - m0).abs() / scale).fold(0.0, f64::max)
    }

    /// Largest increase of the mass between consecutive samples.
    pub fn max_mass_increase(&self) -> f64 {
        self.mass.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Trapezoidal `∫ |(u|1)|² dt` over the recorded samples.
    pub fn mean_sq_integral(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.mean_abs.windows(2))
            .map(|(t, m)| 0.5 * (t[1] - t[0]) * (m[0] * m[0] + m[1] * m[1]))
            .sum()
    }

    /// CSV with columns `t, mass, momentum, mean_abs, hs_<s>..., tail_fraction`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let ser = |e: csv::Error| SzegoError::Serialization(e.to_string());
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string(), "mass".into(), "momentum".into(), "mean_abs".into()];
        header.extend(self.sobolev_s.iter().map(|s| format!("hs_{s}")));
        header.push("tail_fraction".into());
        wr.write_record(&header).map_err(ser)?;
        for j in 0..self.len() {
            let mut row = vec![self.times[j], self.mass[j], self.momentum[j], self.mean_abs[j]];
            row.extend(self.sobolev.iter().map(|col| col[j]));
            row.push(self.tail_fraction[j]);
            wr.write_record(row.iter().map(|v| v.to_string())).map_err(ser)?;
        }
        wr.flush().map_err(|e| SzegoError::Serialization(e.to_string()))
    }

    /// `{"times": [...], "states": [[[re, im], ...], ...]}`.
    pub fn states_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            times: &'a [f64],
            states: &'a [ModeVector],
        }
        let n = self.states.len();
        let times = if n == self.times.len() { &self.times[..] } else { &self.times[..0] };
        serde_json::to_string(&Dump { times, states: &self.states })
            .expect("trajectory states always serialize")
    }
}

fn ode_options(p: &Params, max_step: f64) -> OdeOptions {
    OdeOptions { rel_tol: p.rel_tol, abs_tol: p.abs_tol, max_step, ..OdeOptions::default() }
}

fn check_input(u0: &ModeVector, p: &Params) -> Result<()> {
    p.validate()?;
    if u0.len() != p.modes {
        return Err(SzegoError::InvalidParams(format!(
            "state has {} modes, params expect {}",
            u0.len(),
            p.modes
        )));
    }
    if !u0.is_finite() {
        return Err(SzegoError::NonFiniteState { t: 0.0 });
    }
    Ok(())
}

/// Integrates from `t = 0` to `t_end`, sampling every `sample_dt`.
pub fn evolve(u0: &ModeVector, p: &Params, t_end: f64, sample_dt: f64) -> Result<Trajectory> {
    evolve_with(u0, p, t_end, sample_dt, &EvolveOptions::default())
}

/// Integrates on an explicit increasing list of sample times (all > 0).
pub fn evolve_at(
    u0: &ModeVector,
    p: &Params,
    samples: &[f64],
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    check_input(u0, p)?;
    if samples.windows(2).any(|w| w[1] <= w[0]) || samples.first().is_some_and(|&t| t <= 0.0) {
        return Err(SzegoError::InvalidParams("sample times must be positive and increasing".into()));
    }
    let mut conv = Convolver::new(p.modes);
    let mut traj = Trajectory::new(*p, opts.sobolev_s.clone());
    let limit = opts.tail_limit;
    let keep = opts.keep_states;
    let params = *p;
    integrate(
        |_, y, dy| conv.rhs_flat(y, &params, dy),
        0.0,
        &u0.to_flat(),
        samples,
        |t, y| {
            let u = ModeVector::from_flat(y);
            traj.record(t, &u, keep);
            let tail = u.tail_fraction();
            if tail > limit {
                traj.termination = Termination::TruncationBreach { t, tail, limit };
                log::warn!("tail fraction {tail:.3e} exceeds {limit:.1e} at t = {t}");
                Control::Stop
            } else {
                Control::Continue
            }
        },
        &ode_options(p, opts.max_step),
    )?;
    Ok(traj)
}

pub fn evolve_with(
    u0: &ModeVector,
    p: &Params,
    t_end: f64,
    sample_dt: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if !(t_end > 0.0) {
        return Err(SzegoError::InvalidParams(format!("t_end must be > 0, got {t_end}")));
    }
    if !(sample_dt > 0.0) {
        return Err(SzegoError::InvalidParams(format!("sample_dt must be > 0, got {sample_dt}")));
    }
    evolve_at(u0, p, &sample_grid(0.0, t_end, sample_dt), opts)
}

/// Flow map over a time `dt` (either sign), no diagnostics or tail guard.
pub fn advance(u: &ModeVector, p: &Params, dt: f64) -> Result<ModeVector> {
    if dt == 0.0 {
        return Ok(u.clone());
    }
    let n = u.len();
    let params = Params { modes: n, ..*p };
    let mut conv = Convolver::new(n);
    let summary = integrate(
        |_, y, dy| conv.rhs_flat(y, &params, dy),
        0.0,
        &u.to_flat(),
        &[dt],
        |_, _| Control::Continue,
        &ode_options(p, 0.1),
    )?;
    Ok(ModeVector::from_flat(&summary.y))
}

/// Derivative at `x[c]` of the polynomial interpolating `(x, y)`.
fn lagrange_derivative(x: &[f64], y: &[f64], c: usize) -> f64 {
    let xc = x[c];
    let mut d = 0.0;
    for j in 0..x.len() {
        let w = if j == c {
            (0..x.len()).filter(|&m| m != c).map(|m| 1.0 / (xc - x[m])).sum()
        } else {
            let num: f64 = (0..x.len()).filter(|&m| m != j && m != c).map(|m| xc - x[m]).product();
            let den: f64 = (0..x.len()).filter(|&m| m != j).map(|m| x[j] - x[m]).product();
            num / den
        };
        d += w * y[j];
    }
    d
}

/// Defect of `d/dt ‖u‖² + 2ν |(u|1)|² = 0` on the samples, relative to the
/// initial mass. The derivative uses a centred five-point stencil on samples
/// with two neighbours on each side (three points for very short runs).
pub fn lyapunov_residual(traj: &Trajectory) -> Result<f64> {
    let n = traj.len();
    if n < 3 {
        return Err(SzegoError::InsufficientSamples { needed: 3, got: n });
    }
    let m0 = traj.mass[0];
    let scale = if m0 > 0.0 { m0 } else { 1.0 };
    let nu = traj.params.nu;
    let half = if n >= 5 { 2 } else { 1 };
    Ok((half..n - half)
        .map(|i| {
            let span = i - half..i + half + 1;
            let dm = lagrange_derivative(&traj.times[span.clone()], &traj.mass[span], half);
            (dm + 2.0 * nu * traj.mean_abs[i].powi(2)).abs() / scale
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn single_mode_is_periodic() {
        let m: f64 = 1.3;
        let n = 32;
        let u0 = ModeVector::monomial(n, 1, Complex64::new(m.sqrt(), 0.0));
        for &(nu, alpha, beta) in &[(1.0, 0.0, 0.0), (0.5, 1.0, 0.3)] {
            let p = Params::new(nu, alpha, beta).with_modes(n);
            let traj = evolve(&u0, &p, 10.0, 0.5).unwrap();
            assert!(traj.completed());
            for (t, u) in traj.times.iter().zip(&traj.states) {
                let want = u0.scaled(Complex64::from_polar(1.0, -(1.0 - beta) * m * t));
                assert!(u.distance(&want) / u0.norm() < 1e-8);
            }
            assert!(lyapunov_residual(&traj).unwrap() < 1e-8);
        }
    }

    #[test]
    fn lyapunov_residual_decays_with_sample_step() {
        let n = 64;
        let u0 = ModeVector::from_fn(n, |k| match k {
            0 => Complex64::new(0.5, 0.0),
            1 => Complex64::new(1.0, 0.0),
            _ => Complex64::new(0.0, 0.0),
        });
        let p = Params::new(1.0, 0.0, 0.0).with_modes(n);
        let coarse = lyapunov_residual(&evolve(&u0, &p, 5.0, 2e-2).unwrap()).unwrap();
        let fine = lyapunov_residual(&evolve(&u0, &p, 5.0, 1e-2).unwrap()).unwrap();
        assert!(fine < 1e-5, "{fine}");
        assert!(coarse / fine > 3.5, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn five_point_derivative_is_exact_on_quartics() {
        let x = [0.0, 0.1, 0.25, 0.3, 0.5];
        let y: Vec<f64> = x.iter().map(|t| t * t * t * t - 2.0 * t).collect();
        let d = lagrange_derivative(&x, &y, 2);
        assert!((d - (4.0 * 0.25f64.powi(3) - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn advance_round_trip() {
        let n = 16;
        let u = ModeVector::from_fn(n, |k| Complex64::new(0.5f64.powi(k as i32), 0.1));
        let p = Params::new(1.0, 0.2, 0.4).with_modes(n).with_tolerances(1e-12, 1e-14);
        let back = advance(&advance(&u, &p, 0.7).unwrap(), &p, -0.7).unwrap();
        assert!(back.distance(&u) < 1e-9);
    }

    #[test]
    fn guard_and_validation() {
        let p = Params::default().with_modes(16);
        let wide = ModeVector::monomial(16, 12, Complex64::new(1.0, 0.0));
        let traj = evolve(&wide, &p, 1.0, 0.1).unwrap();
        assert_eq!(traj.len(), 1);
        assert!(matches!(traj.clone().require_complete(), Err(SzegoError::TruncationBreach { .. })));
        assert!(evolve(&ModeVector::zeros(8), &p, 1.0, 0.1).is_err());
        assert!(evolve(&ModeVector::zeros(16), &p, -1.0, 0.1).is_err());
    }

    #[test]
    fn csv_columns() {
        let n = 16;
        let u0 = ModeVector::monomial(n, 1, Complex64::new(1.0, 0.0));
        let opts = EvolveOptions { sobolev_s: vec![1.0, 2.5], ..EvolveOptions::default() };
        let traj = evolve_with(&u0, &Params::default().with_modes(n), 1.0, 0.5, &opts).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,mass,momentum,mean_abs,hs_1,hs_2.5,tail_fraction");
        assert_eq!(lines.count(), 3);
        assert!(traj.states_json().starts_with("{\"times\":[0.0,0.5,1.0],\"states\":[[[0.0,0.0],[1.0,0.0]"));
    }
}
