//! The two three-dimensional reductions of the rank-one system.
//!
//! Blow-up chart `(η, γ, ζ)` with `γ = M(1−|p|²)`, scattering chart
//! `(η, δ, ζ)` with `δ = M|p|²`; both use `η = |b|²`, `ζ = M c b̄ p̄`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::constants::gamma_fn;
use crate::error::{Result, SzegoError};
use crate::ode::{integrate, Control, OdeOptions};
use crate::spectral::Params;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    BlowUp,
    Scatter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub eta: f64,
    /// `γ` in the blow-up chart, `δ` in the scattering chart.
    pub second: f64,
    pub zeta: Complex64,
    pub chart: Chart,
    /// Momentum `M`, a parameter of the reduced flow.
    pub m: f64,
}

/// Derivative of a reduced state, in the state's own chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedTangent {
    pub deta: f64,
    pub dsecond: f64,
    pub dzeta: Complex64,
}

impl ReducedState {
    pub fn gamma(&self) -> f64 {
        match self.chart {
            Chart::BlowUp => self.second,
            Chart::Scatter => self.m - self.second,
        }
    }

    pub fn delta(&self) -> f64 {
        match self.chart {
            Chart::BlowUp => self.m - self.second,
            Chart::Scatter => self.second,
        }
    }

    pub fn in_chart(&self, chart: Chart) -> Self {
        let second = match chart {
            Chart::BlowUp => self.gamma(),
            Chart::Scatter => self.delta(),
        };
        Self { second, chart, ..*self }
    }

    /// `|ζ|² − (M−δ)² η δ`, zero on states coming from `𝒲`.
    pub fn invariant_defect(&self) -> f64 {
        self.zeta.norm_sqr() - self.gamma().powi(2) * self.eta * self.delta()
    }

    /// Mass `η + γ` of the underlying symbol.
    pub fn mass(&self) -> f64 {
        self.eta + self.gamma()
    }

    /// L² distance to `𝒞_M`: `√(η + δ)`.
    pub fn dist_to_cm(&self) -> f64 {
        (self.eta + self.delta()).sqrt()
    }

    pub fn sobolev_sq(&self, s: f64) -> f64 {
        sobolev_sq_from_chart(s, self.m, self.eta, self.gamma())
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.eta, self.second, self.zeta.re, self.zeta.im, self.m];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(SzegoError::InvalidParams("reduced state must be finite".into()));
        }
        if !(self.m > 0.0) || self.eta < 0.0 {
            return Err(SzegoError::InvalidParams("need M > 0 and eta >= 0".into()));
        }
        let ok = match self.chart {
            Chart::BlowUp => self.second > 0.0 && self.second <= self.m,
            Chart::Scatter => self.second >= 0.0 && self.second < self.m,
        };
        if !ok {
            return Err(SzegoError::InvalidParams(format!(
                "second coordinate {} outside its chart range for M = {}",
                self.second, self.m
            )));
        }
        Ok(())
    }

    fn to_flat(self) -> [f64; 4] {
        [self.eta, self.second, self.zeta.re, self.zeta.im]
    }

    fn from_flat(y: &[f64], chart: Chart, m: f64) -> Self {
        Self { eta: y[0], second: y[1], zeta: Complex64::new(y[2], y[3]), chart, m }
    }
}

/// Right-hand side of the reduced system in the chart of `s`.
pub fn reduced_rhs(s: &ReducedState, p: &Params) -> ReducedTangent {
    let ReducedState { eta, second, zeta, m, .. } = *s;
    let (nu, alpha, beta) = (p.nu, p.alpha, p.beta);
    let deta = -2.0 * nu * eta + 2.0 * zeta.im;
    match s.chart {
        Chart::BlowUp => {
            let g = second;
            let dzeta = -Complex64::new(nu, (1.0 - beta) * m - alpha) * zeta
                + I * zeta * ((3.0 - beta) * g - eta)
                - 2.0 * I * eta * g * m
                + I * g * g * (m - g + 3.0 * eta);
            ReducedTangent { deta, dsecond: -2.0 * zeta.im, dzeta }
        }
        Chart::Scatter => {
            let d = second;
            let dzeta = -Complex64::new(nu, -(2.0 * m + alpha)) * zeta
                - I * ((3.0 - beta) * d + eta) * zeta
                - 2.0 * I * eta * d * (m - d)
                + I * (m - d).powi(2) * (d + eta);
            ReducedTangent { deta, dsecond: 2.0 * zeta.im, dzeta }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ReducedState>,
}

/// Integrates the reduced system from `t0` through `samples` (monotone,
/// either direction).
pub fn evolve_reduced(
    s0: &ReducedState,
    p: &Params,
    t0: f64,
    samples: &[f64],
    opts: &OdeOptions,
) -> Result<ReducedTrajectory> {
    s0.validate()?;
    let params = *p;
    let (chart, m) = (s0.chart, s0.m);
    let mut traj = ReducedTrajectory { times: Vec::new(), states: Vec::new() };
    integrate(
        |_, y, dy| {
            let t = reduced_rhs(&ReducedState::from_flat(y, chart, m), &params);
            dy.copy_from_slice(&[t.deta, t.dsecond, t.dzeta.re, t.dzeta.im]);
        },
        t0,
        &s0.to_flat(),
        samples,
        |t, y| {
            traj.times.push(t);
            traj.states.push(ReducedState::from_flat(y, chart, m));
            Control::Continue
        },
        opts,
    )?;
    Ok(traj)
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Eulerian polynomial `A_n(x)`, so that `Σ_{k≥1} k^n x^{k−1} = A_n(x)/(1−x)^{n+1}`.
fn eulerian_poly(n: u32, x: f64) -> f64 {
    let mut row = vec![1.0f64];
    for m in 1..=n as usize {
        let mut next = vec![0.0; m];
        for j in 0..m {
            let keep = if j < row.len() { (j + 1) as f64 * row[j] } else { 0.0 };
            let carry = if j >= 1 && j - 1 < row.len() { (m - j) as f64 * row[j - 1] } else { 0.0 };
            next[j] = keep + carry;
        }
        row = next;
    }
    row.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

/// `‖u‖²_{H^s}` for `u ∈ 𝒲` from chart data: `η + (γ²/M) Σ_{k≥1}(1+k²)^s x^{k−1}`
/// with `x = |p|² = 1 − γ/M`. Exact for integer `s`; otherwise a direct sum,
/// switching to the leading asymptotic `Γ(2s+1) M^{2s} γ^{1−2s}` near `|p| = 1`.
pub fn sobolev_sq_from_chart(s: f64, m: f64, eta: f64, gamma: f64) -> f64 {
    let gap = gamma / m;
    let x = 1.0 - gap;
    let c2 = gamma * gamma / m;
    if s >= 0.0 && s.fract() == 0.0 && s <= 30.0 {
        let si = s as u32;
        let series: f64 = (0..=si)
            .map(|j| binomial(si, j) * eulerian_poly(2 * j, x) / gap.powi(2 * j as i32 + 1))
            .sum();
        return eta + c2 * series;
    }
    if gap < 1e-5 {
        return eta + gamma_fn(2.0 * s + 1.0) * m.powf(2.0 * s) * gamma.powf(1.0 - 2.0 * s);
    }
    let mut sum = 0.0;
    let mut xp = 1.0;
    let mut k = 1u64;
    loop {
        let term = (1.0 + (k * k) as f64).powf(s) * xp;
        sum += term;
        if term < 1e-17 * sum && k as f64 * gap > 1.0 {
            break;
        }
        xp *= x;
        k += 1;
    }
    eta + c2 * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank_one::{bcp_rhs, RankOneState};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn fixed_point_and_forcing() {
        let origin = ReducedState { eta: 0.0, second: 0.0, zeta: c(0.0, 0.0), chart: Chart::Scatter, m: 1.3 };
        let t = reduced_rhs(&origin, &Params::new(1.0, 0.4, 0.2));
        assert_eq!((t.deta, t.dsecond, t.dzeta), (0.0, 0.0, c(0.0, 0.0)));

        let (m, g) = (2.0, 0.7);
        let s = ReducedState { eta: 0.0, second: g, zeta: c(0.0, 0.0), chart: Chart::BlowUp, m };
        let t = reduced_rhs(&s, &Params::new(1.0, 0.4, 0.2));
        assert_eq!(t.dsecond, 0.0);
        assert!((t.dzeta - I * g * g * (m - g)).norm() < 1e-15);
    }

    /// Chart rule: d/dt of (|b|², M(1−|p|²) or M|p|², M c b̄ p̄) along the
    /// rank-one field.
    fn pushforward(s: &RankOneState, p: &Params, chart: Chart) -> ReducedTangent {
        let t = bcp_rhs(s, p);
        let m = s.momentum();
        let deta = 2.0 * (s.b.conj() * t.db).re;
        let dp2 = 2.0 * (s.p.conj() * t.dp).re;
        let dzeta = m * (t.dc * s.b.conj() * s.p.conj() + s.c * t.db.conj() * s.p.conj() + s.c * s.b.conj() * t.dp.conj());
        let dsecond = match chart {
            Chart::BlowUp => -m * dp2,
            Chart::Scatter => m * dp2,
        };
        ReducedTangent { deta, dsecond, dzeta }
    }

    #[test]
    fn charts_agree_with_rank_one_field() {
        let mut state = 99u64;
        let mut rnd = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..20 {
            let s = RankOneState::new(c(rnd(), rnd()), c(rnd(), rnd()), c(0.6 * rnd(), 0.6 * rnd()));
            let p = Params::new(0.2 + rnd().abs(), 2.0 * rnd(), 2.0 * rnd());
            for chart in [Chart::BlowUp, Chart::Scatter] {
                let r = s.to_reduced(chart);
                assert!(r.invariant_defect().abs() < 1e-12);
                let a = reduced_rhs(&r, &p);
                let b = pushforward(&s, &p, chart);
                let scale = 1.0 + b.dzeta.norm() + b.deta.abs();
                assert!((a.deta - b.deta).abs() < 1e-10 * scale);
                assert!((a.dsecond - b.dsecond).abs() < 1e-10 * scale);
                assert!((a.dzeta - b.dzeta).norm() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn sobolev_closed_forms_match_direct_sums() {
        let s = RankOneState::new(c(0.2, 0.1), c(0.7, -0.2), c(0.3, 0.5));
        let n = 400;
        let u = s.embed(n);
        for sv in [0.0, 1.0, 2.0, 0.75, 1.5] {
            let want = u.sobolev_sq(sv);
            let got = s.sobolev_sq(sv);
            assert!((got - want).abs() < 1e-11 * want, "s={sv}: {got} vs {want}");
        }
    }

    #[test]
    fn eulerian_values() {
        // A_3(x) = 1 + 4x + x², A_4(x) = 1 + 11x + 11x² + x³
        assert_eq!(eulerian_poly(3, 2.0), 1.0 + 8.0 + 4.0);
        assert_eq!(eulerian_poly(4, 1.0), 24.0);
        assert_eq!(eulerian_poly(0, 0.3), 1.0);
    }
}
