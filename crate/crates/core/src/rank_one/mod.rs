//! Exact dynamics on the rank-one manifold
//! `𝒲 = { b + c e^{ix} / (1 − p e^{ix}) : c ≠ 0, |p| < 1 }`.

mod constants;
mod reduced;
mod sigma;

pub use constants::{
    constants, gamma_fn, matrix_a, matrix_a_eigenvalues, nonlinearity_q, scatter_eigenvector,
    ASq, AsymptoticConstants,
};
pub use reduced::{
    evolve_reduced, reduced_rhs, sobolev_sq_from_chart, Chart, ReducedState, ReducedTrajectory,
};
pub use sigma::{
    construct_sigma_point, scatter_tail_solve, AsymptoticCharge, SigmaPoint, TailSolution,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};
use crate::ode::{integrate, sample_grid, Control, OdeOptions};
use crate::spectral::{ModeVector, Params};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Stop threshold for `1 − |p|²` along a rank-one run.
pub const P_BOUNDARY: f64 = 1e-12;

/// Point `(b, c, p)` of `𝒲`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankOneState {
    pub b: Complex64,
    pub c: Complex64,
    pub p: Complex64,
}

/// Time derivative `(b′, c′, p′)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcpTangent {
    pub db: Complex64,
    pub dc: Complex64,
    pub dp: Complex64,
}

impl RankOneState {
    pub fn new(b: Complex64, c: Complex64, p: Complex64) -> Self {
        Self { b, c, p }
    }

    /// Real triple, convenient for tests and CLI flags.
    pub fn real(b: f64, c: f64, p: f64) -> Self {
        Self::new(b.into(), c.into(), p.into())
    }

    /// `1 − |p|²`.
    pub fn p_gap(&self) -> f64 {
        1.0 - self.p.norm_sqr()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.b, self.c, self.p].iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return Err(SzegoError::InvalidParams("rank-one state must be finite".into()));
        }
        if self.p.norm() >= 1.0 {
            return Err(SzegoError::InvalidParams(format!("|p| must be < 1, got {}", self.p.norm())));
        }
        // c = 0 is only admitted as the constant state (b, 0, 0), where p carries no information
        if self.c == Complex64::new(0.0, 0.0) && self.p != Complex64::new(0.0, 0.0) {
            return Err(SzegoError::InvalidParams("c = 0 requires p = 0".into()));
        }
        Ok(())
    }

    /// `ℳ = |c|² / (1 − |p|²)²`.
    pub fn momentum(&self) -> f64 {
        self.c.norm_sqr() / self.p_gap().powi(2)
    }

    /// `‖u‖² = |b|² + |c|² / (1 − |p|²)`.
    pub fn mass(&self) -> f64 {
        self.b.norm_sqr() + self.c.norm_sqr() / self.p_gap()
    }

    /// `‖u‖²_{H^s}` in closed form (exact for integer `s`).
    pub fn sobolev_sq(&self, s: f64) -> f64 {
        let m = self.momentum();
        if m == 0.0 {
            return self.b.norm_sqr();
        }
        let gamma = m * self.p_gap();
        sobolev_sq_from_chart(s, m, self.b.norm_sqr(), gamma)
    }

    /// L² distance to the circle `𝒞_M`, `M` the momentum of the state.
    /// Equal to `√(‖u‖² − 2√M|c| + M)`, written in a cancellation-free form.
    pub fn dist_to_cm(&self) -> f64 {
        (self.b.norm_sqr() + self.momentum() * self.p.norm_sqr()).sqrt()
    }

    /// Fourier coefficients `û(0) = b`, `û(k) = c p^{k−1}`.
    pub fn embed(&self, n: usize) -> ModeVector {
        let mut coeffs = Vec::with_capacity(n);
        if n > 0 {
            coeffs.push(self.b);
        }
        let mut term = self.c;
        for _ in 1..n {
            coeffs.push(term);
            term *= self.p;
        }
        ModeVector::new(coeffs)
    }

    /// Blow-up chart `(η, γ, ζ) = (|b|², M(1−|p|²), M c b̄ p̄)`.
    pub fn to_reduced(&self, chart: Chart) -> ReducedState {
        let m = self.momentum();
        let eta = self.b.norm_sqr();
        let zeta = m * self.c * self.b.conj() * self.p.conj();
        let second = match chart {
            Chart::BlowUp => m * self.p_gap(),
            Chart::Scatter => m * self.p.norm_sqr(),
        };
        ReducedState { eta, second, zeta, chart, m }
    }

    pub fn to_flat(&self) -> [f64; 6] {
        [self.b.re, self.b.im, self.c.re, self.c.im, self.p.re, self.p.im]
    }

    pub fn from_flat(y: &[f64]) -> Self {
        Self {
            b: Complex64::new(y[0], y[1]),
            c: Complex64::new(y[2], y[3]),
            p: Complex64::new(y[4], y[5]),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("rank-one state always serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| SzegoError::Serialization(e.to_string()))
    }

    /// Recovers `(b, c, p)` from mode data when it lies on `𝒲` up to `tol`
    /// (relative, coefficient-wise).
    pub fn from_modes(u: &ModeVector, tol: f64) -> Option<Self> {
        let c = u.coeff(1);
        if c.norm() == 0.0 || u.len() < 3 {
            return None;
        }
        let state = Self { b: u.coeff(0), c, p: u.coeff(2) / c };
        if state.p.norm() >= 1.0 {
            return None;
        }
        let scale = u.norm();
        (state.embed(u.len()).sup_distance(u) <= tol * scale).then_some(state)
    }
}

/// Vector field of the rank-one system with `M` read off the state.
pub fn bcp_rhs(s: &RankOneState, p: &Params) -> BcpTangent {
    let RankOneState { b, c, p: q } = *s;
    let gap = s.p_gap();
    let m = c.norm_sqr() / (gap * gap);
    let b2 = b.norm_sqr();
    let db = -I * ((b2 + 2.0 * m * gap) * b + m * c * q.conj())
        - Complex64::new(p.nu, p.alpha) * b;
    let dc = -I * (2.0 * b2 * c + 2.0 * m * gap * b * q + (1.0 - p.beta) * m * c);
    let dp = -I * (c * b.conj() + (1.0 - p.beta) * m * q * gap);
    BcpTangent { db, dc, dp }
}

fn bcp_flat(y: &[f64], p: &Params, dy: &mut [f64]) {
    let t = bcp_rhs(&RankOneState::from_flat(y), p);
    dy.copy_from_slice(&[t.db.re, t.db.im, t.dc.re, t.dc.im, t.dp.re, t.dp.im]);
}

/// Sampled rank-one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcpTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<RankOneState>,
    /// Set when the run stopped because `1 − |p|²` fell below [`P_BOUNDARY`].
    pub reached_boundary: bool,
}

impl BcpTrajectory {
    pub fn last(&self) -> &RankOneState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn momentum_drift(&self) -> f64 {
        let m0 = self.states[0].momentum();
        self.states.iter().map(|s| (s.momentum() - m0).abs() / m0).fold(0.0, f64::max)
    }
}

/// Tolerances used for the six-dimensional rank-one system. Tighter than the
/// PDE defaults; the system is cheap and long runs accumulate drift.
pub fn bcp_options(p: &Params) -> OdeOptions {
    OdeOptions {
        rel_tol: p.rel_tol.min(1e-12),
        abs_tol: p.abs_tol.min(1e-14),
        max_step: 0.1,
        ..OdeOptions::default()
    }
}

/// Integrates the rank-one system through the given sample times, which may
/// run backward from `t0`.
pub fn evolve_bcp_at(
    s0: &RankOneState,
    p: &Params,
    t0: f64,
    samples: &[f64],
) -> Result<BcpTrajectory> {
    s0.validate()?;
    if !(p.nu >= 0.0) {
        return Err(SzegoError::InvalidParams(format!("nu must be >= 0, got {}", p.nu)));
    }
    let params = *p;
    let mut traj = BcpTrajectory { times: Vec::new(), states: Vec::new(), reached_boundary: false };
    integrate(
        |_, y, dy| bcp_flat(y, &params, dy),
        t0,
        &s0.to_flat(),
        samples,
        |t, y| {
            let s = RankOneState::from_flat(y);
            traj.times.push(t);
            traj.states.push(s);
            if s.p_gap() < P_BOUNDARY {
                traj.reached_boundary = true;
                log::warn!("1 - |p|^2 = {:.3e} at t = {t}; stopping", s.p_gap());
                Control::Stop
            } else {
                Control::Continue
            }
        },
        &bcp_options(p),
    )?;
    Ok(traj)
}

/// Integrates from `t = 0` to `t_end` with samples every `sample_dt`.
pub fn evolve_bcp(
    s0: &RankOneState,
    p: &Params,
    t_end: f64,
    sample_dt: f64,
) -> Result<BcpTrajectory> {
    if !(t_end > 0.0) || !(sample_dt > 0.0) {
        return Err(SzegoError::InvalidParams("t_end and sample_dt must be > 0".into()));
    }
    evolve_bcp_at(s0, p, 0.0, &sample_grid(0.0, t_end, sample_dt))
}

/// Flow map of the rank-one system over `dt` (either sign).
pub fn advance_bcp(s: &RankOneState, p: &Params, dt: f64) -> Result<RankOneState> {
    if dt == 0.0 {
        return Ok(*s);
    }
    Ok(*evolve_bcp_at(s, p, 0.0, &[dt])?.last())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::rhs_full;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pseudo_random(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed;
        move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        }
    }

    #[test]
    fn embed_examples() {
        let e = RankOneState::real(0.0, 1.0, 0.0).embed(4);
        assert_eq!(e.coeffs(), &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let e = RankOneState::real(0.0, 1.0, 0.5).embed(4);
        assert_eq!(e.coeffs(), &[c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), c(0.25, 0.0)]);
        let e = RankOneState::new(c(1.0, 1.0), c(2.0, 0.0), c(0.0, 0.3)).embed(3);
        assert!(e.sup_distance(&ModeVector::new(vec![c(1.0, 1.0), c(2.0, 0.0), c(0.0, 0.6)])) < 1e-15);
    }

    #[test]
    fn periodic_orbit_tangent() {
        let cc = c(0.6, -0.3);
        for beta in [0.0, 0.4, 2.0] {
            let t = bcp_rhs(&RankOneState::new(c(0.0, 0.0), cc, c(0.0, 0.0)), &Params::new(1.0, 0.5, beta));
            assert_eq!(t.db, c(0.0, 0.0));
            assert_eq!(t.dp, c(0.0, 0.0));
            assert!((I * t.dc - (1.0 - beta) * cc.norm_sqr() * cc).norm() < 1e-15);
        }
    }

    #[test]
    fn momentum_is_first_integral_of_field() {
        let mut rnd = pseudo_random(7);
        for _ in 0..50 {
            let s = RankOneState::new(c(rnd(), rnd()), c(rnd(), rnd()), c(0.6 * rnd(), 0.6 * rnd()));
            let p = Params::new(1.0 + rnd().abs(), 2.0 * rnd(), 2.0 * rnd());
            let t = bcp_rhs(&s, &p);
            // dℳ = 2Re(c̄ c′)/g² + 4|c|² Re(p̄ p′)/g³ with g = 1 − |p|²
            let g = s.p_gap();
            let dm = 2.0 * (s.c.conj() * t.dc).re / (g * g)
                + 4.0 * s.c.norm_sqr() * (s.p.conj() * t.dp).re / (g * g * g);
            assert!(dm.abs() < 1e-12 * s.momentum().max(1.0), "{dm}");
        }
    }

    #[test]
    fn field_matches_pde_on_embedding() {
        let mut rnd = pseudo_random(11);
        let n = 256;
        for _ in 0..10 {
            let s = RankOneState::new(c(rnd(), rnd()), c(rnd(), rnd()), c(0.5 * rnd(), 0.5 * rnd()));
            let p = Params::new(0.5 + rnd().abs(), rnd(), 2.0 * rnd()).with_modes(n);
            let t = bcp_rhs(&s, &p);
            // d/dt of û(k) = c p^{k−1}: c′p^{k−1} + (k−1) c p^{k−2} p′
            let tangent = ModeVector::from_fn(n, |k| match k {
                0 => t.db,
                1 => t.dc,
                _ => t.dc * s.p.powu(k as u32 - 1) + (k as f64 - 1.0) * s.c * s.p.powu(k as u32 - 2) * t.dp,
            });
            let got = rhs_full(&s.embed(n), &p);
            assert!(got.sup_distance(&tangent) < 1e-10 * tangent.norm().max(1.0));
        }
    }

    #[test]
    fn dist_examples() {
        let m: f64 = 1.7;
        assert_eq!(RankOneState::real(0.0, m.sqrt(), 0.0).dist_to_cm(), 0.0);
        let s = RankOneState::new(c(0.3, -0.4), c(m.sqrt(), 0.0), c(0.0, 0.0));
        assert!((s.dist_to_cm() - 0.5).abs() < 1e-15);
        let s = RankOneState::real(0.0, 1.0, 0.5);
        assert!((s.dist_to_cm() - 2.0 / 3.0).abs() < 1e-15);
        let closed = (s.mass() - 2.0 * s.momentum().sqrt() * s.c.norm() + s.momentum()).sqrt();
        assert!((closed - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn periodic_run_stays_on_circle() {
        let traj = evolve_bcp(&RankOneState::real(0.0, 1.0, 0.0), &Params::default(), 50.0, 1.0).unwrap();
        for s in &traj.states {
            assert!((s.c.norm() - 1.0).abs() < 1e-10 && s.b.norm() == 0.0 && s.p.norm() == 0.0);
        }
    }

    #[test]
    fn run_conserves_momentum() {
        let s0 = RankOneState::new(c(0.3, 0.1), c(1.0, 0.0), c(0.2, 0.4));
        let traj = evolve_bcp(&s0, &Params::new(1.0, 0.3, 0.5), 100.0, 1.0).unwrap();
        assert!(traj.momentum_drift() < 1e-10, "{}", traj.momentum_drift());
    }

    #[test]
    fn json_shape_and_mode_recovery() {
        let s = RankOneState::new(c(1.0, 2.0), c(0.5, 0.0), c(0.0, -0.25));
        assert_eq!(s.to_json(), r#"{"b":[1.0,2.0],"c":[0.5,0.0],"p":[0.0,-0.25]}"#);
        assert_eq!(RankOneState::from_json(&s.to_json()).unwrap(), s);
        let back = RankOneState::from_modes(&s.embed(64), 1e-12).unwrap();
        assert!((back.p - s.p).norm() < 1e-15);
        assert!(RankOneState::from_modes(&ModeVector::monomial(64, 3, c(1.0, 0.0)), 1e-12).is_none());
    }

    #[test]
    fn invalid_states_rejected() {
        assert!(RankOneState::real(0.0, 1.0, 1.0).validate().is_err());
        assert!(RankOneState::real(1.0, 0.0, 0.2).validate().is_err());
        assert!(RankOneState::real(1.0, 0.0, 0.0).validate().is_ok());
    }
}
