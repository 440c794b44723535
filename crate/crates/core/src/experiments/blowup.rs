//! Long reduced-chart runs for the blow-up laws `γ(t) ~ κ/t` and
//! `‖u(t)‖²_{H^s} ~ a²(s) t^{2s−1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};
use crate::ode::OdeOptions;
use crate::rank_one::{constants, evolve_reduced, Chart, RankOneState};
use crate::spectral::Params;

/// Rank-one datum `(√η₀, √M(1−p₀²), p₀)` with `p₀ = 0.5`: momentum `M`,
/// off `Σ` and off `𝒞_M` for `η₀ > 0`.
pub fn generic_start(eta0: f64, m: f64) -> RankOneState {
    let p0: f64 = 0.5;
    RankOneState::real(eta0.sqrt(), m.sqrt() * (1.0 - p0 * p0), p0)
}

/// `n` points from `lo` to `hi`, equally spaced in `ln t`.
pub fn log_samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let (a, b) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    v[n - 1] = hi;
    v
}

/// Tolerances for multi-decade reduced runs.
pub fn long_run_options() -> OdeOptions {
    OdeOptions { rel_tol: 1e-12, abs_tol: 1e-18, max_step: 0.1, ..OdeOptions::default() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowUpRun {
    pub times: Vec<f64>,
    pub eta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sobolev_s: Vec<f64>,
    /// `sobolev[i][j] = ‖u(times[j])‖²_{H^{s_i}}` evaluated from `(η, γ)`.
    pub sobolev: Vec<Vec<f64>>,
}

impl BlowUpRun {
    pub fn t_gamma(&self) -> Vec<f64> {
        self.times.iter().zip(&self.gamma).map(|(t, g)| t * g).collect()
    }
}

/// Integrates the blow-up chart from `start` (at `t = 0`) through `samples`.
pub fn blowup_run(
    start: &RankOneState,
    p: &Params,
    samples: &[f64],
    sobolev_s: &[f64],
) -> Result<BlowUpRun> {
    let r0 = start.to_reduced(Chart::BlowUp);
    let run = evolve_reduced(&r0, p, 0.0, samples, &long_run_options())?;
    let eta: Vec<f64> = run.states.iter().map(|s| s.eta).collect();
    let gamma: Vec<f64> = run.states.iter().map(|s| s.gamma()).collect();
    let sobolev = sobolev_s
        .iter()
        .map(|&s| run.states.iter().map(|r| r.sobolev_sq(s)).collect())
        .collect();
    Ok(BlowUpRun { times: run.times, eta, gamma, sobolev_s: sobolev_s.to_vec(), sobolev })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSeries {
    pub times: Vec<f64>,
    pub t_gamma: Vec<f64>,
    /// Closed-form `κ`.
    pub kappa: f64,
}

impl KappaSeries {
    pub fn final_value(&self) -> f64 {
        *self.t_gamma.last().expect("series is never empty")
    }

    /// `max |tγ/κ − 1|` over samples with `t ≥ t_lo`.
    pub fn max_rel_dev(&self, t_lo: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.t_gamma)
            .filter(|(t, _)| **t >= t_lo)
            .map(|(_, v)| (v / self.kappa - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Runs the blow-up chart from [`generic_start`]`(η₀, M)` to `t_end` and
/// reports `t·γ(t)` on a logarithmic grid starting at `t = 1`.
pub fn kappa_check(nu: f64, alpha: f64, beta: f64, m: f64, eta0: f64, t_end: f64) -> Result<KappaSeries> {
    if !(t_end > 1.0) {
        return Err(SzegoError::InvalidParams(format!("t_end must exceed 1, got {t_end}")));
    }
    if !(eta0 > 0.0) {
        return Err(SzegoError::InvalidParams("eta0 must be > 0 for generic data".into()));
    }
    let kappa = constants(nu, alpha, beta, m, &[])?.kappa;
    let p = Params::new(nu, alpha, beta);
    let samples = log_samples(1.0, t_end, 400);
    let run = blowup_run(&generic_start(eta0, m), &p, &samples, &[])?;
    let t_gamma = run.t_gamma();
    Ok(KappaSeries { times: run.times, t_gamma, kappa })
}
