//! Long-time classification of data and parallel parameter sweeps.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};
use crate::fit::{default_window, fit_exp_rate, fit_power_law, FitResult};
use crate::integrator::{evolve_with, EvolveOptions};
use crate::ode::sample_grid;
use crate::rank_one::{
    constants, construct_sigma_point, evolve_bcp_at, AsymptoticCharge, RankOneState,
};
use crate::spectral::{ModeVector, Params};

use super::blowup::{blowup_run, generic_start, log_samples};

/// `b = p = 0` up to this (relative to `√M`) counts as a point of `𝒞_M`.
pub const PERIODIC_TOL: f64 = 1e-12;
/// Scattering runs stop once `dist(u, 𝒞_M) < SCATTER_FLOOR·√M`.
pub const SCATTER_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum InitialData {
    Modes(ModeVector),
    RankOne(RankOneState),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Periodic,
    /// Power-law fit of `‖u‖²_{H¹}`; its exponent should be `2s − 1 = 1`.
    BlowUp(FitResult),
    /// Exponential fit of `dist(u, 𝒞_M)`.
    Scatter(FitResult),
    Undetermined { reason: String },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Periodic => "periodic",
            Verdict::BlowUp(_) => "blow_up",
            Verdict::Scatter(_) => "scatter",
            Verdict::Undetermined { .. } => "undetermined",
        }
    }

    pub fn fit(&self) -> Option<&FitResult> {
        match self {
            Verdict::BlowUp(f) | Verdict::Scatter(f) => Some(f),
            _ => None,
        }
    }

    fn undetermined(reason: impl Into<String>) -> Self {
        Verdict::Undetermined { reason: reason.into() }
    }
}

/// Classifies the long-time behaviour of `u0` under parameters `p`.
///
/// Rank-one data (including mode vectors that lie on the rank-one manifold)
/// is run through the rank-one system: first a dense run looking for
/// exponential decay of the distance to `𝒞_M`, then a logarithmic run to
/// `horizon` in the blow-up chart, accepted when `t·γ` is within 5% of `κ`
/// and the `H¹` exponent within 0.05 of 1. Other data uses the truncated
/// PDE and can only be classified as blowing up. Failures are reported as
/// `Undetermined`, never as errors.
pub fn classify(u0: &InitialData, p: &Params, horizon: f64) -> Verdict {
    let run = match u0 {
        InitialData::RankOne(s) => classify_rank_one(s, p, horizon),
        InitialData::Modes(u) => match RankOneState::from_modes(u, 1e-12) {
            Some(s) => classify_rank_one(&s, p, horizon),
            None => classify_modes(u, p, horizon),
        },
    };
    run.unwrap_or_else(|e| Verdict::undetermined(e.to_string()))
}

fn classify_rank_one(s: &RankOneState, p: &Params, horizon: f64) -> Result<Verdict> {
    s.validate()?;
    let m = s.momentum();
    let scale = m.sqrt();
    if s.b.norm() <= PERIODIC_TOL * scale && s.p.norm() <= PERIODIC_TOL {
        return Ok(Verdict::Periodic);
    }
    if !(horizon > 10.0) {
        return Err(SzegoError::InvalidParams(format!("horizon must exceed 10, got {horizon}")));
    }

    // Scattering: dense run until the distance to 𝒞_M is negligible.
    let dense_end = horizon.min(60.0);
    let params = p.with_tolerances(1e-13, 1e-16);
    let mut times = Vec::new();
    let mut dist = Vec::new();
    let dense = evolve_bcp_at(s, &params, 0.0, &sample_grid(0.0, dense_end, 0.02))?;
    for (t, st) in dense.times.iter().zip(&dense.states) {
        times.push(*t);
        dist.push(st.dist_to_cm());
        if st.dist_to_cm() < SCATTER_FLOOR * scale {
            break;
        }
    }
    let t_stop = *times.last().expect("initial sample present");
    if *dist.last().unwrap() < SCATTER_FLOOR * scale {
        let fit = fit_exp_rate(&times, &dist, Some((0.5 * t_stop, t_stop)))?;
        if fit.r_squared > 0.99 && fit.rate > 0.0 {
            return Ok(Verdict::Scatter(fit));
        }
        return Ok(Verdict::undetermined(format!(
            "distance reached {:.1e} but decay is not exponential (R² = {:.4})",
            SCATTER_FLOOR,
            fit.r_squared
        )));
    }

    // Blow-up: γ·t → κ and ‖u‖²_{H¹} ~ t.
    let kappa = constants(p.nu, p.alpha, p.beta, m, &[])?.kappa;
    let run = blowup_run(s, p, &log_samples(1.0, horizon, 400), &[1.0])?;
    let t_gamma = *run.t_gamma().last().expect("non-empty run");
    let fit = fit_power_law(&run.times, &run.sobolev[0], Some(default_window(&run.times)))?;
    let kappa_ok = (t_gamma / kappa - 1.0).abs() < 0.05;
    let exp_ok = (fit.rate - 1.0).abs() < 0.05 && fit.r_squared > 0.99;
    Ok(if kappa_ok && exp_ok {
        Verdict::BlowUp(fit)
    } else {
        Verdict::undetermined(format!(
            "t·γ = {t_gamma:.4} vs κ = {kappa:.4}, H¹ exponent {:.4} (R² = {:.4}) at t = {horizon}",
            fit.rate, fit.r_squared
        ))
    })
}

fn classify_modes(u: &ModeVector, p: &Params, horizon: f64) -> Result<Verdict> {
    let p = p.with_modes(u.len());
    let opts = EvolveOptions { keep_states: false, ..EvolveOptions::default() };
    let traj = evolve_with(u, &p, horizon, horizon / 400.0, &opts)?;
    let h1 = traj.sobolev_series(1.0).expect("H¹ is recorded by default");
    let t_last = *traj.times.last().expect("non-empty run");
    let fit = match fit_power_law(&traj.times, h1, Some(default_window(&traj.times))) {
        Ok(f) => f,
        Err(e) => return Ok(Verdict::undetermined(format!("run ended at t = {t_last}: {e}"))),
    };
    Ok(if traj.completed() && (fit.rate - 1.0).abs() < 0.05 && fit.r_squared > 0.99 {
        Verdict::BlowUp(fit)
    } else {
        Verdict::undetermined(format!(
            "truncated PDE run to t = {t_last} ({}), H¹ exponent {:.4}",
            if traj.completed() { "completed" } else { "truncation breach" },
            fit.rate
        ))
    })
}

/// Families of rank-one initial data with momentum `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `(0.3, √M·0.75, 0.5)`: off `Σ` and off `𝒞_M`.
    Generic,
    /// `(0, √M, 0)`: a point of `𝒞_M`.
    Periodic,
    /// The point of `Σ` with charge `(1, 0, 0)`.
    Sigma,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::Generic => "generic",
            Family::Periodic => "periodic",
            Family::Sigma => "sigma",
        }
    }

    pub fn initial_data(self, nu: f64, alpha: f64, beta: f64, m: f64) -> Result<RankOneState> {
        match self {
            Family::Generic => Ok(generic_start(0.09, m)),
            Family::Periodic => Ok(RankOneState::real(0.0, m.sqrt(), 0.0)),
            Family::Sigma => {
                let k = constants(nu, alpha, beta, m, &[])?;
                let t_seed = 20.0 / (nu + k.sigma);
                let charge = AsymptoticCharge::new(1.0, 0.0, 0.0);
                Ok(construct_sigma_point(&charge, nu, alpha, beta, m, t_seed)?.state)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub nu: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(rename = "M")]
    pub m: Vec<f64>,
    pub families: Vec<Family>,
    pub horizon: f64,
}

impl SweepGrid {
    /// Cells in row-major order `(ν, α, β, M, family)`.
    pub fn cells(&self) -> Vec<(f64, f64, f64, f64, Family)> {
        let mut out = Vec::new();
        for &nu in &self.nu {
            for &alpha in &self.alpha {
                for &beta in &self.beta {
                    for &m in &self.m {
                        for &f in &self.families {
                            out.push((nu, alpha, beta, m, f));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub family: Family,
    pub verdict: String,
    pub rate: Option<f64>,
    /// Closed-form `κ`.
    pub kappa: Option<f64>,
    /// Closed-form `a²(1)`.
    pub a_sq: Option<f64>,
    pub sigma: Option<f64>,
    pub r_squared: Option<f64>,
    pub error: Option<String>,
}

fn sweep_cell(nu: f64, alpha: f64, beta: f64, m: f64, family: Family, horizon: f64) -> SweepRow {
    let mut row = SweepRow {
        nu,
        alpha,
        beta,
        m,
        family,
        verdict: "error".into(),
        rate: None,
        kappa: None,
        a_sq: None,
        sigma: None,
        r_squared: None,
        error: None,
    };
    match constants(nu, alpha, beta, m, &[1.0]) {
        Ok(k) => {
            row.kappa = Some(k.kappa);
            row.a_sq = k.a_sq(1.0);
            row.sigma = Some(k.sigma);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    let s0 = match family.initial_data(nu, alpha, beta, m) {
        Ok(s) => s,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let verdict = classify(&InitialData::RankOne(s0), &Params::new(nu, alpha, beta), horizon);
    row.verdict = verdict.label().into();
    if let Some(f) = verdict.fit() {
        row.rate = Some(f.rate);
        row.r_squared = Some(f.r_squared);
    }
    if let Verdict::Undetermined { reason } = verdict {
        row.error.get_or_insert(reason);
    }
    row
}

/// Classifies every grid cell on a pool of `jobs` threads (0 = rayon default).
/// Rows come back in [`SweepGrid::cells`] order; per-cell failures are recorded
/// in the `error` column.
pub fn sweep(grid: &SweepGrid, jobs: usize) -> Result<Vec<SweepRow>> {
    if grid.cells().is_empty() {
        return Err(SzegoError::InvalidParams("sweep grid is empty".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SzegoError::InvalidParams(format!("thread pool: {e}")))?;
    let cells = grid.cells();
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|&(nu, alpha, beta, m, f)| sweep_cell(nu, alpha, beta, m, f, grid.horizon))
            .collect()
    }))
}

/// Writes rows as CSV with header
/// `nu,alpha,beta,M,family,verdict,rate,kappa,a_sq,sigma,r_squared,error`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(|e| SzegoError::Serialization(e.to_string()))?;
    }
    wr.flush().map_err(|e| SzegoError::Serialization(e.to_string()))
}
