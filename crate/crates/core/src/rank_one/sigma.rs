//! Points of the stable set `Σ`: data scattering exponentially to `𝒞_M`.
//!
//! Two independent routes. The Duhamel fixed point solves the scattering
//! chart on `[T, ∞)` from the linear asymptotics; the shooting constructor
//! seeds `(b, c, p)` at a late time from the explicit asymptotic profile and
//! integrates the rank-one system back to `t = 0`.

use nalgebra::Vector4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::constants::{constants, matrix_a, nonlinearity_q, scatter_eigenvector};
use super::reduced::{Chart, ReducedState};
use super::{evolve_bcp_at, RankOneState};
use crate::error::{Result, SzegoError};
use crate::fit::fit_exp_rate;
use crate::ode::sample_grid;
use crate::spectral::Params;

/// Scattering data `(η_∞, θ, φ)` labelling a point of `Σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCharge {
    pub eta_inf: f64,
    pub theta: f64,
    pub phi: f64,
}

impl AsymptoticCharge {
    pub fn new(eta_inf: f64, theta: f64, phi: f64) -> Self {
        Self { eta_inf, theta, phi }
    }
}

/// Output of [`scatter_tail_solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSolution {
    /// `X(T)` in the scattering chart.
    pub state: ReducedState,
    /// Linear term `η_∞ e^{−(ν+σ)T} v` at `T`.
    pub linear: ReducedState,
    pub iterations: usize,
    /// Largest observed ratio of successive fixed-point corrections.
    pub contraction: f64,
}

impl TailSolution {
    /// `|X(T) − X_lin(T)| / |X_lin(T)|`.
    pub fn relative_correction(&self) -> f64 {
        let v = |s: &ReducedState| Vector4::new(s.eta, s.second, s.zeta.re, s.zeta.im);
        let lin = v(&self.linear);
        let n = lin.norm();
        if n == 0.0 {
            0.0
        } else {
            (v(&self.state) - lin).norm() / n
        }
    }
}

fn reduced_from(x: &Vector4<f64>, m: f64) -> ReducedState {
    ReducedState { eta: x[0], second: x[1], zeta: Complex64::new(x[2], x[3]), chart: Chart::Scatter, m }
}

/// Solves `X(t) = e^{−tA}X_∞ − ∫_t^∞ e^{(s−t)A} Q(X(s)) ds` on `[T, ∞)` by
/// fixed-point iteration, `X_∞ = η_∞ v` with `v` the `ν+σ` eigenvector of `A`.
pub fn scatter_tail_solve(
    eta_inf: f64,
    nu: f64,
    alpha: f64,
    beta: f64,
    m: f64,
    t0: f64,
) -> Result<TailSolution> {
    let k = constants(nu, alpha, beta, m, &[])?;
    if !(eta_inf >= 0.0) || !eta_inf.is_finite() {
        return Err(SzegoError::InvalidParams(format!("eta_inf must be >= 0, got {eta_inf}")));
    }
    let lam = nu + k.sigma;
    let v = scatter_eigenvector(nu, alpha, m, k.sigma);
    let size = eta_inf * (-lam * t0).exp();
    if size >= 1e-3 * m {
        return Err(SzegoError::NoContraction { factor: size / (1e-3 * m) });
    }
    let zero = ReducedState { eta: 0.0, second: 0.0, zeta: Complex64::new(0.0, 0.0), chart: Chart::Scatter, m };
    if eta_inf == 0.0 {
        return Ok(TailSolution { state: zero, linear: zero, iterations: 0, contraction: 0.0 });
    }

    let h = 0.05 / lam;
    let steps = (37.0 / (lam * h)).ceil() as usize;
    let times: Vec<f64> = (0..=steps).map(|j| t0 + j as f64 * h).collect();
    let weight: Vec<f64> = times.iter().map(|t| (lam * (t - t0)).exp()).collect();
    let linear: Vec<Vector4<f64>> = times.iter().map(|t| v * (eta_inf * (-lam * t).exp())).collect();
    let step = (matrix_a(nu, alpha, m) * h).exp();

    let wnorm = |xs: &[Vector4<f64>]| xs.iter().zip(&weight).map(|(x, w)| w * x.norm()).fold(0.0, f64::max);
    let scale = wnorm(&linear);

    let mut x = linear.clone();
    let mut prev_diff = f64::NAN;
    let mut contraction: f64 = 0.0;
    for iter in 1..=60 {
        let q: Vec<Vector4<f64>> = x.iter().map(|xi| nonlinearity_q(xi, beta, m)).collect();
        let mut next = vec![Vector4::zeros(); times.len()];
        let mut tail = Vector4::zeros();
        next[steps] = linear[steps];
        for j in (0..steps).rev() {
            // ∫_{t_j}^{t_{j+1}} e^{(s−t_j)A} Q ds by the trapezoid rule
            tail = (q[j] + step * q[j + 1]) * (0.5 * h) + step * tail;
            next[j] = linear[j] - tail;
        }
        let diffs: Vec<Vector4<f64>> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let diff = wnorm(&diffs);
        if prev_diff.is_finite() && prev_diff > 0.0 {
            let ratio = diff / prev_diff;
            contraction = contraction.max(ratio);
            if ratio > 0.5 && diff > 1e-14 * scale {
                return Err(SzegoError::NoContraction { factor: ratio });
            }
        }
        x = next;
        if diff <= 1e-15 * scale {
            log::debug!("tail fixed point converged after {iter} iterations");
            return Ok(TailSolution {
                state: reduced_from(&x[0], m),
                linear: reduced_from(&linear[0], m),
                iterations: iter,
                contraction,
            });
        }
        prev_diff = diff;
    }
    Err(SzegoError::NoContraction { factor: contraction.max(1.0) })
}

/// `(ςρ − α + i(ν−σ))/(2M) − 1`, the phase factor relating `p̄/b` to `c` on `Σ`.
fn profile_factor(nu: f64, alpha: f64, m: f64, sigma: f64, signed_rho: f64) -> Complex64 {
    Complex64::new(signed_rho - alpha, nu - sigma) / (2.0 * m) - 1.0
}

/// Asymptotic profile of a `Σ` trajectory evaluated at time `t`, rescaled so
/// the momentum is exactly `M`.
pub(crate) fn asymptotic_seed(charge: &AsymptoticCharge, nu: f64, alpha: f64, beta: f64, m: f64, t: f64) -> Result<RankOneState> {
    let k = constants(nu, alpha, beta, m, &[])?;
    let sigma = k.sigma;
    let lam = nu + sigma;
    let decay = (-0.5 * lam * t).exp();
    let AsymptoticCharge { eta_inf, theta, phi } = *charge;
    let b = eta_inf.sqrt() * decay
        * Complex64::from_polar(1.0, -t * (2.0 * m + alpha) * lam / (2.0 * sigma) + phi);
    // The conjugate of the printed factor: it is the one consistent with the
    // eigenvector direction of ζ = M c b̄ p̄ and with the limit of p̄/b.
    let w = profile_factor(nu, alpha, m, sigma, f64::from(k.varsigma) * k.rho).conj();
    let p_phase = t * ((alpha + 2.0 * m * beta) * sigma + (2.0 * m + alpha) * nu) / (2.0 * sigma) + theta - phi;
    let p = (eta_inf / m).sqrt() * decay * w * Complex64::from_polar(1.0, p_phase);
    let c_dir = Complex64::from_polar(1.0, -t * m * (1.0 - beta) + theta);
    let c = m.sqrt() * (1.0 - p.norm_sqr()) * c_dir;
    Ok(RankOneState { b, c, p })
}

/// Result of [`construct_sigma_point`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaPoint {
    /// The constructed datum at `t = 0`.
    pub state: RankOneState,
    /// The asymptotic seed at `t = T`.
    pub seed: RankOneState,
    /// `min_t (mass(u(t)) − M)/M` along the forward re-integration.
    pub mass_margin: f64,
    /// Fitted decay rate of `dist(u(t), 𝒞_M)` on `[T/2, T]`.
    pub dist_rate: f64,
}

/// Builds the point of `Σ` with scattering data `charge` by integrating the
/// asymptotic profile backward from `T` to 0, then re-integrates forward and
/// checks the mass floor and the decay rate of the distance to `𝒞_M`.
pub fn construct_sigma_point(
    charge: &AsymptoticCharge,
    nu: f64,
    alpha: f64,
    beta: f64,
    m: f64,
    t_seed: f64,
) -> Result<SigmaPoint> {
    let k = constants(nu, alpha, beta, m, &[])?;
    if !(charge.eta_inf > 0.0) {
        return Err(SzegoError::InvalidParams("eta_inf must be > 0".into()));
    }
    let lam = nu + k.sigma;
    if charge.eta_inf * (-lam * t_seed).exp() >= 1e-3 * m {
        return Err(SzegoError::InvalidParams(format!(
            "seed time {t_seed} too early: eta_inf e^(-(nu+sigma)T) must be < 1e-3 M"
        )));
    }
    let params = Params::new(nu, alpha, beta).with_tolerances(1e-13, 1e-16);
    let seed = asymptotic_seed(charge, nu, alpha, beta, m, t_seed)?;
    let back = evolve_bcp_at(&seed, &params, t_seed, &[0.0])?;
    let state = *back.last();

    let samples = sample_grid(0.0, t_seed, t_seed / 200.0);
    let fwd = evolve_bcp_at(&state, &params, 0.0, &samples)?;
    let mass_margin = fwd.states.iter().map(|s| (s.mass() - m) / m).fold(f64::INFINITY, f64::min);
    if mass_margin < -1e-8 {
        return Err(SzegoError::SigmaCheckFailed(format!("mass fell below M by {:.3e} relative", -mass_margin)));
    }
    let dist: Vec<f64> = fwd.states.iter().map(RankOneState::dist_to_cm).collect();
    let fit = fit_exp_rate(&fwd.times, &dist, Some((0.5 * t_seed, t_seed)))?;
    let want = k.dist_rate();
    if (fit.rate - want).abs() > 0.02 * want {
        return Err(SzegoError::SigmaCheckFailed(format!("distance rate {:.6} vs {:.6}", fit.rate, want)));
    }
    Ok(SigmaPoint { state, seed, mass_margin, dist_rate: fit.rate })
}
