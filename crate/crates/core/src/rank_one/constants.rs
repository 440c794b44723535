//! Closed-form constants of the rank-one asymptotics and the linearization
//! of the scattering chart at `𝒞_M`.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};

/// Euler Gamma function.
pub fn gamma_fn(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Blow-up amplitude `a²(s)` for one Sobolev exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ASq {
    pub s: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "M")]
    pub m: f64,
    /// `ς = sgn(α + 2M)`.
    pub varsigma: i8,
    pub sigma: f64,
    pub rho: f64,
    pub kappa: f64,
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    #[serde(rename = "Z")]
    pub z: f64,
    pub a_sq: Vec<ASq>,
}

impl AsymptoticConstants {
    pub fn a_sq(&self, s: f64) -> Option<f64> {
        self.a_sq.iter().find(|a| a.s == s).map(|a| a.value)
    }

    /// Exponential rate of `dist(u, 𝒞_M)` on `Σ`.
    pub fn dist_rate(&self) -> f64 {
        0.5 * (self.nu + self.sigma)
    }

    /// `(σ−ν)/(σ+ν)`, the limit of `δ/η` on `Σ`.
    pub fn delta_eta_limit(&self) -> f64 {
        (self.sigma - self.nu) / (self.sigma + self.nu)
    }

    /// Residual of `λ² + (ν+i(α+2βM))λ − ((1−β)(iν−α)M + β²M²)` at `λ`.
    pub fn char_poly(&self, lambda: Complex64) -> Complex64 {
        let (nu, alpha, beta, m) = (self.nu, self.alpha, self.beta, self.m);
        lambda * lambda + Complex64::new(nu, alpha + 2.0 * beta * m) * lambda
            - ((1.0 - beta) * Complex64::new(-alpha, nu) * m + beta * beta * m * m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("constants always serialize")
    }
}

/// Evaluates `ς, σ, ρ, κ, λ±, Z` and `a²(s)` for each `s` in `s_list`.
pub fn constants(nu: f64, alpha: f64, beta: f64, m: f64, s_list: &[f64]) -> Result<AsymptoticConstants> {
    if !(nu > 0.0) || !(m > 0.0) || !alpha.is_finite() || !beta.is_finite() || !nu.is_finite() || !m.is_finite() {
        return Err(SzegoError::InvalidParams(format!("need nu > 0 and M > 0, got nu = {nu}, M = {m}")));
    }
    let w = alpha + 2.0 * m;
    if w.abs() <= 1e-14 * (alpha.abs() + 2.0 * m) {
        return Err(SzegoError::DegenerateParameters("alpha + 2M = 0 leaves the sign undefined".into()));
    }
    let varsigma: i8 = if w > 0.0 { 1 } else { -1 };
    let d = nu * nu - alpha * alpha - 4.0 * m * alpha;
    let q = 4.0 * nu * nu * w * w;
    let r = (d * d + q).sqrt();
    // σ² = (D + √(D² + q))/2, rewritten when D < 0 to avoid cancellation.
    let sigma2 = if d >= 0.0 { 0.5 * (d + r) } else { q / (2.0 * (r - d)) };
    let sigma = sigma2.sqrt();
    if (sigma - nu).abs() <= 1e-12 * nu {
        return Err(SzegoError::DegenerateParameters("sigma = nu".into()));
    }
    let rho = nu * w.abs() / sigma;
    let sr = f64::from(varsigma) * rho;
    let xi = nu * nu + ((1.0 - beta) * m - alpha).powi(2);
    let kappa = xi / (2.0 * nu * m);
    let head = -Complex64::new(nu, alpha + 2.0 * beta * m);
    let root = Complex64::new(sigma, sr);
    let lambda_plus = 0.5 * (head + root);
    let lambda_minus = 0.5 * (head - root);
    let z = (Complex64::new(sr - alpha, nu - sigma) / (2.0 * m) - 1.0).norm_sqr();
    let a_sq = s_list
        .iter()
        .map(|&s| ASq {
            s,
            value: gamma_fn(2.0 * s + 1.0) * m.powf(4.0 * s - 1.0) * (xi / (2.0 * nu)).powf(1.0 - 2.0 * s),
        })
        .collect();
    Ok(AsymptoticConstants {
        nu,
        alpha,
        beta,
        m,
        varsigma,
        sigma,
        rho,
        kappa,
        lambda_plus,
        lambda_minus,
        z,
        a_sq,
    })
}

/// Linear part of the scattering chart at the origin, `X′ = −A X + Q(X)` with
/// `X = (η, δ, Re ζ, Im ζ)`.
pub fn matrix_a(nu: f64, alpha: f64, m: f64) -> Matrix4<f64> {
    let w = 2.0 * m + alpha;
    let m2 = m * m;
    Matrix4::new(
        2.0 * nu, 0.0, 0.0, -2.0,
        0.0, 0.0, 0.0, -2.0,
        0.0, 0.0, nu, w,
        -m2, -m2, -w, nu,
    )
}

/// Numerical eigenvalues of [`matrix_a`], sorted by real then imaginary part.
pub fn matrix_a_eigenvalues(nu: f64, alpha: f64, m: f64) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = matrix_a(nu, alpha, m).complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

/// Nonlinear remainder `Q(X)` of the scattering chart.
pub fn nonlinearity_q(x: &Vector4<f64>, beta: f64, m: f64) -> Vector4<f64> {
    let (eta, delta, zr, zi) = (x[0], x[1], x[2], x[3]);
    let k = eta + (3.0 - beta) * delta;
    Vector4::new(
        0.0,
        0.0,
        k * zi,
        -k * zr - 2.0 * m * delta * delta - 4.0 * m * eta * delta + delta.powi(3) + 3.0 * eta * delta * delta,
    )
}

/// Eigenvector of `A` for `ν + σ`, normalized so its first entry is 1.
pub fn scatter_eigenvector(nu: f64, alpha: f64, m: f64, sigma: f64) -> Vector4<f64> {
    Vector4::new(
        1.0,
        (sigma - nu) / (sigma + nu),
        (2.0 * m + alpha) * (nu - sigma) / (2.0 * sigma),
        0.5 * (nu - sigma),
    )
}
