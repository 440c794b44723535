//! Fourier-side representation of L²₊(𝕋) and the nonlinear terms of the
//! damped (α,β)-Szegő equation
//!
//! ```text
//! i ∂ₜu + iν (u|1) = Π(|u|²u) + α (u|1) − β S Π(|S*u|² S*u)
//! ```
//!
//! A state is stored as its nonnegative Fourier coefficients `û(0..N)`.
//! Cubic products are evaluated on a grid of `2N` points, which is enough
//! for the modes `0..N` of `|u|²u` to be free of aliasing.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Truncated Fourier coefficient vector of an element of L²₊.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeVector {
    coeffs: Vec<Complex64>,
}

impl ModeVector {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        Self { coeffs: vec![Complex64::new(0.0, 0.0); n] }
    }

    /// Builds `û(k) = f(k)` for `k < n`.
    pub fn from_fn(n: usize, f: impl FnMut(usize) -> Complex64) -> Self {
        Self { coeffs: (0..n).map(f).collect() }
    }

    /// Single mode `amp · e^{ikx}` in a vector of `n` modes.
    pub fn monomial(n: usize, k: usize, amp: Complex64) -> Self {
        let mut v = Self::zeros(n);
        if k < n {
            v.coeffs[k] = amp;
        }
        v
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// `û(k)`, zero beyond the stored range.
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    /// Copy truncated or zero-padded to `n` modes.
    pub fn resized(&self, n: usize) -> Self {
        let mut c = self.coeffs.clone();
        c.resize(n, Complex64::new(0.0, 0.0));
        Self { coeffs: c }
    }

    /// `(u|1) = û(0)`.
    pub fn mean(&self) -> Complex64 {
        self.coeff(0)
    }

    /// `‖u‖²_{L²} = Σ |û(k)|²`.
    pub fn mass(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `ℳ(u) = Σ k |û(k)|²`.
    pub fn momentum(&self) -> f64 {
        self.coeffs.iter().enumerate().map(|(k, c)| k as f64 * c.norm_sqr()).sum()
    }

    /// `‖u‖²_{H^s} = Σ (1+k²)^s |û(k)|²`.
    pub fn sobolev_sq(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| (1.0 + (k * k) as f64).powf(s) * c.norm_sqr())
            .sum()
    }

    /// Share of the H^{1/2}-type weight `(1+k)|û(k)|²` carried by the upper
    /// half of the stored modes. Zero for the zero vector.
    pub fn tail_fraction(&self) -> f64 {
        let n = self.len();
        let mut total = 0.0;
        let mut tail = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            let w = (1 + k) as f64 * c.norm_sqr();
            total += w;
            if k >= n / 2 {
                tail += w;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// `S*u = e^{-ix}(u − (u|1))`, keeping the mode count.
    pub fn shift_down(&self) -> Self {
        let n = self.len();
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        if n > 1 {
            c[..n - 1].copy_from_slice(&self.coeffs[1..]);
        }
        Self { coeffs: c }
    }

    /// `Su = e^{ix}u`, dropping the top mode.
    pub fn shift_up(&self) -> Self {
        let n = self.len();
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        if n > 1 {
            c[1..].copy_from_slice(&self.coeffs[..n - 1]);
        }
        Self { coeffs: c }
    }

    /// Euclidean (L²) distance to another vector of the same length.
    pub fn distance(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest coefficient-wise difference.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        let n = self.len().max(other.len());
        (0..n).map(|k| (self.coeff(k) - other.coeff(k)).norm()).fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Samples `u(x_j)`, `x_j = 2πj/len`, on a grid of `len ≥ N` points.
    pub fn to_grid(&self, len: usize) -> Vec<Complex64> {
        assert!(len >= self.len(), "grid shorter than mode count");
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        buf[..self.len()].copy_from_slice(&self.coeffs);
        let fft = FftPlanner::new().plan_fft_inverse(len);
        fft.process(&mut buf);
        buf
    }

    /// Interleaved `(re, im)` view used by the ODE integrator.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.len());
        for c in &self.coeffs {
            out.push(c.re);
            out.push(c.im);
        }
        out
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        Self {
            coeffs: flat.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect(),
        }
    }

    /// JSON array of `[re, im]` pairs indexed by frequency.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("complex vectors always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| SzegoError::Serialization(e.to_string()))
    }
}

/// Equation and solver parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Damping ν on the zero mode.
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Mode count N.
    pub modes: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self { nu: 1.0, alpha: 0.0, beta: 0.0, modes: 256, rel_tol: 1e-10, abs_tol: 1e-10 }
    }
}

impl Params {
    pub fn new(nu: f64, alpha: f64, beta: f64) -> Self {
        Self { nu, alpha, beta, ..Self::default() }
    }

    pub fn with_modes(mut self, modes: usize) -> Self {
        self.modes = modes;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(SzegoError::InvalidParams(format!("nu must be > 0, got {}", self.nu)));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(SzegoError::InvalidParams("alpha and beta must be finite".into()));
        }
        if self.modes < 8 {
            return Err(SzegoError::InvalidParams(format!(
                "mode count must be >= 8, got {}",
                self.modes
            )));
        }
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(SzegoError::InvalidParams("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Cached FFT plans and scratch space for cubic products at a fixed mode count.
pub struct Convolver {
    modes: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
    down: Vec<Complex64>,
    cubic: Vec<Complex64>,
    cubic_down: Vec<Complex64>,
}

impl Convolver {
    pub fn new(modes: usize) -> Self {
        let len = 2 * modes.max(1);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let zero = Complex64::new(0.0, 0.0);
        Self {
            modes,
            forward,
            inverse,
            buf: vec![zero; len],
            scratch: vec![zero; scratch_len],
            down: vec![zero; modes],
            cubic: vec![zero; modes],
            cubic_down: vec![zero; modes],
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Writes the first `N` Fourier coefficients of `Π(|u|²u)` into `out`.
    pub fn cubic_into(&mut self, a: &[Complex64], out: &mut [Complex64]) {
        let n = self.modes;
        debug_assert_eq!(a.len(), n);
        let len = self.buf.len();
        let zero = Complex64::new(0.0, 0.0);
        self.buf[..n].copy_from_slice(a);
        self.buf[n..].fill(zero);
        self.inverse.process_with_scratch(&mut self.buf, &mut self.scratch);
        for v in self.buf.iter_mut() {
            *v *= v.norm_sqr();
        }
        self.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
        let inv_len = 1.0 / len as f64;
        for (o, v) in out.iter_mut().zip(&self.buf[..n]) {
            *o = v * inv_len;
        }
    }

    /// Time derivative of the damped (α,β)-Szegő equation.
    pub fn rhs_into(&mut self, a: &[Complex64], p: &Params, out: &mut [Complex64]) {
        let n = self.modes;
        let mut cubic = std::mem::take(&mut self.cubic);
        self.cubic_into(a, &mut cubic);
        let mut beta_part = std::mem::take(&mut self.cubic_down);
        if p.beta != 0.0 && n > 1 {
            let mut down = std::mem::take(&mut self.down);
            down[..n - 1].copy_from_slice(&a[1..]);
            down[n - 1] = Complex64::new(0.0, 0.0);
            self.cubic_into(&down, &mut beta_part);
            self.down = down;
        }
        for k in 0..n {
            let mut nl = cubic[k];
            if p.beta != 0.0 && k >= 1 {
                nl -= p.beta * beta_part[k - 1];
            }
            out[k] = -I * nl;
        }
        let m = a[0];
        out[0] += -I * p.alpha * m - p.nu * m;
        self.cubic = cubic;
        self.cubic_down = beta_part;
    }

    /// Flat `(re, im)` interface for the ODE integrator.
    pub fn rhs_flat(&mut self, y: &[f64], p: &Params, dy: &mut [f64]) {
        let n = self.modes;
        let a: Vec<Complex64> =
            y.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        self.rhs_into(&a, p, &mut out);
        for (k, c) in out.iter().enumerate() {
            dy[2 * k] = c.re;
            dy[2 * k + 1] = c.im;
        }
    }
}

/// `Π(|u|²u)` truncated to the mode count of `u`.
pub fn cubic_term(u: &ModeVector) -> ModeVector {
    let mut conv = Convolver::new(u.len());
    let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
    conv.cubic_into(u.coeffs(), &mut out);
    ModeVector::new(out)
}

/// `S Π(|S*u|² S*u)` (without the β factor).
pub fn beta_term(u: &ModeVector) -> ModeVector {
    cubic_term(&u.shift_down()).shift_up()
}

/// `∂ₜu = −i[Π(|u|²u) + α(u|1) − β SΠ(|S*u|²S*u)] − ν(u|1)`.
pub fn rhs_full(u: &ModeVector, p: &Params) -> ModeVector {
    let mut conv = Convolver::new(u.len());
    let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
    conv.rhs_into(u.coeffs(), p, &mut out);
    ModeVector::new(out)
}

/// `(u | Π(|u|²)) = (1/2π)∫|u|²u`, the zero mode of `Π(|u|²u)`.
pub fn cubic_mean(u: &ModeVector) -> Complex64 {
    cubic_term(u).mean()
}
