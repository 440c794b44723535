//! Hankel and shifted Hankel operators of a symbol, their spectra, the
//! functional `F(u)` and the Lax-pair residual of the flow.
//!
//! `H_u f = Π(u f̄)` is antilinear. In the monomial basis it reads
//! `H_u f = Γ f̄` with `Γ_{jk} = û(j+k)`, so `H_u² = Γ Γ†`. The shifted operator
//! is `H̃_u = H_{S*u}`, with `Γ̃_{jk} = û(j+k+1)`.
//!
//! A section of size `n` keeps the rows `0..n` but sums over every stored
//! column, so for a truncated symbol `P_n H_u² P_n` is represented exactly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};
use crate::integrator::advance;
use crate::spectral::{ModeVector, Params};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Thresholds used to turn floating eigenvalues into distinct values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Relative gap below which neighbouring eigenvalues are merged.
    pub cluster_tol: f64,
    /// Eigenvalues below `zero_tol · top` count as zero.
    pub zero_tol: f64,
    /// An eigenspace is dominant when `‖P u‖ > dom_tol · ‖u‖`.
    pub dom_tol: f64,
    /// Section size; `None` uses every stored mode.
    pub section: Option<usize>,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { cluster_tol: 1e-7, zero_tol: 1e-10, dom_tol: 1e-6, section: None }
    }
}

/// Distinct positive eigenvalues of `H_u²` or `H̃_u²`, largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub values: Vec<f64>,
    pub mults: Vec<usize>,
    pub dominant: Vec<bool>,
    #[serde(skip, default = "default_cluster_tol")]
    pub cluster_tol: f64,
}

fn default_cluster_tol() -> f64 {
    SpectrumOptions::default().cluster_tol
}

impl SpectrumReport {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rank of the operator (sum of multiplicities).
    pub fn rank(&self) -> usize {
        self.mults.iter().sum()
    }

    /// `Σ (−1)^k values[k]`.
    pub fn alternating_sum(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| if k % 2 == 0 { *v } else { -*v })
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spectrum report always serializes")
    }
}

/// Rectangular `n × N` Hankel block `û(j+k+shift)`, zero beyond the stored modes.
pub fn hankel_block(u: &ModeVector, n: usize, shifted: bool) -> DMatrix<Complex64> {
    let big = u.len();
    let off = usize::from(shifted);
    DMatrix::from_fn(n, big, |j, k| u.coeff(j + k + off))
}

/// Matrix of `H_u²` (or `H̃_u²`) on the span of the first `n` monomials.
pub fn hankel_sq_matrix(u: &ModeVector, n: usize, shifted: bool) -> Result<DMatrix<Complex64>> {
    if n > u.len() {
        return Err(SzegoError::SectionTooLarge { n, modes: u.len() });
    }
    let g = hankel_block(u, n, shifted);
    Ok(&g * g.adjoint())
}

fn hermitian_eigen(m: DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), m));
    }
    // Entries many orders below the largest one underflow when squared inside
    // the reductions and can poison the result with NaNs. Flushing them to
    // zero moves eigenvalues by at most n·floor·top; the second floor sits at
    // the solver's own backward-error level.
    let top = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for rel in [1e-30, 1e-15] {
        let mut a = m.clone();
        a.iter_mut().filter(|z| z.norm() < rel * top).for_each(|z| *z = Complex64::new(0.0, 0.0));
        let eig = nalgebra::SymmetricEigen::try_new(a, 1e-15, 10_000)
            .ok_or_else(|| SzegoError::Eigensolver(format!("no convergence for {n}x{n} section")))?;
        if eig.eigenvalues.iter().all(|v| v.is_finite()) {
            return Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors));
        }
    }
    Err(SzegoError::Eigensolver("non-finite eigenvalue".into()))
}

/// Eigenvalues of `H²` or `H̃²`, sorted decreasingly, with no clustering.
pub fn raw_eigenvalues(u: &ModeVector, shifted: bool) -> Result<Vec<f64>> {
    let (mut vals, _) = hermitian_eigen(hankel_sq_matrix(u, u.len(), shifted)?)?;
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

/// Spectrum with default zero cutoff and dominance threshold.
pub fn spectrum(u: &ModeVector, shifted: bool, cluster_tol: f64) -> Result<SpectrumReport> {
    spectrum_with(u, shifted, &SpectrumOptions { cluster_tol, ..SpectrumOptions::default() })
}

pub fn spectrum_with(
    u: &ModeVector,
    shifted: bool,
    opts: &SpectrumOptions,
) -> Result<SpectrumReport> {
    let n = opts.section.unwrap_or(u.len());
    let (vals, vecs) = hermitian_eigen(hankel_sq_matrix(u, n, shifted)?)?;

    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let top = order.first().map(|&i| vals[i]).unwrap_or(0.0);

    let uvec = DVector::from_fn(n, |k, _| u.coeff(k));
    let unorm = uvec.norm();

    let mut report = SpectrumReport {
        values: Vec::new(),
        mults: Vec::new(),
        dominant: Vec::new(),
        cluster_tol: opts.cluster_tol,
    };
    if !(top > 0.0) {
        return Ok(report);
    }

    let mut sum = 0.0;
    let mut proj = 0.0;
    let mut count = 0usize;
    let mut prev = f64::NAN;
    let flush = |sum: f64, proj: f64, count: usize, r: &mut SpectrumReport| {
        if count > 0 {
            r.values.push(sum / count as f64);
            r.mults.push(count);
            r.dominant.push(proj.sqrt() > opts.dom_tol * unorm);
        }
    };
    for &i in &order {
        let v = vals[i];
        if v < opts.zero_tol * top {
            break;
        }
        if count > 0 && (prev - v) > opts.cluster_tol * prev {
            flush(sum, proj, count, &mut report);
            sum = 0.0;
            proj = 0.0;
            count = 0;
        }
        let col = vecs.column(i);
        proj += col.dotc(&uvec).norm_sqr();
        sum += v;
        count += 1;
        prev = v;
    }
    flush(sum, proj, count, &mut report);
    Ok(report)
}

/// `F(u) = Σ_k (−1)^{k−1} σ_k²` over the distinct positive eigenvalues of `H̃_u²`.
#[allow(non_snake_case)]
pub fn F_functional(u: &ModeVector) -> Result<f64> {
    Ok(spectrum(u, true, SpectrumOptions::default().cluster_tol)?.alternating_sum())
}

/// Position of a datum relative to the exploding set `Ω = {‖u‖² < F(u)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaMembership {
    InOmega,
    /// `‖u‖² = F(u)` up to the margin; the flag records whether `(u|1) ≠ 0`.
    Boundary { mean_nonzero: bool },
    Outside,
}

pub fn omega_membership(u: &ModeVector, margin: f64) -> Result<OmegaMembership> {
    let f = F_functional(u)?;
    let mass = u.mass();
    Ok(if mass < f - margin {
        OmegaMembership::InOmega
    } else if (mass - f).abs() <= margin {
        let scale = u.norm().max(1.0);
        OmegaMembership::Boundary { mean_nonzero: u.mean().norm() > 1e-12 * scale }
    } else {
        OmegaMembership::Outside
    })
}

/// Toeplitz matrix `T_b` with entries `b̂(j−k)`, where `b = |v|²`.
pub fn toeplitz_abs_sq(v: &ModeVector, n: usize) -> DMatrix<Complex64> {
    let a = v.coeffs();
    let big = a.len();
    // b̂(m) = Σ_k û(k+m) conj(û(k)) for m ≥ 0, conjugate symmetric.
    let bhat: Vec<Complex64> = (0..n.max(1))
        .map(|m| (0..big.saturating_sub(m)).map(|k| a[k + m] * a[k].conj()).sum())
        .collect();
    DMatrix::from_fn(n, n, |j, k| {
        if j >= k {
            bhat[j - k]
        } else {
            bhat[k - j].conj()
        }
    })
}

/// `B_u = −iT_{|u|²} + (i/2)H_u²` and `C_u = −iT_{|u|²} + (i/2)H̃_u²` on `n` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct LaxOperators {
    pub b: DMatrix<Complex64>,
    pub c: DMatrix<Complex64>,
    pub n: usize,
}

impl LaxOperators {
    pub fn new(u: &ModeVector, n: usize) -> Result<Self> {
        let t = toeplitz_abs_sq(u, n);
        let h2 = hankel_sq_matrix(u, n, false)?;
        let ht2 = hankel_sq_matrix(u, n, true)?;
        let half_i = I * 0.5;
        Ok(Self { b: &t * (-I) + h2 * half_i, c: &t * (-I) + ht2 * half_i, n })
    }

    /// `max(‖B + B†‖/‖B‖, ‖C + C†‖/‖C‖)`.
    pub fn skew_defect(&self) -> f64 {
        let d = |m: &DMatrix<Complex64>| {
            let s = m.norm();
            if s == 0.0 {
                0.0
            } else {
                (m + m.adjoint()).norm() / s
            }
        };
        d(&self.b).max(d(&self.c))
    }
}

/// Generator `L = C_u − β B_{S*u}` of the Lax equation `d/dt H̃_u = [L, H̃_u]`.
pub fn lax_generator(u: &ModeVector, beta: f64, n: usize) -> Result<DMatrix<Complex64>> {
    let c = LaxOperators::new(u, n)?.c;
    if beta == 0.0 {
        return Ok(c);
    }
    // B_{S*u} uses H_{S*u}² = H̃_u² and the Toeplitz symbol |S*u|².
    let down = u.shift_down();
    let b = toeplitz_abs_sq(&down, n) * (-I) + hankel_sq_matrix(u, n, true)? * (I * 0.5);
    Ok(c - b * Complex64::new(beta, 0.0))
}

/// Matrix of the antilinear commutator `[L, H̃]`: `L Γ̃ − Γ̃ conj(L)`.
pub fn lax_commutator(u: &ModeVector, beta: f64) -> Result<DMatrix<Complex64>> {
    let big = u.len();
    let l = lax_generator(u, beta, big)?;
    let g = hankel_block(u, big, true);
    Ok(&l * &g - &g * l.map(|z| z.conj()))
}

/// Relative defect of the Lax equation on the leading `n × n` block, with the
/// time derivative of `H̃` taken by a central difference of step `h`.
pub fn lax_residual(u: &ModeVector, p: &Params, n: usize, h: f64) -> Result<f64> {
    if n > u.len() {
        return Err(SzegoError::SectionTooLarge { n, modes: u.len() });
    }
    if !(h > 0.0) {
        return Err(SzegoError::InvalidParams(format!("step h must be > 0, got {h}")));
    }
    let tight = Params { rel_tol: 1e-13, abs_tol: 1e-15, ..*p };
    let fwd = advance(u, &tight, h)?;
    let bwd = advance(u, &tight, -h)?;
    let block = |v: &ModeVector| hankel_block(v, u.len(), true).view((0, 0), (n, n)).into_owned();
    let deriv = (block(&fwd) - block(&bwd)) / Complex64::new(2.0 * h, 0.0);
    let comm = lax_commutator(u, p.beta)?.view((0, 0), (n, n)).into_owned();
    let scale = block(u).norm();
    if scale == 0.0 {
        return Ok((deriv - comm).norm());
    }
    Ok((deriv - comm).norm() / scale)
}

/// True when `a[0] > b[0] > a[1] > b[1] > …` (strict interlacing of two
/// decreasing lists, `a` possibly one longer).
pub fn interlaces(a: &[f64], b: &[f64]) -> bool {
    if a.len() != b.len() && a.len() != b.len() + 1 {
        return false;
    }
    let mut merged = Vec::with_capacity(a.len() + b.len());
    for k in 0..a.len() {
        merged.push(a[k]);
        if k < b.len() {
            merged.push(b[k]);
        }
    }
    merged.windows(2).all(|w| w[0] > w[1])
}

/// Trace of a square complex matrix, real part.
pub fn trace_re(m: &DMatrix<Complex64>) -> f64 {
    m.trace().re
}

/// `H_u² − H̃_u² − u u†` on an `n`-section; vanishes identically.
pub fn rank_one_defect(u: &ModeVector, n: usize) -> Result<f64> {
    let h2 = hankel_sq_matrix(u, n, false)?;
    let ht2 = hankel_sq_matrix(u, n, true)?;
    let v = DVector::from_fn(n, |k, _| u.coeff(k));
    Ok((h2 - ht2 - &v * v.adjoint()).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    const ZERO: Complex64 = Complex64::new(0.0, 0.0);


    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn deep_geometric_tail_does_not_underflow() {
        for p in [0.3, 0.5] {
            let u = ModeVector::from_fn(512, |k| if k == 0 { ZERO } else { c(f64::powi(p, k as i32 - 1)) });
            let r = spectrum(&u, true, 1e-7).unwrap();
            assert_eq!(r.mults, vec![1]);
            assert!((r.values[0] - 1.0 / (1.0 - p * p).powi(2)).abs() < 1e-12);
        }
    }

    fn one_plus_x(n: usize) -> ModeVector {
        ModeVector::from_fn(n, |k| if k < 2 { c(1.0) } else { ZERO })
    }

    fn geometric(n: usize, p: f64) -> ModeVector {
        ModeVector::from_fn(n, |k| if k == 0 { ZERO } else { c(p.powi(k as i32 - 1)) })
    }

    #[test]
    fn small_sections() {
        let u = ModeVector::monomial(8, 1, c(1.0));
        let m = hankel_sq_matrix(&u, 2, false).unwrap();
        assert!((m - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-15);

        let m = hankel_sq_matrix(&u, 2, true).unwrap();
        let (vals, _) = hermitian_eigen(m).unwrap();
        let mut vals = vals;
        vals.sort_by(|a, b| b.total_cmp(a));
        assert!((vals[0] - 1.0).abs() < 1e-15 && vals[1].abs() < 1e-15);

        let m = hankel_sq_matrix(&one_plus_x(8), 2, false).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[c(2.0), c(1.0), c(1.0), c(1.0)]);
        assert!((m - want).norm() < 1e-15);

        assert!(matches!(
            hankel_sq_matrix(&u, 9, false),
            Err(SzegoError::SectionTooLarge { n: 9, modes: 8 })
        ));
    }

    #[test]
    fn spectra_of_examples() {
        let u = geometric(128, 0.5);
        let s = spectrum(&u, true, 1e-7).unwrap();
        assert_eq!(s.mults, vec![1]);
        assert!((s.values[0] - 16.0 / 9.0).abs() < 1e-12);

        let u = one_plus_x(16);
        let s = spectrum(&u, false, 1e-7).unwrap();
        let r5 = 5f64.sqrt();
        assert_eq!(s.len(), 2);
        assert!((s.values[0] - (3.0 + r5) / 2.0).abs() < 1e-13);
        assert!((s.values[1] - (3.0 - r5) / 2.0).abs() < 1e-13);
        let t = spectrum(&u, true, 1e-7).unwrap();
        assert_eq!(t.values.len(), 1);
        assert!((t.values[0] - 1.0).abs() < 1e-14);
        assert!(interlaces(&s.values, &t.values));

        assert!(spectrum(&ModeVector::zeros(16), false, 1e-7).unwrap().is_empty());
    }

    #[test]
    fn multiplicity_and_dominance() {
        // e^{ix}: H² is the identity on span{1, e^{ix}}, u lies in it.
        let s = spectrum(&ModeVector::monomial(16, 1, c(1.0)), false, 1e-7).unwrap();
        assert_eq!(s.mults, vec![2]);
        assert_eq!(s.dominant, vec![true]);
        // e^{2ix}: H̃² has eigenvalue 1 on span{1, e^{ix}}, orthogonal to u.
        let s = spectrum(&ModeVector::monomial(16, 2, c(1.0)), true, 1e-7).unwrap();
        assert_eq!(s.mults, vec![2]);
        assert_eq!(s.dominant, vec![false]);
    }

    #[test]
    fn f_functional_and_omega() {
        assert!((F_functional(&geometric(128, 0.5)).unwrap() - 16.0 / 9.0).abs() < 1e-12);
        assert!((F_functional(&one_plus_x(16)).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(F_functional(&ModeVector::zeros(16)).unwrap(), 0.0);

        assert_eq!(omega_membership(&geometric(128, 0.5), 1e-9).unwrap(), OmegaMembership::InOmega);
        assert_eq!(
            omega_membership(&ModeVector::monomial(16, 1, c(1.0)), 1e-9).unwrap(),
            OmegaMembership::Boundary { mean_nonzero: false }
        );
        assert_eq!(omega_membership(&one_plus_x(16), 1e-9).unwrap(), OmegaMembership::Outside);
    }

    #[test]
    fn report_json_shape() {
        let s = spectrum(&one_plus_x(16), true, 1e-7).unwrap();
        let j = s.to_json();
        assert!(j.starts_with("{\"values\":[") && j.contains("\"mults\":[1]") && j.contains("\"dominant\":[true]"));
        let back: SpectrumReport = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn lax_operators_are_skew() {
        let u = ModeVector::from_fn(16, |k| Complex64::new(1.0 / (1.0 + k as f64), (k as f64).cos() * 0.3));
        let ops = LaxOperators::new(&u, 16).unwrap();
        assert!(ops.skew_defect() < 1e-14);
    }

    #[test]
    fn lax_residual_examples() {
        let p = Params::new(1.0, 0.0, 0.0).with_modes(64);
        let u = ModeVector::monomial(64, 1, Complex64::new(0.6, 0.8));
        assert!(lax_residual(&u, &p, 16, 1e-4).unwrap() < 1e-8);

        let u = geometric(64, 0.5);
        let coarse = lax_residual(&u, &p, 16, 1e-2).unwrap();
        let fine = lax_residual(&u, &p, 16, 1e-4).unwrap();
        assert!(fine < 1e-5, "residual {fine}");
        // second-order decay of the central difference
        assert!(coarse > 100.0 * fine || coarse < 1e-8, "coarse {coarse} fine {fine}");

        let pb = Params::new(0.7, 0.4, 0.6).with_modes(64);
        assert!(lax_residual(&geometric(64, 0.3), &pb, 16, 1e-4).unwrap() < 1e-5);
    }

    #[test]
    fn interlacing_helper() {
        assert!(interlaces(&[3.0, 1.0], &[2.0]));
        assert!(interlaces(&[3.0, 1.0], &[2.0, 0.5]));
        assert!(!interlaces(&[3.0, 1.0], &[3.5]));
        assert!(!interlaces(&[3.0], &[2.0, 1.0]));
    }
}
