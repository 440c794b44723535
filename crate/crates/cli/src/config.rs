//! Run configuration: JSON file merged with command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::Result;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use szego_core::experiments::SweepGrid;
use szego_core::rank_one::{Chart, RankOneState};
use szego_core::{ModeVector, Params};

use crate::{Flags, Invalid};

/// Initial data as it may appear in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `b + c e^{ix} / (1 − p e^{ix})`.
    RankOne { b: Complex64, c: Complex64, p: Complex64 },
    /// Taylor coefficients of `numerator / denominator` in `z = e^{ix}`.
    Rational { numerator: Vec<Complex64>, denominator: Vec<Complex64> },
    /// Explicit Fourier coefficients `û(0), û(1), …`.
    Modes(ModeVector),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoSpec {
    pub sigma1: f64,
    pub sigma2: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub nu: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub modes: Option<usize>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub t_end: Option<f64>,
    pub sample_dt: Option<f64>,
    /// Sobolev exponents to record.
    pub s: Option<Vec<f64>>,
    #[serde(rename = "M")]
    pub momentum: Option<f64>,
    pub initial: Option<InitialSpec>,
    /// Path to a JSON mode vector (or an `initial` object).
    pub input: Option<PathBuf>,
    pub shifted: Option<bool>,
    pub chart: Option<Chart>,
    /// Stationary search: polynomial degree and RNG seed.
    pub degree: Option<usize>,
    pub seed: Option<u64>,
    pub rho: Option<RhoSpec>,
    pub sweep: Option<SweepGrid>,
    pub jobs: Option<usize>,
    /// Fit: column name, `power` or `exp`, optional window.
    pub column: Option<String>,
    pub kind: Option<String>,
    pub window: Option<(f64, f64)>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read(path)?;
        serde_json::from_str(&text).map_err(|e| Invalid(format!("config {}: {e}", path.display())).into())
    }

    /// Applies command-line overrides on top of the file values.
    pub fn merge(mut self, f: &Flags) -> Self {
        macro_rules! over {
            ($($field:ident),*) => { $( if f.$field.is_some() { self.$field = f.$field.clone(); } )* };
        }
        over!(nu, alpha, beta, modes, t_end, sample_dt, momentum, input, chart, degree, seed, jobs, column, kind, out);
        if f.shifted {
            self.shifted = Some(true);
        }
        if !f.s.is_empty() {
            self.s = Some(f.s.clone());
        }
        if let Some(w) = f.window {
            self.window = Some(w);
        }
        if f.b.is_some() || f.c.is_some() || f.p.is_some() {
            let r = |v: Option<f64>| Complex64::new(v.unwrap_or(0.0), 0.0);
            self.initial = Some(InitialSpec::RankOne { b: r(f.b), c: r(f.c.or(Some(1.0))), p: r(f.p) });
        }
        if let (Some(s1), Some(s2), Some(eps)) = (f.sigma1, f.sigma2, f.eps) {
            self.rho = Some(RhoSpec { sigma1: s1, sigma2: s2, eps });
        }
        self
    }

    /// Fills solver defaults so the logged config fully determines the run.
    pub fn resolve(mut self, default_modes: usize) -> Result<Self> {
        self.modes.get_or_insert(default_modes);
        let p = self.params()?;
        self.nu = Some(p.nu);
        self.alpha = Some(p.alpha);
        self.beta = Some(p.beta);
        self.modes = Some(p.modes);
        self.rel_tol = Some(p.rel_tol);
        self.abs_tol = Some(p.abs_tol);
        Ok(self)
    }

    pub fn params(&self) -> Result<Params> {
        let d = Params::default();
        let p = Params {
            nu: self.nu.unwrap_or(d.nu),
            alpha: self.alpha.unwrap_or(d.alpha),
            beta: self.beta.unwrap_or(d.beta),
            modes: self.modes.unwrap_or(d.modes),
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn t_end(&self, default: f64) -> Result<f64> {
        let t = self.t_end.unwrap_or(default);
        if !(t > 0.0) || !t.is_finite() {
            return Err(Invalid(format!("t_end must be positive, got {t}")).into());
        }
        Ok(t)
    }

    pub fn sobolev_s(&self) -> Vec<f64> {
        self.s.clone().unwrap_or_else(|| vec![1.0])
    }

    fn initial_spec(&self) -> Result<Option<InitialSpec>> {
        if let Some(path) = &self.input {
            let text = read(path)?;
            if let Ok(u) = ModeVector::from_json(&text) {
                return Ok(Some(InitialSpec::Modes(u)));
            }
            // Output of `stationary --degree`.
            if let Ok(c) = serde_json::from_str::<Candidate>(&text) {
                return Ok(Some(InitialSpec::Modes(c.u)));
            }
            let spec = serde_json::from_str(&text).map_err(|e| {
                Invalid(format!("{}: not a mode vector, candidate or initial data: {e}", path.display()))
            })?;
            return Ok(Some(spec));
        }
        Ok(self.initial.clone())
    }

    /// Initial data as a mode vector of length `modes`.
    pub fn modes_data(&self, modes: usize) -> Result<ModeVector> {
        let spec = self.initial_spec()?.ok_or_else(|| Invalid("no initial data: use --input, --b/--c/--p or `initial`".into()))?;
        let u = match spec {
            InitialSpec::Modes(u) => u.resized(modes),
            InitialSpec::RankOne { b, c, p } => {
                let s = RankOneState::new(b, c, p);
                s.validate()?;
                s.embed(modes)
            }
            InitialSpec::Rational { numerator, denominator } => taylor(&numerator, &denominator, modes)?,
        };
        if !u.is_finite() {
            return Err(Invalid("initial data is not finite".into()).into());
        }
        Ok(u)
    }

    /// Rank-one initial data; mode vectors must lie on the rank-one manifold.
    pub fn rank_one_data(&self) -> Result<RankOneState> {
        let s = match self.initial_spec()? {
            Some(InitialSpec::RankOne { b, c, p }) => RankOneState::new(b, c, p),
            Some(_) => {
                let u = self.modes_data(self.modes.unwrap_or(256))?;
                RankOneState::from_modes(&u, 1e-10).ok_or_else(|| Invalid("initial data is not of rank-one form".into()))?
            }
            None => return Err(Invalid("no rank-one data: use --b/--c/--p or `initial.rank_one`".into()).into()),
        };
        s.validate()?;
        Ok(s)
    }

    /// Whether the initial data was given in rank-one form.
    pub fn is_rank_one(&self) -> Result<bool> {
        Ok(matches!(self.initial_spec()?, Some(InitialSpec::RankOne { .. })))
    }
}

#[derive(Deserialize)]
struct Candidate {
    u: ModeVector,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Invalid(format!("reading {}: {e}", path.display())).into())
}

/// Power series of `num/den` up to `z^{n−1}`.
fn taylor(num: &[Complex64], den: &[Complex64], n: usize) -> Result<ModeVector> {
    let d0 = *den.first().ok_or_else(|| Invalid("empty denominator".into()))?;
    if d0.norm() == 0.0 {
        return Err(Invalid("denominator must not vanish at z = 0".into()).into());
    }
    let mut a = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let mut acc = num.get(k).copied().unwrap_or_default();
        for j in 1..=k.min(den.len().saturating_sub(1)) {
            acc -= den[j] * a[k - j];
        }
        a[k] = acc / d0;
    }
    Ok(ModeVector::new(a))
}
