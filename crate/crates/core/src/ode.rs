//! Adaptive Dormand-Prince 5(4) integrator on flat real state vectors.
//!
//! Complex states are integrated by viewing them as interleaved `(re, im)`
//! pairs. Steps are clipped so that every requested sample time is hit
//! exactly; no dense output is used, which keeps runs bitwise reproducible.

use crate::error::{Result, SzegoError};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI step-size controller (Hairer & Wanner, DOPRI5 defaults)
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const ALPHA: f64 = 0.2 - 0.75 * BETA;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Tolerances and limits for one integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on |h|.
    pub max_step: f64,
    /// Integration fails with `StepSizeUnderflow` below this |h|.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            max_step: 0.1,
            min_step: 1e-14,
            max_steps: 50_000_000,
        }
    }
}

/// Returned by the sample observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Outcome of [`integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSummary {
    /// Time reached (equal to the final sample time unless stopped).
    pub t: f64,
    pub y: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    /// The observer asked to stop before the last sample.
    pub stopped: bool,
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], opts: &OdeOptions) -> f64 {
    let n = y.len().max(1) as f64;
    let sum: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| {
            let sc = opts.abs_tol + opts.rel_tol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<F>(rhs: &mut F, t0: f64, y0: &[f64], f0: &[f64], dir: f64, opts: &OdeOptions) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let sc: Vec<f64> = y0.iter().map(|y| opts.abs_tol + opts.rel_tol * y.abs()).collect();
    let norm = |v: &[f64]| -> f64 {
        let s: f64 = v.iter().zip(&sc).map(|(x, s)| (x / s).powi(2)).sum();
        (s / v.len().max(1) as f64).sqrt()
    };
    let d0 = norm(y0);
    let d1 = norm(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(opts.max_step);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + dir * h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    rhs(t0 + dir * h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(opts.max_step).max(opts.min_step)
}

/// Integrates `y' = rhs(t, y)` from `t0`, calling `observe` at `t0` and at
/// every entry of `samples` (which must be monotone in the direction of
/// integration). Integration ends at the last sample time.
pub fn integrate<F, O>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    samples: &[f64],
    mut observe: O,
    opts: &OdeOptions,
) -> Result<OdeSummary>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]) -> Control,
{
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SzegoError::NonFiniteState { t });
    }
    if observe(t, &y) == Control::Stop {
        return Ok(OdeSummary { t, y, accepted: 0, rejected: 0, stopped: true });
    }
    let Some(&t_end) = samples.last() else {
        return Ok(OdeSummary { t, y, accepted: 0, rejected: 0, stopped: false });
    };
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];

    rhs(t, &y, &mut k1);
    let mut h = initial_step(&mut rhs, t, &y, &k1, dir, opts);
    let mut err_prev: f64 = 1e-4;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut next = 0usize;
    // skip samples at or behind t0
    while next < samples.len() && dir * (samples[next] - t) <= 0.0 {
        next += 1;
    }

    while next < samples.len() {
        if accepted + rejected >= opts.max_steps {
            return Err(SzegoError::StepSizeUnderflow { t, h });
        }
        let target = samples[next];
        let remaining = (target - t).abs();
        let mut hit = false;
        let mut step = h.min(opts.max_step);
        if step >= remaining * (1.0 - 1e-12) {
            step = remaining;
            hit = true;
        }
        let hs = dir * step;

        for i in 0..n {
            tmp[i] = y[i] + hs * A21 * k1[i];
        }
        rhs(t + C2 * hs, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * hs, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * hs, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * hs, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i]
                + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(t + hs, &tmp, &mut k6);
        for i in 0..n {
            y_new[i] = y[i]
                + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let t_new = if hit { target } else { t + hs };
        rhs(t_new, &y_new, &mut k7);
        for i in 0..n {
            err[i] = hs
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = error_norm(&y, &y_new, &err, opts);

        if !e.is_finite() {
            rejected += 1;
            h = step * FAC_MIN;
            if h < opts.min_step {
                return Err(SzegoError::NonFiniteState { t });
            }
            continue;
        }

        if e <= 1.0 {
            accepted += 1;
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            let e_c = e.max(1e-10);
            let fac = (SAFETY * e_c.powf(-ALPHA) * err_prev.powf(BETA)).clamp(FAC_MIN, FAC_MAX);
            err_prev = e_c;
            // a clipped step says nothing about the natural step size
            h = if hit { h.max(step * fac) } else { step * fac };
            if y.iter().any(|v| !v.is_finite()) {
                return Err(SzegoError::NonFiniteState { t });
            }
            if hit {
                next += 1;
                if observe(t, &y) == Control::Stop {
                    return Ok(OdeSummary { t, y, accepted, rejected, stopped: next < samples.len() });
                }
            }
        } else {
            rejected += 1;
            let fac = (SAFETY * e.powf(-ALPHA)).clamp(FAC_MIN, 1.0);
            h = step * fac;
        }
        if h < opts.min_step {
            return Err(SzegoError::StepSizeUnderflow { t, h });
        }
    }

    Ok(OdeSummary { t, y, accepted, rejected, stopped: false })
}

/// Evenly spaced sample times `t0 + dt, t0 + 2dt, ...` ending exactly at `t_end`.
pub fn sample_grid(t0: f64, t_end: f64, dt: f64) -> Vec<f64> {
    let span = t_end - t0;
    if span == 0.0 || dt <= 0.0 {
        return vec![t_end];
    }
    let count = (span.abs() / dt - 1e-9).ceil().max(1.0) as usize;
    let dir = span.signum();
    let mut out: Vec<f64> = (1..count).map(|k| t0 + dir * dt * k as f64).collect();
    out.push(t_end);
    out
}
