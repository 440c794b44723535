//! Least-squares fits of power laws and exponential rates.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};

/// Minimum number of samples inside a fit window.
pub const MIN_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Exponent `k` of `y ≈ A t^k`, or decay rate `r` of `y ≈ A e^{−r t}`.
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Last half-decade in log time: `[t_max / √10, t_max]`.
pub fn default_window(t: &[f64]) -> (f64, f64) {
    let t_max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (t_max / 10f64.sqrt(), t_max)
}

fn select(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
    if t.len() != y.len() {
        return Err(SzegoError::InvalidParams(format!(
            "series lengths differ: {} times, {} values",
            t.len(),
            y.len()
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, (&ti, &yi)) in t.iter().zip(y).enumerate() {
        if ti < window.0 || ti > window.1 {
            continue;
        }
        if !(yi > 0.0) {
            return Err(SzegoError::NonPositive { index: i });
        }
        xs.push(ti);
        ys.push(yi.ln());
    }
    if xs.len() < MIN_SAMPLES {
        return Err(SzegoError::InsufficientSamples { needed: MIN_SAMPLES, got: xs.len() });
    }
    Ok((xs, ys))
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, R²)`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    (intercept, slope, r2)
}

/// Fits `y ≈ A t^k` on `(ln t, ln y)` over `window` (default: last half-decade).
pub fn fit_power_law(t: &[f64], y: &[f64], window: Option<(f64, f64)>) -> Result<FitResult> {
    let window = window.unwrap_or_else(|| default_window(t));
    let (xs, ys) = select(t, y, window)?;
    if xs.iter().any(|&v| v <= 0.0) {
        return Err(SzegoError::InvalidParams("power-law fit needs t > 0".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let (a, b, r2) = line_fit(&lx, &ys);
    Ok(FitResult { rate: b, amplitude: a.exp(), r_squared: r2, window, samples: xs.len() })
}

/// Fits `y ≈ A e^{−r t}` on `(t, ln y)`; `rate` is `r`.
pub fn fit_exp_rate(t: &[f64], y: &[f64], window: Option<(f64, f64)>) -> Result<FitResult> {
    let window = window.unwrap_or_else(|| default_window(t));
    let (xs, ys) = select(t, y, window)?;
    let (a, b, r2) = line_fit(&xs, &ys);
    Ok(FitResult { rate: -b, amplitude: a.exp(), r_squared: r2, window, samples: xs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn exact_power_law() {
        let t = logspace(1.0, 100.0, 50);
        let y: Vec<f64> = t.iter().map(|v| v * v).collect();
        let f = fit_power_law(&t, &y, Some((1.0, 100.0))).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-12 && (f.amplitude - 1.0).abs() < 1e-12);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn noisy_power_law() {
        let t = logspace(100.0, 1000.0, 400);
        let y: Vec<f64> = t.iter().map(|v| 2.0 * v * (1.0 + 0.01 * v.sin())).collect();
        let f = fit_power_law(&t, &y, Some((100.0, 1000.0))).unwrap();
        assert!((f.rate - 1.0).abs() < 0.01);
        assert!((f.amplitude - 2.0).abs() < 0.04);
    }

    #[test]
    fn exponential_rate() {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|v| (-3.0 * v).exp()).collect();
        let f = fit_exp_rate(&t, &y, Some((0.0, 4.0))).unwrap();
        assert!((f.rate - 3.0).abs() < 1e-12);
        assert!(f.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn errors() {
        let t: Vec<f64> = (1..10).map(f64::from).collect();
        let y = t.clone();
        assert!(matches!(fit_power_law(&t, &y, None), Err(SzegoError::InsufficientSamples { .. })));
        let t: Vec<f64> = (1..40).map(f64::from).collect();
        let mut y = t.clone();
        y[30] = 0.0;
        assert!(matches!(fit_exp_rate(&t, &y, Some((1.0, 40.0))), Err(SzegoError::NonPositive { index: 30 })));
    }
}
