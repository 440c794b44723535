use num_complex::Complex64;
use proptest::prelude::*;

use szego_core::experiments::{classify, cubic_moment, stationary_search, InitialData, SearchConstraints};
use szego_core::fit::{fit_exp_rate, fit_power_law};
use szego_core::hankel::{
    hankel_sq_matrix, interlaces, rank_one_defect, spectrum_with, trace_re, OmegaMembership, SpectrumOptions,
};
use szego_core::integrator::evolve;
use szego_core::rank_one::{constants, matrix_a_eigenvalues, Chart, RankOneState};
use szego_core::spectral::{cubic_mean, ModeVector, Params};

fn cplx() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn pole(max: f64) -> impl Strategy<Value = Complex64> {
    (0.05f64..max, 0.0f64..std::f64::consts::TAU).prop_map(|(r, th)| Complex64::from_polar(r, th))
}

/// Coefficients decaying like `2^{-k}` so every truncation is well resolved.
fn decaying(n: usize) -> impl Strategy<Value = ModeVector> {
    prop::collection::vec(cplx(), n).prop_map(|v| {
        ModeVector::new(v.into_iter().enumerate().map(|(k, z)| z * 0.5f64.powi(k as i32)).collect())
    })
}

/// `Σ a_j / (1 − p_j e^{ix})` with well separated poles.
fn rational(rank: usize) -> impl Strategy<Value = Vec<(Complex64, Complex64)>> {
    prop::collection::vec((cplx(), pole(0.6)), rank).prop_filter("separated poles, nonzero weights", |v| {
        v.iter().all(|(a, _)| a.norm() > 0.2)
            && v.iter().enumerate().all(|(i, (_, p))| v[i + 1..].iter().all(|(_, q)| (p - q).norm() > 0.15))
    })
}

fn rational_modes(terms: &[(Complex64, Complex64)], n: usize) -> ModeVector {
    ModeVector::from_fn(n, |k| terms.iter().map(|(a, p)| a * p.powu(k as u32)).sum())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_law_fit_is_exact(k in -3.0f64..3.0, amp in 0.01f64..100.0, t_max in 50.0f64..1e4) {
        let t: Vec<f64> = (0..200).map(|i| 1.0 + (t_max - 1.0) * i as f64 / 199.0).collect();
        let y: Vec<f64> = t.iter().map(|t| amp * t.powf(k)).collect();
        let f = fit_power_law(&t, &y, None).unwrap();
        prop_assert!((f.rate - k).abs() < 1e-8);
        prop_assert!(rel(f.amplitude, amp) < 1e-8);
        prop_assert!((0.0..=1.0).contains(&f.r_squared));
    }

    #[test]
    fn exponential_fit_is_exact(r in 0.01f64..3.0, amp in 0.01f64..100.0) {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|t| amp * (-r * t).exp()).collect();
        let f = fit_exp_rate(&t, &y, None).unwrap();
        prop_assert!((f.rate - r).abs() < 1e-8);
        prop_assert!(rel(f.amplitude, amp) < 1e-8);
    }

    #[test]
    fn json_round_trip_is_exact(u in decaying(24)) {
        prop_assert_eq!(ModeVector::from_json(&u.to_json()).unwrap(), u);
    }

    #[test]
    fn parseval_on_padded_grid(u in decaying(32)) {
        let grid = u.to_grid(64);
        let quad = grid.iter().map(|z| z.norm_sqr()).sum::<f64>() / grid.len() as f64;
        prop_assert!(rel(quad, u.mass()) < 1e-12);
    }

    #[test]
    fn cubic_moment_is_mean_of_cubic_term(u in decaying(24)) {
        let a = cubic_moment(&u);
        let b = cubic_mean(&u);
        prop_assert!((a - b).norm() <= 1e-12 * u.norm().powi(3));
    }

    #[test]
    fn hankel_trace_identities(u in decaying(24)) {
        let n = u.len();
        let h2 = hankel_sq_matrix(&u, n, false).unwrap();
        let ht2 = hankel_sq_matrix(&u, n, true).unwrap();
        let w = |shift: f64| u.coeffs().iter().enumerate().map(|(k, z)| (k as f64 + shift) * z.norm_sqr()).sum::<f64>();
        prop_assert!(rel(trace_re(&h2), w(1.0)) < 1e-10);
        prop_assert!(rel(trace_re(&ht2), w(0.0)) < 1e-10);
        prop_assert!(rel(trace_re(&h2) - trace_re(&ht2), u.mass()) < 1e-10);
        prop_assert!((&h2 - h2.adjoint()).norm() <= 1e-12 * h2.norm());
        prop_assert!(rank_one_defect(&u, n).unwrap() < 1e-10 * u.mass().max(1.0));
    }

    #[test]
    fn constants_identities(
        nu in 0.01f64..5.0,
        alpha in -3.0f64..3.0,
        beta in -2.0f64..3.0,
        m in 0.01f64..4.0,
    ) {
        let Ok(k) = constants(nu, alpha, beta, m, &[1.0]) else { return Ok(()) };
        let w = alpha + 2.0 * m;
        let scale = nu * nu + alpha * alpha + 4.0 * m * alpha.abs();
        prop_assert!((k.sigma * k.sigma - k.rho * k.rho - (nu * nu - alpha * alpha - 4.0 * m * alpha)).abs() < 1e-10 * scale);
        prop_assert!((f64::from(k.varsigma) * k.sigma * k.rho - nu * w).abs() < 1e-10 * nu * w.abs().max(1.0));
        let lam_scale = 1.0 + k.lambda_plus.norm_sqr() + k.lambda_minus.norm_sqr() + (nu + w.abs()) * (1.0 + m) * (1.0 + m);
        prop_assert!(k.char_poly(k.lambda_plus).norm() < 1e-10 * lam_scale);
        prop_assert!(k.char_poly(k.lambda_minus).norm() < 1e-10 * lam_scale);
        prop_assert!((k.z - k.delta_eta_limit()).abs() < 1e-10);
        let mut got: Vec<Complex64> = matrix_a_eigenvalues(nu, alpha, m);
        let mut want = vec![
            Complex64::new(nu + k.sigma, 0.0),
            Complex64::new(nu - k.sigma, 0.0),
            Complex64::new(nu, k.rho),
            Complex64::new(nu, -k.rho),
        ];
        let key = |z: &Complex64| (z.re, z.im);
        got.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        want.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        for (g, e) in got.iter().zip(&want) {
            prop_assert!((g - e).norm() < 1e-8 * (nu + k.sigma + k.rho), "{g} vs {e}");
        }
    }

    #[test]
    fn rank_one_embedding_round_trip(b in cplx(), c in cplx(), p in pole(0.7)) {
        prop_assume!(c.norm() > 0.05);
        let s = RankOneState::new(b, c, p);
        let u = s.embed(256);
        let back = RankOneState::from_modes(&u, 1e-12).unwrap();
        prop_assert!((back.b - b).norm() < 1e-14 && (back.c - c).norm() < 1e-14);
        prop_assert!((back.p - p).norm() < 1e-12);
        prop_assert!(rel(u.momentum(), s.momentum()) < 1e-12);
        prop_assert!(rel(u.mass(), s.mass()) < 1e-12);
        prop_assert!(rel(u.sobolev_sq(1.0), s.sobolev_sq(1.0)) < 1e-12);
    }

    #[test]
    fn chart_invariants_on_rank_one_states(b in cplx(), c in cplx(), p in pole(0.9)) {
        prop_assume!(c.norm() > 0.05);
        let s = RankOneState::new(b, c, p);
        for chart in [Chart::BlowUp, Chart::Scatter] {
            let r = s.to_reduced(chart);
            let scale = r.zeta.norm_sqr() + r.gamma().powi(2) * r.eta * r.delta();
            prop_assert!(r.invariant_defect().abs() <= 1e-12 * scale + 1e-300);
            prop_assert!(rel(r.mass(), s.mass()) < 1e-12);
            prop_assert!((r.dist_to_cm() - s.dist_to_cm()).abs() < 1e-12 * (1.0 + s.dist_to_cm()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rational_spectra_interlace(rank in 1usize..=4, seed_terms in rational(4)) {
        let terms = &seed_terms[..rank];
        let u = rational_modes(terms, 128);
        let opts = SpectrumOptions::default();
        let h = spectrum_with(&u, false, &opts).unwrap();
        let ht = spectrum_with(&u, true, &opts).unwrap();
        // Simple poles away from the origin: both operators have full rank.
        prop_assert_eq!(h.rank(), rank);
        prop_assert_eq!(ht.rank(), rank);
        prop_assert!(interlaces(&h.values, &ht.values), "{:?} vs {:?}", h.values, ht.values);
    }

    #[test]
    fn momentum_is_conserved(u in decaying(8), nu in 0.1f64..2.0, alpha in -1.0f64..1.0, beta in -1.0f64..1.0) {
        prop_assume!(u.momentum() > 1e-3);
        let u = u.resized(64);
        let p = Params::new(nu, alpha, beta).with_modes(64);
        let traj = evolve(&u, &p, 2.0, 0.1).unwrap();
        // Conservation is only claimed while the truncation is faithful.
        let trusted = traj.tail_fraction.iter().take_while(|f| **f < 1e-6).count();
        let m0 = traj.momentum[0];
        for j in 0..trusted {
            prop_assert!((traj.momentum[j] - m0).abs() < 1e-8 * m0, "t = {}", traj.times[j]);
            if j > 0 {
                prop_assert!(traj.mass[j] - traj.mass[j - 1] < 10.0 * p.rel_tol * u.mass().max(1.0));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn classify_is_deterministic(b in 0.0f64..1.0, c in 0.2f64..1.0, p in 0.0f64..0.8, nu in 0.5f64..2.0) {
        let data = InitialData::RankOne(RankOneState::real(b, c, p));
        let params = Params::new(nu, 0.0, 0.0);
        let a = classify(&data, &params, 200.0);
        let b = classify(&data, &params, 200.0);
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn accepted_candidates_satisfy_constraints(seed in 0u64..1_000) {
        let cand = stationary_search(4, seed, &SearchConstraints::default()).unwrap();
        prop_assert!(cand.residual_mean < 1e-10);
        prop_assert!(cand.residual_cubic < 1e-10);
        prop_assert_eq!(cand.omega, OmegaMembership::InOmega);
    }
}
