//! Reproduction harness: rate fits, blow-up and scattering checks,
//! stationary data for `β = 1`, classification and sweeps.

mod blowup;
mod classify;
mod stationary;

pub use crate::fit::{default_window, fit_exp_rate, fit_power_law, FitResult, MIN_SAMPLES};
pub use blowup::{blowup_run, generic_start, kappa_check, log_samples, long_run_options, BlowUpRun, KappaSeries};
pub use classify::{
    classify, sweep, write_sweep_csv, Family, InitialData, SweepGrid, SweepRow, Verdict, PERIODIC_TOL,
    SCATTER_FLOOR,
};
pub use stationary::{
    cubic_moment, evaluate_candidate, growth_check, GrowthReport, stationary_rho_solver, stationary_search, RhoSolution, SearchConstraints,
    StationaryCandidate,
};
