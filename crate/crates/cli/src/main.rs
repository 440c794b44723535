//! `szego`: command-line front end for the damped Szegő laboratory.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use szego_core::experiments::{
    classify, fit_exp_rate, fit_power_law, long_run_options, stationary_rho_solver, stationary_search, sweep,
    write_sweep_csv, InitialData, SearchConstraints,
};
use szego_core::hankel::{spectrum_with, SpectrumOptions};
use szego_core::integrator::{evolve_with, EvolveOptions, Termination};
use szego_core::ode::sample_grid;
use szego_core::rank_one::{constants, evolve_bcp, evolve_reduced, Chart};
use szego_core::SzegoError;

use config::RunConfig;

/// A configuration or input problem detected before any computation.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Parser, Debug)]
#[command(name = "szego", version, about = "Damped Szegő equation: simulation, rank-one dynamics and asymptotics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Evolve mode data with the truncated spectral solver (CSV time series).
    Simulate,
    /// Evolve rank-one data (b, c, p) with the six-dimensional system (CSV).
    Rank1,
    /// Evolve rank-one data in a reduced chart (CSV).
    Reduce,
    /// Spectrum of H_u² or the shifted H̃_u² (JSON).
    Spectrum,
    /// Closed-form asymptotic constants (JSON).
    Constants,
    /// Long-time classification of initial data (JSON).
    Classify,
    /// Stationary data for β = 1: ρ(ε) solver or coefficient search (JSON).
    Stationary,
    /// Parallel classification over a parameter grid (CSV).
    Sweep,
    /// Power-law or exponential fit of a CSV column (JSON).
    Fit,
}

#[derive(clap::Args, Debug, Default)]
pub struct Flags {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub nu: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Number of Fourier modes N.
    #[arg(long, global = true)]
    pub modes: Option<usize>,
    /// Final time (classification horizon for `classify` and `sweep`).
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true)]
    pub sample_dt: Option<f64>,
    /// Momentum M.
    #[arg(long, global = true)]
    pub momentum: Option<f64>,
    /// Real rank-one coefficients; complex values go in the config.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub c: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub p: Option<f64>,
    /// Input file: JSON mode vector / initial data, or CSV for `fit`.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Use the shifted Hankel operator.
    #[arg(long, global = true)]
    pub shifted: bool,
    /// Sobolev exponents, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub s: Vec<f64>,
    #[arg(long, global = true, value_parser = parse_chart)]
    pub chart: Option<Chart>,
    /// Polynomial degree for the stationary search.
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub sigma1: Option<f64>,
    #[arg(long, global = true)]
    pub sigma2: Option<f64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Worker threads for `sweep` (0 = all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Column to fit.
    #[arg(long, global = true)]
    pub column: Option<String>,
    /// `power` or `exp`.
    #[arg(long, global = true)]
    pub kind: Option<String>,
    /// Fit window `lo,hi`.
    #[arg(long, global = true, value_parser = parse_window)]
    pub window: Option<(f64, f64)>,
    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

fn parse_chart(s: &str) -> std::result::Result<Chart, String> {
    match s {
        "blow_up" | "blowup" => Ok(Chart::BlowUp),
        "scatter" => Ok(Chart::Scatter),
        _ => Err(format!("expected `blow_up` or `scatter`, got `{s}`")),
    }
}

fn output(cfg: &RunConfig) -> Result<Box<dyn Write>> {
    Ok(match &cfg.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: serde::Serialize>(cfg: &RunConfig, value: &T) -> Result<()> {
    let mut w = output(cfg)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_table(cfg: &RunConfig, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(output(cfg)?);
    wr.write_record(header)?;
    for row in rows {
        wr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

fn hs_headers(s: &[f64]) -> impl Iterator<Item = String> + '_ {
    s.iter().map(|s| format!("hs_{s}"))
}

fn simulate(cfg: &RunConfig) -> Result<()> {
    let p = cfg.params()?;
    let u0 = cfg.modes_data(p.modes)?;
    let t_end = cfg.t_end(10.0)?;
    let opts = EvolveOptions { sobolev_s: cfg.sobolev_s(), keep_states: false, ..EvolveOptions::default() };
    let traj = evolve_with(&u0, &p, t_end, cfg.sample_dt.unwrap_or(0.1), &opts)?;
    traj.write_csv(output(cfg)?)?;
    if let Termination::TruncationBreach { t, tail, limit } = traj.termination {
        return Err(SzegoError::TruncationBreach { t, tail, limit }.into());
    }
    Ok(())
}

fn rank1(cfg: &RunConfig) -> Result<()> {
    let p = cfg.params()?;
    let s0 = cfg.rank_one_data()?;
    let t_end = cfg.t_end(100.0)?;
    let traj = evolve_bcp(&s0, &p, t_end, cfg.sample_dt.unwrap_or(t_end / 2000.0))?;
    let s_list = cfg.sobolev_s();
    let mut header: Vec<String> =
        ["t", "b_re", "b_im", "c_re", "c_im", "p_re", "p_im", "mass", "momentum"].map(String::from).to_vec();
    header.extend(hs_headers(&s_list));
    header.push("dist_cm".into());
    let rows = traj.times.iter().zip(&traj.states).map(|(t, st)| {
        let mut row = vec![*t, st.b.re, st.b.im, st.c.re, st.c.im, st.p.re, st.p.im, st.mass(), st.momentum()];
        row.extend(s_list.iter().map(|&s| st.sobolev_sq(s)));
        row.push(st.dist_to_cm());
        row
    });
    write_table(cfg, &header, rows)?;
    if traj.reached_boundary {
        log::warn!("run stopped at the boundary |p| = 1 before t_end");
    }
    Ok(())
}

fn reduce(cfg: &RunConfig) -> Result<()> {
    let p = cfg.params()?;
    let chart = cfg.chart.unwrap_or(Chart::BlowUp);
    let r0 = cfg.rank_one_data()?.to_reduced(chart);
    let t_end = cfg.t_end(100.0)?;
    let samples = sample_grid(0.0, t_end, cfg.sample_dt.unwrap_or(t_end / 2000.0));
    let run = evolve_reduced(&r0, &p, 0.0, &samples, &long_run_options())?;
    let s_list = cfg.sobolev_s();
    let second = if chart == Chart::BlowUp { "gamma" } else { "delta" };
    let mut header: Vec<String> = ["t", "eta", second, "zeta_re", "zeta_im", "mass", "dist_cm"].map(String::from).to_vec();
    header.extend(hs_headers(&s_list));
    let rows = run.times.iter().zip(&run.states).map(|(t, r)| {
        let mut row = vec![*t, r.eta, r.second, r.zeta.re, r.zeta.im, r.mass(), r.dist_to_cm()];
        row.extend(s_list.iter().map(|&s| r.sobolev_sq(s)));
        row
    });
    write_table(cfg, &header, rows)
}

fn spectrum(cfg: &RunConfig) -> Result<()> {
    let modes = cfg.modes.unwrap_or(256);
    let u = cfg.modes_data(modes)?;
    let report = spectrum_with(&u, cfg.shifted.unwrap_or(false), &SpectrumOptions::default())?;
    write_json(cfg, &report)
}

fn constants_cmd(cfg: &RunConfig) -> Result<()> {
    let p = cfg.params()?;
    let m = cfg.momentum.ok_or_else(|| Invalid("constants needs --momentum".into()))?;
    let s = cfg.s.clone().unwrap_or_else(|| vec![1.0, 2.0]);
    write_json(cfg, &constants(p.nu, p.alpha, p.beta, m, &s)?)
}

fn classify_cmd(cfg: &RunConfig) -> Result<()> {
    let p = cfg.params()?;
    let horizon = cfg.t_end(1e3)?;
    let data = if cfg.is_rank_one()? {
        InitialData::RankOne(cfg.rank_one_data()?)
    } else {
        InitialData::Modes(cfg.modes_data(p.modes)?)
    };
    write_json(cfg, &classify(&data, &p, horizon))
}

fn stationary(cfg: &RunConfig) -> Result<()> {
    if let Some(r) = &cfg.rho {
        return write_json(cfg, &stationary_rho_solver(r.sigma1, r.sigma2, r.eps)?);
    }
    let cons = SearchConstraints { modes: cfg.modes.unwrap_or(64), ..SearchConstraints::default() };
    let cand = stationary_search(cfg.degree.unwrap_or(6), cfg.seed.unwrap_or(0), &cons)?;
    write_json(cfg, &cand)
}

fn sweep_cmd(cfg: &RunConfig) -> Result<()> {
    let mut grid = cfg.sweep.clone().ok_or_else(|| Invalid("sweep needs a `sweep` grid in --config".into()))?;
    if let Some(t) = cfg.t_end {
        grid.horizon = t;
    }
    let rows = sweep(&grid, cfg.jobs.unwrap_or(0))?;
    write_sweep_csv(&rows, output(cfg)?)?;
    Ok(())
}

fn fit_cmd(cfg: &RunConfig) -> Result<()> {
    let path = cfg.input.as_ref().ok_or_else(|| Invalid("fit needs --input <csv>".into()))?;
    let column = cfg.column.clone().unwrap_or_else(|| "hs_1".into());
    let mut rd = csv::Reader::from_path(path).map_err(|e| Invalid(format!("reading {}: {e}", path.display())))?;
    let header = rd.headers()?.clone();
    let idx = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Invalid(format!("no column `{name}` in {}", path.display())))
    };
    let (it, iy) = (idx("t")?, idx(&column)?);
    let (mut t, mut y) = (Vec::new(), Vec::new());
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| Invalid(format!("bad number `{}`: {e}", &rec[i])));
        t.push(num(it)?);
        y.push(num(iy)?);
    }
    let fit = match cfg.kind.as_deref().unwrap_or("power") {
        "power" => fit_power_law(&t, &y, cfg.window)?,
        "exp" => fit_exp_rate(&t, &y, cfg.window)?,
        other => return Err(Invalid(format!("kind must be `power` or `exp`, got `{other}`")).into()),
    };
    write_json(cfg, &fit)
}

fn run(cli: Cli) -> Result<()> {
    let base = match &cli.flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let default_modes = if matches!(cli.command, Command::Stationary) { 64 } else { 256 };
    let cfg = base.merge(&cli.flags).resolve(default_modes)?;
    log::info!("command {:?}, resolved config {}", cli.command, serde_json::to_string(&cfg)?);
    match cli.command {
        Command::Simulate => simulate(&cfg),
        Command::Rank1 => rank1(&cfg),
        Command::Reduce => reduce(&cfg),
        Command::Spectrum => spectrum(&cfg),
        Command::Constants => constants_cmd(&cfg),
        Command::Classify => classify_cmd(&cfg),
        Command::Stationary => stationary(&cfg),
        Command::Sweep => sweep_cmd(&cfg),
        Command::Fit => fit_cmd(&cfg),
    }
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    let (lo, hi) = (num(lo)?, num(hi)?);
    if !(lo < hi) {
        return Err(format!("window must satisfy lo < hi, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

/// 2 for bad input, 3 for numerical failures, 1 for anything else (I/O).
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Invalid>().is_some() {
        return 2;
    }
    match err.downcast_ref::<SzegoError>() {
        Some(SzegoError::InvalidParams(_) | SzegoError::SectionTooLarge { .. } | SzegoError::Serialization(_)) => 2,
        Some(_) => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SZEGO_LOG", "info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
