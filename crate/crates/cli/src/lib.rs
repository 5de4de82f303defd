//! Command-line front end: merges flags over an optional JSON configuration,
//! runs one analysis and writes a JSON report or a CSV table.

pub mod args;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;
use recurlab_core::appendix::{asymptotic_report, MomentTriple};
use recurlab_core::chains::{
    dirichlet_per_x, hitting_times, pushforward_consistency, ChainKind, PathConfig, Start, TestFunction,
};
use recurlab_core::recurrence::{assemble_verdict_with, delta_scan, find_threshold, VerdictSettings};
use recurlab_core::{PriorSpec, RngStream};

use args::{Cli, Command, Format};
use config::RunConfig;
use report::{
    ConsistencyPayload, ConsistencyRow, DichotomyPayload, DichotomyRow, MomentsPayload, Payload, ReportDoc,
    SimulatePayload, SuperharmonicPayload, SuperharmonicRow, ValidatePayload,
};

/// Directory for output files when `--out` is not given.
pub const OUT_DIR_ENV: &str = "RECURLAB_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(recurlab_core::Error),
}

impl From<recurlab_core::Error> for CliError {
    fn from(e: recurlab_core::Error) -> Self {
        CliError::Numerical(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical error: {e}"),
        }
    }
}

/// A finished run: the report, the one-line summary and where it was written.
#[derive(Debug)]
pub struct Outcome {
    pub doc: ReportDoc,
    pub line: String,
    pub written: Option<PathBuf>,
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(out) => {
            println!("{}", out.line);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Config(_) => EXIT_CONFIG,
                CliError::Numerical(_) => EXIT_NUMERICAL,
            }
        }
    }
}

fn has_table(name: &str) -> bool {
    !matches!(name, "validate" | "verdict")
}

/// Output path and format, from the flags or the environment.
fn output_target(cfg: &mut RunConfig, name: &str) -> Result<Option<(PathBuf, Format)>, CliError> {
    let path = match cfg.out.take() {
        Some(p) => Some(p),
        None => std::env::var_os(OUT_DIR_ENV).map(|dir| {
            let ext = match cfg.format {
                Some(Format::Csv) => "csv",
                _ => "json",
            };
            PathBuf::from(dir).join(format!("{name}.{ext}"))
        }),
    };
    let format = cfg.format.unwrap_or_else(|| match path.as_ref().and_then(|p| p.extension()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Json,
    });
    if format == Format::Csv && !has_table(name) {
        return Err(CliError::Config(format!("{name} writes JSON only")));
    }
    cfg.format = Some(format);
    Ok(path.map(|p| (p, format)))
}

/// Run one subcommand and write its output.
pub fn execute(cmd: &Command) -> Result<Outcome, CliError> {
    let name = cmd.name();
    let (flags, common) = RunConfig::from_command(cmd);
    let file = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut cfg = file.overlay(flags);
    if let Some(c) = &cfg.command {
        if c != name {
            return Err(CliError::Config(format!("config file is for `{c}`, not `{name}`")));
        }
    }
    cfg.command = Some(name.to_string());
    // the output location is not part of the echoed configuration, so that
    // reruns into different files stay byte-identical
    let target = output_target(&mut cfg, name)?;
    let ctl = cfg.ctl()?;
    let seed = cfg.seed();
    let started = Instant::now();

    let (payload, line) = match name {
        "validate" => {
            let spec = cfg.prior()?;
            let classification = spec.classify();
            let line = format!("{spec}: {classification}");
            (Payload::Validate(ValidatePayload { spec, classification }), line)
        }
        "moments" | "asymptotics" => {
            let spec = cfg.valid_prior()?;
            let grid = cfg.grid()?.values()?;
            let report = asymptotic_report(&spec, &grid, &ctl)?;
            let line = format!("{spec}: {} grid points", report.rows.len());
            if name == "moments" {
                let rows = report
                    .rows
                    .iter()
                    .map(|r| MomentTriple {
                        eta: r.eta,
                        mu1: r.mu1,
                        mu2: r.mu2,
                        mu3: r.mu3,
                    })
                    .collect();
                (Payload::Moments(MomentsPayload { spec, rows }), line)
            } else {
                (Payload::Asymptotics(report), line)
            }
        }
        "superharmonic" => {
            let spec = cfg.valid_prior()?;
            let grid = cfg.grid()?.values()?;
            let eps = cfg.eps()?;
            let scan = find_threshold(&spec, &grid, eps, &ctl)?;
            let deltas = delta_scan(&spec, &grid, eps, &ctl)?;
            let rows = scan
                .rows
                .iter()
                .zip(&deltas)
                .map(|(r, d)| SuperharmonicRow {
                    eta: r.terms.eta,
                    bracket: r.terms.bracket,
                    delta: d.delta,
                    cond21_lhs: r.terms.cond21_lhs,
                    cond21_rhs: r.terms.cond21_rhs,
                })
                .collect();
            let line = match scan.threshold {
                Some(m) => format!("{spec}: superharmonic from m = {m}"),
                None => format!("{spec}: no threshold on the grid"),
            };
            (
                Payload::Superharmonic(SuperharmonicPayload {
                    spec,
                    psi1_eps: eps,
                    threshold_m: scan.threshold,
                    rows,
                }),
                line,
            )
        }
        "verdict" => {
            let spec = cfg.valid_prior()?;
            let settings = VerdictSettings {
                eta_grid: cfg.grid()?,
                psi1_eps: cfg.eps()?,
                ..VerdictSettings::default()
            };
            let report = assemble_verdict_with(&spec, &ctl, &settings)?;
            let line = match report.threshold_m {
                Some(m) => format!("{spec}: {} (m = {m})", report.verdict),
                None => format!("{spec}: {}", report.verdict),
            };
            (Payload::Verdict(report), line)
        }
        "simulate" => simulate(&mut cfg, seed, &ctl)?,
        "dichotomy" => dichotomy(&mut cfg, seed, &ctl)?,
        "consistency" => consistency(&mut cfg, seed, &ctl)?,
        other => unreachable!("unknown subcommand {other}"),
    };

    let doc = ReportDoc {
        tool: report::TOOL.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config: cfg,
        wall_clock_seconds: common.timing.then(|| started.elapsed().as_secs_f64()),
        payload,
    };
    let written = match target {
        Some((path, format)) => {
            let bytes = match format {
                Format::Json => {
                    let mut b = serde_json::to_vec_pretty(&doc).expect("reports serialize");
                    b.push(b'\n');
                    b
                }
                Format::Csv => doc
                    .payload
                    .csv()
                    .expect("checked before the run")
                    .map_err(|e| CliError::Config(format!("cannot format CSV: {e}")))?,
            };
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
            }
            std::fs::write(&path, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
            Some(path)
        }
        None => None,
    };
    Ok(Outcome { doc, line, written })
}

fn simulate(cfg: &mut RunConfig, seed: u64, ctl: &recurlab_core::SeriesCtl) -> Result<(Payload, String), CliError> {
    let chain = *cfg.chain.get_or_insert(ChainKind::Reduced);
    let (spec, m, start) = match chain {
        ChainKind::Reduced => {
            let spec = cfg.valid_prior()?;
            let m = match cfg.m {
                Some(_) => RunConfig::positive(&mut cfg.m, 1.0, "m")?,
                None => {
                    let grid = cfg.grid()?.values()?;
                    let scan = find_threshold(&spec, &grid, cfg.eps()?, ctl)?;
                    let m = scan
                        .threshold
                        .ok_or_else(|| CliError::Config(format!("{spec}: no threshold on the η grid; pass --m")))?;
                    cfg.m = Some(m);
                    m
                }
            };
            let start = *cfg.start.get_or_insert(100.0 * m);
            if !(start >= 0.0 && start.is_finite()) {
                return Err(CliError::Config(format!("start = {start} must be ≥ 0")));
            }
            (spec, m, start)
        }
        ChainKind::Walk => {
            let p = cfg.prior()?.p;
            // the walk ignores the prior beyond its dimension
            cfg.a = None;
            cfg.b = None;
            let m = RunConfig::positive(&mut cfg.m, config::DEFAULT_WALK_M, "m")?;
            let start = *cfg.start.get_or_insert(config::DEFAULT_WALK_START);
            if !start.is_finite() {
                return Err(CliError::Config("start must be finite".into()));
            }
            (PriorSpec::flat(p), m, start)
        }
    };
    let path_cfg = PathConfig {
        start: Start::Scalar(start),
        m,
        n_paths: cfg.n_paths()?,
        max_steps: cfg.max_steps()?,
        master_seed: seed,
    };
    let summary = hitting_times(chain, &path_cfg, &spec, ctl)?;
    let line = format!(
        "{chain} {spec}: hit_fraction = {} ({}/{} paths), {} censored at {} steps",
        summary.hit_fraction, summary.hits, summary.n_paths, summary.censored, summary.max_steps
    );
    Ok((
        Payload::Simulate(SimulatePayload {
            spec,
            chain,
            m,
            start,
            summary,
        }),
        line,
    ))
}

fn dichotomy(cfg: &mut RunConfig, seed: u64, ctl: &recurlab_core::SeriesCtl) -> Result<(Payload, String), CliError> {
    let dims = cfg.dims()?;
    let m = RunConfig::positive(&mut cfg.m, config::DEFAULT_WALK_M, "m")?;
    let start = *cfg.start.get_or_insert(config::DEFAULT_WALK_START);
    if !start.is_finite() {
        return Err(CliError::Config("start must be finite".into()));
    }
    let (n_paths, max_steps) = (cfg.n_paths()?, cfg.max_steps()?);
    let mut rows = Vec::with_capacity(dims.len());
    for &p in &dims {
        let path_cfg = PathConfig {
            start: Start::Scalar(start),
            m,
            n_paths,
            max_steps,
            master_seed: seed,
        };
        let s = hitting_times(ChainKind::Walk, &path_cfg, &PriorSpec::flat(p), ctl)?;
        let q = |i: usize| s.quantiles.map(|q| q[i]);
        rows.push(DichotomyRow {
            p,
            n_paths,
            max_steps,
            hits: s.hits,
            censored: s.censored,
            hit_fraction: s.hit_fraction,
            q25: q(0),
            q50: q(1),
            q75: q(2),
        });
    }
    let line = rows
        .iter()
        .map(|r| format!("p={}: hit_fraction = {}", r.p, r.hit_fraction))
        .collect::<Vec<_>>()
        .join("; ");
    Ok((Payload::Dichotomy(DichotomyPayload { m, start, rows }), line))
}

/// Norm `i` uses streams `2i` (two-sample check) and `2i + 1` (Dirichlet).
fn consistency(cfg: &mut RunConfig, seed: u64, ctl: &recurlab_core::SeriesCtl) -> Result<(Payload, String), CliError> {
    let spec = cfg.valid_prior()?;
    let norms = cfg.x_norms()?;
    if norms.iter().any(|&r| r <= 0.0) {
        return Err(CliError::Config("x_norms must be positive".into()));
    }
    let samples = cfg.samples()?;
    let h = TestFunction::capped(1.0);
    let mut rows = Vec::with_capacity(norms.len());
    for (i, &r) in norms.iter().enumerate() {
        let mut x = vec![0.0; spec.p as usize];
        x[0] = r;
        let i = i as u64;
        let ks = pushforward_consistency(&x, samples, &spec, &mut RngStream::new(seed, 2 * i), ctl)?;
        let d = dirichlet_per_x(&h, &x, samples, &spec, &mut RngStream::new(seed, 2 * i + 1), ctl)?;
        rows.push(ConsistencyRow {
            x_norm: r,
            ks_statistic: ks.statistic,
            ks_critical: ks.critical,
            ks_reject: ks.reject,
            acceptance_rate: ks.acceptance_rate,
            dirichlet_full: d.full,
            dirichlet_full_se: d.full_se,
            dirichlet_reduced: d.reduced,
            dirichlet_reduced_se: d.reduced_se,
        });
    }
    let rejected = rows.iter().filter(|r| r.ks_reject).count();
    let line = format!("{spec}: KS rejects at {rejected} of {} norms (α = 0.01)", rows.len());
    Ok((Payload::Consistency(ConsistencyPayload { spec, samples, rows }), line))
}
