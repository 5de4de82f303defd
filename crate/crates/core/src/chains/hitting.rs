//! Hitting-time simulation and the stopped-process probe.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::latent::ReducedKernel;
use super::{random_walk_step, ChainKind, HittingSummary, PathConfig, Start};
use crate::error::{Error, Result};
use crate::prior::PriorSpec;
use crate::recurrence::f0_pack;
use crate::specfun::{RngStream, SeriesCtl};

/// Stream index offset for the probe's paths, so that a probe and a hitting
/// run sharing a master seed use disjoint streams.
pub const PROBE_STREAM_OFFSET: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub step: u64,
    /// Fraction of paths that have not hit by `step`.
    pub fraction: f64,
}

/// Simulate `cfg.n_paths` independent paths, path `i` on stream
/// `RngStream::new(cfg.master_seed, i)`, and record first hitting steps.
///
/// The reduced chain starts at `η₀` (a scalar, or `‖v‖²` for a vector) and
/// targets `[0, m)`. The walk starts at the vector given, or at `(r, 0, …)`
/// for a scalar radius `r`, and targets `{‖θ‖ ≤ m}`.
pub fn hitting_times(kind: ChainKind, cfg: &PathConfig, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<HittingSummary> {
    cfg.validate()?;
    let m = cfg.m;
    let hit_steps: Vec<Option<u64>> = match kind {
        ChainKind::Reduced => {
            let eta0 = match &cfg.start {
                Start::Scalar(x) => *x,
                Start::Vector(v) => v.iter().map(|c| c * c).sum(),
            };
            if eta0 < 0.0 {
                return Err(Error::domain("hitting_times", format!("start = {eta0} must be ≥ 0")));
            }
            let kernel = ReducedKernel::new(spec, ctl)?;
            (0..cfg.n_paths as u64)
                .into_par_iter()
                .map(|id| {
                    let mut rng = RngStream::new(cfg.master_seed, id);
                    let mut eta = eta0;
                    for step in 1..=cfg.max_steps {
                        eta = kernel.step(eta, &mut rng);
                        if eta < m {
                            return Some(step);
                        }
                    }
                    None
                })
                .collect()
        }
        ChainKind::Walk => {
            let p = spec.p as usize;
            let theta0 = match &cfg.start {
                Start::Scalar(r) => {
                    let mut v = vec![0.0; p];
                    v[0] = *r;
                    v
                }
                Start::Vector(v) if v.len() == p => v.clone(),
                Start::Vector(v) => {
                    return Err(Error::domain("hitting_times", format!("start has length {}, expected {p}", v.len())));
                }
            };
            let m2 = m * m;
            (0..cfg.n_paths as u64)
                .into_par_iter()
                .map(|id| {
                    let mut rng = RngStream::new(cfg.master_seed, id);
                    let mut theta = theta0.clone();
                    for step in 1..=cfg.max_steps {
                        theta = random_walk_step(&theta, &mut rng);
                        if theta.iter().map(|c| c * c).sum::<f64>() <= m2 {
                            return Some(step);
                        }
                    }
                    None
                })
                .collect()
        }
    };
    Ok(summarize(kind, cfg, hit_steps))
}

fn summarize(kind: ChainKind, cfg: &PathConfig, hit_steps: Vec<Option<u64>>) -> HittingSummary {
    let n = hit_steps.len();
    let mut times: Vec<u64> = hit_steps.iter().flatten().copied().collect();
    times.sort_unstable();
    let hits = times.len();
    let quantiles = (!times.is_empty()).then(|| [0.25, 0.5, 0.75].map(|q| quantile(&times, q)));
    let survival = checkpoints(cfg.max_steps)
        .into_iter()
        .map(|step| {
            let hit_by = times.partition_point(|&t| t <= step);
            SurvivalPoint {
                step,
                fraction: (n - hit_by) as f64 / n as f64,
            }
        })
        .collect();
    HittingSummary {
        kind,
        n_paths: n,
        max_steps: cfg.max_steps,
        hits,
        censored: n - hits,
        hit_fraction: hits as f64 / n as f64,
        quantiles,
        survival,
        hit_steps,
    }
}

/// Linear interpolation between order statistics.
fn quantile(sorted: &[u64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] as f64 + (pos - lo as f64) * (sorted[hi] as f64 - sorted[lo] as f64)
}

/// 0, then 1, 2, 5, 10, 20, 50, … below `max_steps`, then `max_steps`.
fn checkpoints(max_steps: u64) -> Vec<u64> {
    let mut out = vec![0];
    let mut decade = 1u64;
    'outer: loop {
        for k in [1, 2, 5] {
            let s = decade.saturating_mul(k);
            if s >= max_steps {
                break 'outer;
            }
            out.push(s);
        }
        decade = decade.saturating_mul(10);
    }
    out.push(max_steps);
    out
}

/// One row of the probe: `Y_n` and the paired increment `Y_{n+1} − Y_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    /// Mean and standard error of `Y_{n+1} − Y_n`; zero on the last row.
    pub step_mean: f64,
    pub step_se: f64,
    /// Fraction of paths stopped by step `n`.
    pub stopped: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupermartingaleTable {
    pub x0: f64,
    pub m: f64,
    pub n_paths: usize,
    pub rows: Vec<ProbeRow>,
    /// Mean and standard error of `Y_H − Y_0` over the horizon `H`.
    pub total_change: (f64, f64),
}

impl SupermartingaleTable {
    /// Largest `step_mean / step_se` over the horizon; steps where every
    /// path is stopped contribute nothing.
    pub fn worst_excess(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.step_se > 0.0)
            .map(|r| r.step_mean / r.step_se)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Every paired increment is at most `k` standard errors above zero.
    pub fn non_increasing_within(&self, k: f64) -> bool {
        self.rows.iter().all(|r| r.step_mean <= k * r.step_se)
    }
}

/// States of one path of the reduced chain stopped on entering `[0, m)`,
/// `X_0, …, X_horizon`, with the entrance step if any.
pub(crate) fn stopped_path(
    kernel: &ReducedKernel,
    x0: f64,
    m: f64,
    horizon: usize,
    rng: &mut RngStream,
) -> (Vec<f64>, Option<usize>) {
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(x0);
    let mut tau = None;
    let mut x = x0;
    for n in 1..=horizon {
        if tau.is_none() {
            x = kernel.step(x, rng);
            if x < m {
                tau = Some(n);
            }
        }
        states.push(x);
    }
    (states, tau)
}

/// Means of `Y_n = f₀(X_{τ∧n})` on the reduced chain from `x0`, where `τ`
/// is the entrance time of `[0, m)`. Path `i` uses stream
/// `PROBE_STREAM_OFFSET + i`.
pub fn supermartingale_probe(
    spec: &PriorSpec,
    x0: f64,
    m: f64,
    n_paths: usize,
    horizon: usize,
    master_seed: u64,
    ctl: &SeriesCtl,
) -> Result<SupermartingaleTable> {
    if !(m > 0.0 && m.is_finite() && x0 > m && x0.is_finite()) {
        return Err(Error::domain("supermartingale_probe", format!("need 0 < m < x0, got m = {m}, x0 = {x0}")));
    }
    if n_paths < 2 || horizon == 0 {
        return Err(Error::domain("supermartingale_probe", "need n_paths ≥ 2 and horizon ≥ 1"));
    }
    let kernel = ReducedKernel::new(spec, ctl)?;
    let paths: Vec<(Vec<f64>, Option<usize>)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = RngStream::new(master_seed, PROBE_STREAM_OFFSET + id);
            let (states, tau) = stopped_path(&kernel, x0, m, horizon, &mut rng);
            (states.into_iter().map(|x| f0_pack(x).f0).collect(), tau)
        })
        .collect();
    let np = n_paths as f64;
    let mean_se = |vals: &mut dyn Iterator<Item = f64>| -> (f64, f64) {
        let v: Vec<f64> = vals.collect();
        let mean = v.iter().sum::<f64>() / np;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (np - 1.0);
        (mean, (var / np).sqrt())
    };
    let rows = (0..=horizon)
        .map(|n| {
            let (mean, se) = mean_se(&mut paths.iter().map(|(y, _)| y[n]));
            let (step_mean, step_se) = if n < horizon {
                mean_se(&mut paths.iter().map(|(y, _)| y[n + 1] - y[n]))
            } else {
                (0.0, 0.0)
            };
            let stopped = paths.iter().filter(|(_, t)| t.is_some_and(|t| t <= n)).count() as f64 / np;
            ProbeRow {
                n,
                mean,
                se,
                step_mean,
                step_se,
                stopped,
            }
        })
        .collect();
    let total_change = mean_se(&mut paths.iter().map(|(y, _)| y[horizon] - y[0]));
    Ok(SupermartingaleTable {
        x0,
        m,
        n_paths,
        rows,
        total_change,
    })
}
