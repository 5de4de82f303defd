//! Report documents and their CSV tables.

use recurlab_core::appendix::{AsymptoticReport, MomentTriple};
use recurlab_core::chains::{ChainKind, HittingSummary};
use recurlab_core::recurrence::RecurrenceReport;
use recurlab_core::{Classification, PriorSpec};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const TOOL: &str = "recurlab";

/// A JSON report. `command` and `payload` are written as sibling keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
    #[serde(flatten)]
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "payload", rename_all = "lowercase")]
pub enum Payload {
    Validate(ValidatePayload),
    Moments(MomentsPayload),
    Asymptotics(AsymptoticReport),
    Superharmonic(SuperharmonicPayload),
    Verdict(RecurrenceReport),
    Simulate(SimulatePayload),
    Dichotomy(DichotomyPayload),
    Consistency(ConsistencyPayload),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatePayload {
    pub spec: PriorSpec,
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsPayload {
    pub spec: PriorSpec,
    pub rows: Vec<MomentTriple>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperharmonicRow {
    pub eta: f64,
    pub bracket: f64,
    pub delta: f64,
    pub cond21_lhs: f64,
    pub cond21_rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperharmonicPayload {
    pub spec: PriorSpec,
    pub psi1_eps: f64,
    pub threshold_m: Option<f64>,
    pub rows: Vec<SuperharmonicRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatePayload {
    pub spec: PriorSpec,
    pub chain: ChainKind,
    pub m: f64,
    pub start: f64,
    pub summary: HittingSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DichotomyRow {
    pub p: u32,
    pub n_paths: usize,
    pub max_steps: u64,
    pub hits: usize,
    pub censored: usize,
    pub hit_fraction: f64,
    pub q25: Option<f64>,
    pub q50: Option<f64>,
    pub q75: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyPayload {
    pub m: f64,
    pub start: f64,
    pub rows: Vec<DichotomyRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub x_norm: f64,
    pub ks_statistic: f64,
    pub ks_critical: f64,
    pub ks_reject: bool,
    pub acceptance_rate: f64,
    pub dirichlet_full: f64,
    pub dirichlet_full_se: f64,
    pub dirichlet_reduced: f64,
    pub dirichlet_reduced_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyPayload {
    pub spec: PriorSpec,
    pub samples: usize,
    pub rows: Vec<ConsistencyRow>,
}

#[derive(Serialize)]
struct AsymptoticCsv {
    eta: f64,
    mu1: f64,
    mu2: f64,
    mu3: f64,
    rem1: f64,
    rem2: f64,
    rem3: f64,
}

#[derive(Serialize)]
struct MomentCsv {
    eta: f64,
    mu1: f64,
    mu2: f64,
    mu3: f64,
}

#[derive(Serialize)]
struct PathCsv {
    path_id: usize,
    /// `-1` when censored.
    hit_step: i64,
}

fn table<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(w.into_inner().expect("flushed"))
}

impl Payload {
    /// The CSV table for this payload, or `None` where there is none.
    pub fn csv(&self) -> Option<Result<Vec<u8>, csv::Error>> {
        Some(match self {
            Payload::Validate(_) | Payload::Verdict(_) => return None,
            Payload::Moments(m) => table(m.rows.iter().map(|r| MomentCsv {
                eta: r.eta,
                mu1: r.mu1,
                mu2: r.mu2,
                mu3: r.mu3,
            })),
            Payload::Asymptotics(a) => table(a.rows.iter().map(|r| AsymptoticCsv {
                eta: r.eta,
                mu1: r.mu1,
                mu2: r.mu2,
                mu3: r.mu3,
                rem1: r.rem1,
                rem2: r.rem2,
                rem3: r.rem3,
            })),
            Payload::Superharmonic(s) => table(&s.rows),
            Payload::Simulate(s) => table(s.summary.hit_steps.iter().enumerate().map(|(path_id, h)| PathCsv {
                path_id,
                hit_step: h.map_or(-1, |t| t as i64),
            })),
            Payload::Dichotomy(d) => table(&d.rows),
            Payload::Consistency(c) => table(&c.rows),
        })
    }
}
