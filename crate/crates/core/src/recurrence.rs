//! Superharmonic-function criterion for recurrence of the reduced chain.
//!
//! The drift function is `f₀(x) = ln ln(e + x)`. If `E[f₀(X₁) | X₀ = η] ≤ f₀(η)`
//! for all `η ≥ m` and the chain leaves `[0, m]` with probability bounded away
//! from zero, then `C = [0, m)` is recurrent. This module evaluates both
//! conditions on grids; a passing grid is evidence, not proof.

use std::f64::consts::E;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::appendix::{expect_ncx2, mu_triple, table_for_eta, MomentTriple, TiltedGamma};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::prior::PriorSpec;
use crate::specfun::quad::integrate_vec;
use crate::specfun::SeriesCtl;

/// `f₀` and its first four derivatives at `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Pack {
    pub x: f64,
    pub f0: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

/// `f₀(x) = ln ln(e + x)` with closed-form derivatives; `x ≥ 0`.
pub fn f0_pack(x: f64) -> F0Pack {
    let z = E + x;
    let l = (x / E).ln_1p() + 1.0;
    let zl = z * l;
    F0Pack {
        x,
        f0: (x / E).ln_1p().ln_1p(),
        d1: 1.0 / zl,
        d2: -(l + 1.0) / (zl * zl),
        d3: (2.0 * l * l + 3.0 * l + 2.0) / (zl * zl * zl),
        d4: -(6.0 * l * l * l + 11.0 * l * l + 12.0 * l + 6.0) / (zl * zl * zl * zl),
    }
}

/// `f₀(β) − f₀(η)`, evaluated as `ln(1 + ln(1 + (β − η)/(e + η)) / ln(e + η))`.
pub(crate) fn f0_increment(beta: f64, eta: f64) -> f64 {
    let l_eta = (eta / E).ln_1p() + 1.0;
    (((beta - eta) / (E + eta)).ln_1p() / l_eta).ln_1p()
}

/// Terms of the third-order Taylor bound on `δ(η) = E[f₀(X₁)] − f₀(η)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketTerms {
    pub eta: f64,
    pub psi1: f64,
    /// `2f₀‴ μ₃ η / (6 f₀′ μ₂)`
    pub psi2: f64,
    /// `2η μ₁ / μ₂`
    pub cond21_lhs: f64,
    /// `1 + ψ₁`
    pub cond21_rhs: f64,
    /// `f₀′μ₂/(2η) · [1 + ψ₁ + η f₀″/f₀′ + ψ₂]`
    pub bound: f64,
    /// The same bound written as `f₀′μ₂/(2η) · η f₀′ · bracket`.
    pub bound_factored: f64,
    /// `−1 + e ln(η + e)/η + ψ₁/(η f₀′) + ψ₂/(η f₀′)`
    pub bracket: f64,
    /// `|bound − bound_factored|` relative to the size of the summed terms.
    pub identity_gap: f64,
}

impl BracketTerms {
    pub fn drift_condition_holds(&self) -> bool {
        self.cond21_lhs <= self.cond21_rhs
    }
}

/// Both forms of the Taylor bound at `η` for an explicit `ψ₁(η)`.
pub fn bracket_terms(eta: f64, m: &MomentTriple, psi1: f64) -> Result<BracketTerms> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::domain("bracket28", format!("eta = {eta} must be positive")));
    }
    if !(m.mu2 > 0.0) {
        return Err(Error::domain("bracket28", format!("mu2 = {} must be positive", m.mu2)));
    }
    let f = f0_pack(eta);
    let psi2 = 2.0 * f.d3 * m.mu3 * eta / (6.0 * f.d1 * m.mu2);
    let lead = f.d1 * m.mu2 / (2.0 * eta);
    let curvature = eta * f.d2 / f.d1;
    let bound = lead * (1.0 + psi1 + curvature + psi2);
    let xd1 = eta * f.d1;
    let l = (eta / E).ln_1p() + 1.0;
    let bracket = -1.0 + E * l / eta + psi1 / xd1 + psi2 / xd1;
    let bound_factored = lead * xd1 * bracket;
    let scale = lead * (1.0 + psi1.abs() + curvature.abs() + psi2.abs());
    Ok(BracketTerms {
        eta,
        psi1,
        psi2,
        cond21_lhs: 2.0 * eta * m.mu1 / m.mu2,
        cond21_rhs: 1.0 + psi1,
        bound,
        bound_factored,
        bracket,
        identity_gap: (bound - bound_factored).abs() / scale,
    })
}

/// Taylor-bound terms with `ψ₁(η) = η^{−ε}`.
pub fn bracket28(eta: f64, m: &MomentTriple, psi1_eps: f64) -> Result<BracketTerms> {
    if !(psi1_eps > 0.0 && psi1_eps < 1.0) {
        return Err(Error::domain("bracket28", format!("epsilon = {psi1_eps} not in (0, 1)")));
    }
    let t = bracket_terms(eta, m, eta.powf(-psi1_eps))?;
    if t.identity_gap > 1e-10 {
        return Err(Error::domain(
            "bracket28",
            format!("factored and expanded bounds disagree by {:e} at eta = {eta}", t.identity_gap),
        ));
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub moments: MomentTriple,
    pub terms: BracketTerms,
    /// Drift condition and negative bracket both hold.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScan {
    pub psi1_eps: f64,
    pub rows: Vec<ThresholdRow>,
    /// Smallest grid point from which both conditions hold at every larger grid point.
    pub threshold: Option<f64>,
}

/// Scan an ascending `η` grid for the start of the superharmonic region.
pub fn find_threshold(spec: &PriorSpec, eta_grid: &[f64], psi1_eps: f64, ctl: &SeriesCtl) -> Result<ThresholdScan> {
    spec.require_valid("find_threshold")?;
    if eta_grid.len() < 2 || eta_grid.iter().any(|&e| !(e > 0.0)) || eta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("find_threshold", "grid must be positive and strictly ascending"));
    }
    if eta_grid[eta_grid.len() - 1] / eta_grid[0] < 1e3 * (1.0 - 1e-12) {
        return Err(Error::domain("find_threshold", "grid must span at least three decades"));
    }
    let rows: Vec<ThresholdRow> = eta_grid
        .par_iter()
        .map(|&eta| {
            let moments = mu_triple(eta, spec, ctl)?;
            let terms = bracket28(eta, &moments, psi1_eps)?;
            let holds = terms.drift_condition_holds() && terms.bracket < 0.0;
            Ok(ThresholdRow { moments, terms, holds })
        })
        .collect::<Result<_>>()?;
    let first_of_tail = rows.iter().rposition(|r| !r.holds).map_or(0, |i| i + 1);
    let threshold = rows.get(first_of_tail).map(|r| r.moments.eta);
    Ok(ThresholdScan {
        psi1_eps,
        rows,
        threshold,
    })
}

fn tilted_law(n: usize, spec: &PriorSpec) -> TiltedGamma {
    TiltedGamma {
        shape: n as f64 + spec.half_p(),
        a: spec.a(),
        b: spec.b(),
    }
}

/// `E[f(β)]` under the `g₀`-tilted Gamma(n + p/2, scale 2) law, to absolute
/// accuracy about `abs_tol` when `f` is of order one or smaller.
fn tilted_expectation<F: Fn(f64) -> f64>(n: usize, spec: &PriorSpec, ctl: &SeriesCtl, abs_tol: f64, f: F) -> Result<f64> {
    let tg = tilted_law(n, spec);
    let (lo, hi, l0) = tg.support()?;
    // the normalizer is about 2.5σ, so scale the target by σ
    let sigma = 1.0 / tg.curvature(tg.peak()).sqrt();
    let est = integrate_vec(
        |x| {
            let w = (tg.ln_f(x) - l0).exp();
            [w, w * f(2.0 * x.exp())]
        },
        lo,
        hi,
        &ctl.quad(abs_tol * sigma),
        "tilted_expectation",
    )?;
    Ok(est.value[1] / est.value[0])
}

/// `(P(β ≤ m), P(β > m))` under the `g₀`-tilted Gamma(n + p/2, scale 2) law,
/// each computed directly so neither loses precision near 1.
fn tilted_split(n: usize, m: f64, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<(f64, f64)> {
    let tg = tilted_law(n, spec);
    let (lo, hi, l0) = tg.support()?;
    let xm = (0.5 * m).ln();
    if xm <= lo {
        return Ok((0.0, 1.0));
    }
    if xm >= hi {
        return Ok((1.0, 0.0));
    }
    let settings = ctl.quad(0.0);
    let w = |x: f64| [(tg.ln_f(x) - l0).exp()];
    let below = integrate_vec(w, lo, xm, &settings, "tilted_cdf")?.value[0];
    let above = integrate_vec(w, xm, hi, &settings, "tilted_cdf")?.value[0];
    let total = below + above;
    Ok((below / total, above / total))
}

/// `δ(η) = E[f₀(β) − f₀(η)]` for one exact reduced-chain step from `η`.
///
/// Given `‖x‖² = v`, `β` is a mixture over `n` with weights
/// `∝ Poisson(n; v/2)·w₀(n)` of tilted Gamma laws, so the inner expectation is
/// a weighted sum of one-dimensional integrals tabulated once per `n`.
pub fn delta_direct(eta: f64, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<f64> {
    spec.require_valid("delta_direct")?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::domain("delta_direct", format!("eta = {eta} must be positive")));
    }
    let table = table_for_eta(eta, spec, ctl)?;
    let abs_tol = 1e-3 * ctl.rel_tol * f0_pack(eta).f0.max(1.0);
    let h: Vec<f64> = (table.start()..=table.end())
        .into_par_iter()
        .map(|n| tilted_expectation(n, spec, ctl, abs_tol, |beta| f0_increment(beta, eta)))
        .collect::<Result<_>>()
        .map_err(|e| e.within("delta_direct inner"))?;
    let [d] = expect_ncx2(eta, spec, ctl, abs_tol, "delta_direct outer", |v, _| {
        Ok([table.mixture_average(v, &h, ctl)?])
    })?;
    Ok(d)
}

/// One-step masses `(R̃([0, m] | η), R̃((m, ∞) | η))`.
pub fn return_split(m: f64, eta: f64, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<(f64, f64)> {
    spec.require_valid("return_mass")?;
    if !(m > 0.0 && m.is_finite()) || !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::domain("return_mass", format!("m = {m}, eta = {eta}")));
    }
    let table = table_for_eta(eta, spec, ctl)?;
    let (below, above): (Vec<f64>, Vec<f64>) = (table.start()..=table.end())
        .into_par_iter()
        .map(|n| tilted_split(n, m, spec, ctl))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let [inside, outside] = expect_ncx2(eta, spec, ctl, 1e-3 * ctl.rel_tol, "return_mass", |v, _| {
        Ok([table.mixture_average(v, &below, ctl)?, table.mixture_average(v, &above, ctl)?])
    })?;
    Ok((inside, outside))
}

/// `R̃([0, m] | η)`, the probability that one reduced-chain step from `η` lands in `[0, m]`.
pub fn return_mass(m: f64, eta: f64, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<f64> {
    return_split(m, eta, spec, ctl).map(|(inside, _)| inside)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassPoint {
    pub eta: f64,
    pub mass: f64,
    /// `1 − mass`, computed directly.
    pub escape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeScan {
    pub m: f64,
    pub rows: Vec<MassPoint>,
    /// Largest return mass on the grid.
    pub sup: f64,
    /// Smallest escape mass on the grid; positive exactly when the supremum is below 1.
    pub min_escape: f64,
}

impl EscapeScan {
    /// Every grid value lies strictly inside (0, 1).
    pub fn all_interior(&self) -> bool {
        self.rows.iter().all(|r| r.mass > 0.0 && r.escape > 0.0)
    }
}

/// `sup_η R̃([0, m] | η)` over a grid in `[0, m]`; the return mass is continuous
/// in `η`, so the grid maximum approximates the supremum.
pub fn prop43_sup(m: f64, spec: &PriorSpec, eta_grid: &[f64], ctl: &SeriesCtl) -> Result<EscapeScan> {
    if eta_grid.is_empty() || eta_grid.iter().any(|&e| !(0.0..=m).contains(&e)) {
        return Err(Error::domain("prop43_sup", format!("grid must be non-empty and inside [0, {m}]")));
    }
    let rows: Vec<MassPoint> = eta_grid
        .par_iter()
        .map(|&eta| return_split(m, eta, spec, ctl).map(|(mass, escape)| MassPoint { eta, mass, escape }))
        .collect::<Result<_>>()?;
    let sup = rows.iter().map(|r| r.mass).fold(f64::NEG_INFINITY, f64::max);
    let min_escape = rows.iter().map(|r| r.escape).fold(f64::INFINITY, f64::min);
    Ok(EscapeScan { m, rows, sup, min_escape })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "evidence-for-recurrence")]
    EvidenceForRecurrence,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::EvidenceForRecurrence => "evidence-for-recurrence",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Grids used by [`assemble_verdict_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictSettings {
    pub eta_grid: GridSpec,
    pub psi1_eps: f64,
    /// Log-spaced points on `[m, eta_grid.max]` where `δ` is evaluated directly.
    pub confirm_points: usize,
    /// Linearly spaced points on `[0, m]` for the return-mass supremum.
    pub escape_points: usize,
}

impl Default for VerdictSettings {
    fn default() -> Self {
        Self {
            eta_grid: GridSpec::log(1.0, 1e6, 61),
            psi1_eps: 0.5,
            confirm_points: 25,
            escape_points: 21,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaPoint {
    pub eta: f64,
    pub delta: f64,
    /// The Taylor upper bound at the same `η`.
    pub bound: f64,
    pub drift_condition: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub spec: PriorSpec,
    pub settings: VerdictSettings,
    pub threshold_m: Option<f64>,
    pub bracket_grid: Vec<ThresholdRow>,
    pub delta_grid: Vec<DeltaPoint>,
    pub escape: Option<EscapeScan>,
    pub verdict: Verdict,
    pub diagnostics: Vec<String>,
}

/// Direct `δ` and the Taylor bound at each grid point.
pub fn delta_scan(spec: &PriorSpec, grid: &[f64], psi1_eps: f64, ctl: &SeriesCtl) -> Result<Vec<DeltaPoint>> {
    grid.par_iter()
        .map(|&eta| {
            let delta = delta_direct(eta, spec, ctl)?;
            let m = mu_triple(eta, spec, ctl)?;
            let t = bracket28(eta, &m, psi1_eps)?;
            Ok(DeltaPoint {
                eta,
                delta,
                bound: t.bound,
                drift_condition: t.drift_condition_holds(),
            })
        })
        .collect()
}

/// [`assemble_verdict_with`] under the default grids.
pub fn assemble_verdict(spec: &PriorSpec, ctl: &SeriesCtl) -> Result<RecurrenceReport> {
    assemble_verdict_with(spec, ctl, &VerdictSettings::default())
}

/// Threshold scan, direct confirmation of `δ ≤ 0` beyond the threshold and
/// the return-mass bound below it. Numerical failures make the verdict
/// inconclusive and are recorded as diagnostics.
pub fn assemble_verdict_with(spec: &PriorSpec, ctl: &SeriesCtl, settings: &VerdictSettings) -> Result<RecurrenceReport> {
    spec.require_valid("assemble_verdict")?;
    let mut report = RecurrenceReport {
        spec: *spec,
        settings: *settings,
        threshold_m: None,
        bracket_grid: Vec::new(),
        delta_grid: Vec::new(),
        escape: None,
        verdict: Verdict::Inconclusive,
        diagnostics: Vec::new(),
    };
    let grid = settings.eta_grid.values()?;
    match find_threshold(spec, &grid, settings.psi1_eps, ctl) {
        Ok(scan) => {
            report.threshold_m = scan.threshold;
            report.bracket_grid = scan.rows;
        }
        Err(e) => report.diagnostics.push(format!("threshold scan failed: {e}")),
    }
    let Some(m) = report.threshold_m else {
        if report.diagnostics.is_empty() {
            report
                .diagnostics
                .push("no grid point beyond which the drift condition and negative bracket both hold".into());
        }
        return Ok(report);
    };

    let top = settings.eta_grid.max;
    let confirm = if m < top {
        GridSpec::log(m, top, settings.confirm_points.max(2)).values()?
    } else {
        vec![m]
    };
    let mut delta_ok = false;
    match delta_scan(spec, &confirm, settings.psi1_eps, ctl) {
        Ok(points) => {
            let bad: Vec<f64> = points.iter().filter(|d| d.delta > 0.0).map(|d| d.eta).collect();
            if bad.is_empty() {
                delta_ok = true;
            } else {
                report.diagnostics.push(format!("delta > 0 at eta = {bad:?}"));
            }
            report.delta_grid = points;
        }
        Err(e) => report.diagnostics.push(format!("delta confirmation failed: {e}")),
    }

    let mut escape_ok = false;
    let escape_grid = GridSpec::linear(0.0, m, settings.escape_points.max(2)).values()?;
    match prop43_sup(m, spec, &escape_grid, ctl) {
        Ok(scan) => {
            escape_ok = scan.min_escape > 0.0 && scan.all_interior();
            if !escape_ok {
                report.diagnostics.push(format!("escape mass {} not positive on the grid", scan.min_escape));
            }
            report.escape = Some(scan);
        }
        Err(e) => report.diagnostics.push(format!("return-mass scan failed: {e}")),
    }

    if delta_ok && escape_ok {
        report.verdict = Verdict::EvidenceForRecurrence;
    }
    Ok(report)
}
