//! Increment moments of the reduced chain.
//!
//! With `N | y ~ Poisson(y/2)` and `w_k(n) = E[g₀(Z)(Z/2)ᵏ]` for
//! `Z ~ Gamma(n + p/2, scale 2)`, the posterior moments of `β` given
//! `‖x‖² = y` are `2ᵏ E[w_k(N)|y] / E[w₀(N)|y]`, and the moments of one
//! reduced-chain step from `η` average these over `y ~ χ²ₚ(η)`.
//!
//! Everything is carried as logarithms or as ratios centered at `y/2`, so the
//! `O(η³)` terms that cancel in the third increment moment never appear.

mod moments;
mod weights;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::PriorSpec;
use crate::specfun::{ln_gamma_ratio, SeriesCtl};

pub(crate) use moments::{expect_ncx2, table_for_eta};
pub(crate) use weights::TiltedGamma;
pub use weights::WeightTable;

/// A positive or negative number stored as `sign · exp(ln_abs)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    pub ln_abs: f64,
    pub sign: i8,
}

impl LogValue {
    pub fn positive(ln_abs: f64) -> Self {
        Self { ln_abs, sign: 1 }
    }

    pub fn value(&self) -> f64 {
        self.sign as f64 * self.ln_abs.exp()
    }
}

/// First three moments of the increment `β − η` of one reduced-chain step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTriple {
    pub eta: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
}

/// `E[w_k(N)|y] / E[w_{k−1}(N)|y]` split as `p/2 + 2(k − b − 1) + y/2 + psi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioDecomposition {
    pub k: u32,
    pub y: f64,
    pub ratio: f64,
    pub psi: f64,
}

fn check_k(k: u32, range: std::ops::RangeInclusive<u32>, op: &'static str) -> Result<()> {
    if range.contains(&k) {
        Ok(())
    } else {
        Err(Error::domain(op, format!("k = {k} outside {range:?}")))
    }
}

fn limit_offset(k: u32, spec: &PriorSpec) -> f64 {
    spec.half_p() + 2.0 * (k as f64 - spec.b() - 1.0)
}

/// `w_k(n)`, in closed form when `a = 0` and by quadrature otherwise.
pub fn w_k(n: usize, k: u32, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<LogValue> {
    spec.require_valid("w_k")?;
    check_k(k, 0..=3, "w_k")?;
    let s = n as f64 + spec.half_p();
    if spec.a() == 0.0 {
        let b = spec.b();
        let ln = ln_gamma_ratio(s, k as f64 - b) - b * std::f64::consts::LN_2;
        return Ok(LogValue::positive(ln));
    }
    weights::ln_w_quadrature(n, k, spec, ctl).map(LogValue::positive)
}

/// `φ(n)`; identically zero when `a = 0`.
pub fn phi(n: usize, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<f64> {
    spec.require_valid("phi")?;
    weights::phi_quadrature(n, spec, ctl)
}

/// The `k`-th ratio of Poisson-averaged `w`'s at `y`, with its residual.
pub fn ew_ratio(k: u32, y: f64, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<RatioDecomposition> {
    spec.require_valid("ew_ratio")?;
    check_k(k, 1..=3, "ew_ratio")?;
    if !(y >= 0.0 && y.is_finite()) {
        return Err(Error::domain("ew_ratio", format!("y = {y}")));
    }
    let table = WeightTable::for_means(spec, 0.5 * y, 0.5 * y, ctl)?;
    let e = table.centered_ratios(y, ctl)?[k as usize - 1];
    Ok(RatioDecomposition {
        k,
        y,
        ratio: 0.5 * y + e,
        psi: e - limit_offset(k, spec),
    })
}

fn check_eta(eta: f64, op: &'static str) -> Result<()> {
    if eta >= 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(op, format!("eta = {eta}")))
    }
}

/// Increment moments `μ_k(η) = E[(β − η)ᵏ]` of the reduced chain.
///
/// Averages the conditional mean offset, variance and third cumulant of `β`
/// given `y` over `y ~ χ²ₚ(η)`, then recombines them into raw increment moments.
pub fn mu_triple(eta: f64, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<MomentTriple> {
    spec.require_valid("mu_triple")?;
    check_eta(eta, "mu_triple")?;
    let table = table_for_eta(eta, spec, ctl)?;
    let [m1, m2, m3] = expect_ncx2(eta, spec, ctl, ctl.rel_tol, "mu_triple", |y, u| {
        let e = table.centered_ratios(y, ctl)?;
        let [c, v, k3] = moments::conditional_central(e, y, u, eta);
        Ok([c, v + c * c, k3 + 3.0 * v * c + c * c * c])
    })?;
    Ok(MomentTriple {
        eta,
        mu1: m1,
        mu2: m2,
        mu3: m3,
    })
}

/// The same moments assembled from `E[m_k(Y)/m₀(Y)]` by the binomial
/// expansion `μ₃ = 8E[r₃] − 12ηE[r₂] + 6η²E[r₁] − η³` and its analogues.
///
/// Mathematically equal to [`mu_triple`] but loses about `log₁₀ η³` digits to
/// cancellation; only meaningful for small `η`.
pub fn mu_triple_uncentered(eta: f64, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<MomentTriple> {
    spec.require_valid("mu_triple_uncentered")?;
    check_eta(eta, "mu_triple_uncentered")?;
    let table = table_for_eta(eta, spec, ctl)?;
    let [r1, r2, r3] = expect_ncx2(eta, spec, ctl, 0.0, "mu_triple_uncentered", |y, _| {
        let [e1, e2, e3] = table.centered_ratios(y, ctl)?;
        let (q1, q2, q3) = (0.5 * y + e1, 0.5 * y + e2, 0.5 * y + e3);
        Ok([q1, q1 * q2, q1 * q2 * q3])
    })?;
    Ok(MomentTriple {
        eta,
        mu1: 2.0 * r1 - eta,
        mu2: 4.0 * r2 - 4.0 * eta * r1 + eta * eta,
        mu3: 8.0 * r3 - 12.0 * eta * r2 + 6.0 * eta * eta * r1 - eta * eta * eta,
    })
}

/// `E[ψ_k(Y) | η]` for `Y ~ χ²ₚ(η)`.
pub fn mean_residual(k: u32, eta: f64, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<f64> {
    spec.require_valid("mean_residual")?;
    check_k(k, 1..=3, "mean_residual")?;
    check_eta(eta, "mean_residual")?;
    let table = table_for_eta(eta, spec, ctl)?;
    let offset = limit_offset(k, spec);
    let [m] = expect_ncx2(eta, spec, ctl, ctl.rel_tol, "mean_residual", |y, _| {
        Ok([table.centered_ratios(y, ctl)?[k as usize - 1] - offset])
    })?;
    Ok(m)
}

/// One row of [`asymptotic_report`]: the moments and their remainders
/// against the large-`η` limits `2p − 4b`, `8η` and `O(η)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRow {
    pub eta: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    /// `μ₁ − (2p − 4b)`
    pub rem1: f64,
    /// `μ₂ − 8η`
    pub rem2: f64,
    /// `μ₃ / η`
    pub rem3: f64,
}

/// `|rem(10η)| / |rem(η)|` for grid points a decade apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecadeRatio {
    pub eta: f64,
    pub rem1: f64,
    pub rem2: f64,
    pub rem3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub spec: PriorSpec,
    pub rows: Vec<AsymptoticRow>,
    pub decade_ratios: Vec<DecadeRatio>,
}

impl AsymptoticRow {
    pub fn new(m: &MomentTriple, spec: &PriorSpec) -> Self {
        Self {
            eta: m.eta,
            mu1: m.mu1,
            mu2: m.mu2,
            mu3: m.mu3,
            rem1: m.mu1 - spec.drift_limit(),
            rem2: m.mu2 - 8.0 * m.eta,
            rem3: m.mu3 / m.eta,
        }
    }
}

/// Moments and remainder diagnostics on an ascending grid of positive `η`.
pub fn asymptotic_report(spec: &PriorSpec, eta_grid: &[f64], ctl: &SeriesCtl) -> Result<AsymptoticReport> {
    spec.require_valid("asymptotic_report")?;
    if eta_grid.is_empty() {
        return Err(Error::domain("asymptotic_report", "empty grid"));
    }
    if eta_grid.iter().any(|&e| !(e > 0.0 && e.is_finite())) || eta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("asymptotic_report", "grid must be positive and strictly ascending"));
    }
    let rows: Vec<AsymptoticRow> = eta_grid
        .par_iter()
        .map(|&eta| mu_triple(eta, spec, ctl).map(|m| AsymptoticRow::new(&m, spec)))
        .collect::<Result<_>>()?;
    let mut decade_ratios = Vec::new();
    for lo in &rows {
        if let Some(hi) = rows.iter().find(|r| ((r.eta / lo.eta) / 10.0 - 1.0).abs() < 1e-9) {
            decade_ratios.push(DecadeRatio {
                eta: lo.eta,
                rem1: hi.rem1.abs() / lo.rem1.abs(),
                rem2: hi.rem2.abs() / lo.rem2.abs(),
                rem3: hi.rem3.abs() / lo.rem3.abs(),
            });
        }
    }
    Ok(AsymptoticReport {
        spec: *spec,
        rows,
        decade_ratios,
    })
}
