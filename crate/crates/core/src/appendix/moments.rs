use crate::error::{Error, Result};
use crate::prior::PriorSpec;
use crate::specfun::quad::integrate_vec;
use crate::specfun::{ln_ncx2_pdf_raw, SeriesCtl};

use super::weights::WeightTable;

/// Relative accuracy of the noncentral chi-square weight inside outer integrals.
pub(crate) const PDF_TOL: f64 = 1e-15;

/// Range of `u = √y` holding all but a negligible share of χ²ₚ(η).
///
/// `‖Z‖ ≤ √η + ‖Z − γ‖` and `P(χₚ > √p + t) ≤ e^{−t²/2}` bound the upper
/// tail; the projection of `Z` on `γ` bounds the lower tail by `Φ(−t)`.
pub(crate) fn sqrt_window(eta: f64, p: u32, tol: f64) -> (f64, f64) {
    let t = (2.0 * (1.0 / tol).ln()).sqrt().max(6.0) + 3.0;
    let r = eta.sqrt();
    ((r - t).max(0.0), r + (p as f64).sqrt() + t)
}

/// `E[F(Y)]` for `Y ~ χ²ₚ(η)`, integrated in `u = √y` so that the density's
/// `y^{p/2−1}` factor at the origin becomes smooth.
///
/// `f` receives `(y, u)` and may fail; the first failure aborts the integral.
pub(crate) fn expect_ncx2<const K: usize, F>(
    eta: f64,
    spec: &PriorSpec,
    ctl: &SeriesCtl,
    abs_tol: f64,
    layer: &str,
    mut f: F,
) -> Result<[f64; K]>
where
    F: FnMut(f64, f64) -> Result<[f64; K]>,
{
    let half_p = spec.half_p();
    let (lo, hi) = sqrt_window(eta, spec.p, ctl.rel_tol * 1e-4);
    let mut failure: Option<Error> = None;
    let est = integrate_vec(
        |u| {
            let y = u * u;
            if failure.is_some() || y <= 0.0 {
                return [0.0; K];
            }
            let weight = match ln_ncx2_pdf_raw(y, half_p, eta, PDF_TOL, ctl.max_terms) {
                Ok(l) => 2.0 * u * l.exp(),
                Err(e) => {
                    failure = Some(e);
                    return [0.0; K];
                }
            };
            if weight == 0.0 {
                return [0.0; K];
            }
            match f(y, u) {
                Ok(v) => v.map(|x| x * weight),
                Err(e) => {
                    failure = Some(e);
                    [0.0; K]
                }
            }
        },
        lo,
        hi,
        &ctl.quad(abs_tol),
        layer,
    );
    if let Some(e) = failure {
        return Err(e.within(layer));
    }
    Ok(est?.value)
}

/// Table of `φ`/`w₀` covering every `y` the outer integral at `η` can visit.
pub(crate) fn table_for_eta(eta: f64, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<WeightTable> {
    let (lo, hi) = sqrt_window(eta, spec.p, ctl.rel_tol * 1e-4);
    WeightTable::for_means(spec, 0.5 * lo * lo, 0.5 * hi * hi, ctl)
}

/// Conditional central moments of `β` given `y`: mean offset `E[β|y] − η`,
/// variance and third cumulant, written in terms of the centered ratios so
/// that no `O(y)` quantities cancel.
pub(crate) fn conditional_central(e: [f64; 3], y: f64, u: f64, eta: f64) -> [f64; 3] {
    let [e1, e2, e3] = e;
    let rho1 = 0.5 * y + e1;
    // y − η = (u − √η)(u + √η)
    let s = eta.sqrt();
    let c = (u - s) * (u + s) + 2.0 * e1;
    let var = 4.0 * rho1 * (e2 - e1);
    let k3 = 8.0 * rho1 * (rho1 * (e3 - 2.0 * e2 + e1) + (e2 - e1) * (e3 - e1));
    [c, var, k3]
}
