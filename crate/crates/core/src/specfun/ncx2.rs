//! Noncentral chi-square density, raw moments and exact sampling.

use rand::Rng;
use rand_distr::StandardNormal;

use super::gamma::ln_gamma_unchecked;
use super::poisson::{ln_dgamma, ln_dpois_raw};
use super::{RngStream, SeriesCtl};
use crate::error::{Error, Result};

/// `ln` of the χ²ₚ(λ) density at `v`, by the Poisson mixture of central
/// chi-squares summed outward from its largest term.
///
/// `half_p` is `p/2`; it need not be an integer in this internal form.
pub(crate) fn ln_ncx2_pdf_raw(v: f64, half_p: f64, lambda: f64, rel_tol: f64, max_terms: usize) -> Result<f64> {
    let x = 0.5 * v;
    if lambda == 0.0 {
        return Ok(ln_dgamma(x, half_p) - std::f64::consts::LN_2);
    }
    let mu = 0.5 * lambda;
    // Consecutive term ratio t(n+1)/t(n) = c / ((n+1)(n+h)).
    let c = mu * x;
    let h = half_p;
    let root = 0.5 * (-(h - 1.0) + ((h - 1.0) * (h - 1.0) + 4.0 * c).sqrt());
    let mode = if root.is_finite() && root > 0.0 { root.floor() } else { 0.0 };
    let ln_term = |n: f64| ln_dpois_raw(n, mu) + ln_dgamma(x, n + h);
    let l0 = ln_term(mode);
    let ln_c = c.ln();
    let half = 0.5 * rel_tol;

    let mut sum = 1.0;
    let mut count = 1usize;
    // upward
    let mut n = mode;
    let mut rel = 0.0f64; // ln(t(n)/t(mode))
    loop {
        let r = c / ((n + 1.0) * (n + h));
        let tail = if r < 1.0 { rel.exp() * r / (1.0 - r) } else { f64::INFINITY };
        if tail <= half * sum {
            break;
        }
        if count >= max_terms {
            return Err(Error::Truncation { op: "ncx2_pdf", terms: count, tail: tail / sum });
        }
        rel += ln_c - (n + 1.0).ln() - (n + h).ln();
        n += 1.0;
        sum += rel.exp();
        count += 1;
    }
    // downward
    let mut n = mode;
    let mut rel = 0.0f64;
    while n > 0.0 {
        let r = n * (n - 1.0 + h) / c;
        let tail = if r < 1.0 { rel.exp() * r / (1.0 - r) } else { f64::INFINITY };
        if tail <= half * sum {
            break;
        }
        if count >= max_terms {
            return Err(Error::Truncation { op: "ncx2_pdf", terms: count, tail: tail / sum });
        }
        rel += n.ln() + (n - 1.0 + h).ln() - ln_c;
        n -= 1.0;
        sum += rel.exp();
        count += 1;
    }
    Ok(l0 + sum.ln() - std::f64::consts::LN_2)
}

fn check_args(op: &'static str, p: u32, lambda: f64) -> Result<()> {
    if p == 0 {
        return Err(Error::domain(op, "dimension p must be at least 1"));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::domain(op, format!("noncentrality {lambda} must be finite and ≥ 0")));
    }
    Ok(())
}

/// Density of the noncentral chi-square χ²ₚ(λ) at `v > 0`.
pub fn ncx2_pdf(v: f64, p: u32, lambda: f64, ctl: &SeriesCtl) -> Result<f64> {
    ncx2_ln_pdf(v, p, lambda, ctl).map(f64::exp)
}

/// Natural log of [`ncx2_pdf`].
pub fn ncx2_ln_pdf(v: f64, p: u32, lambda: f64, ctl: &SeriesCtl) -> Result<f64> {
    check_args("ncx2_pdf", p, lambda)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::domain("ncx2_pdf", format!("v = {v} must be positive")));
    }
    ln_ncx2_pdf_raw(v, 0.5 * p as f64, lambda, ctl.rel_tol, ctl.max_terms)
}

/// Raw moments `(E V, E V², E V³)` of V ~ χ²ₚ(λ).
pub fn ncx2_moments(p: u32, lambda: f64) -> Result<(f64, f64, f64)> {
    check_args("ncx2_moments", p, lambda)?;
    let p = p as f64;
    let s = lambda + p;
    let m1 = s;
    let m2 = s * s + 4.0 * lambda + 2.0 * p;
    let m3 = s * s * s + 12.0 * s * s - 6.0 * lambda * p + 24.0 * lambda - 6.0 * p * p + 8.0 * p;
    Ok((m1, m2, m3))
}

/// Draw `‖Z‖²` with `Z ~ N(γ, Iₚ)`, `‖γ‖² = λ`.
pub fn ncx2_sample(p: u32, lambda: f64, rng: &mut RngStream) -> f64 {
    debug_assert!(p >= 1 && lambda >= 0.0);
    let z0: f64 = rng.sample::<f64, _>(StandardNormal) + lambda.sqrt();
    let mut acc = z0 * z0;
    for _ in 1..p {
        let z: f64 = rng.sample(StandardNormal);
        acc += z * z;
    }
    acc
}

/// Log of the central chi-square density with `p` degrees of freedom.
#[allow(dead_code)]
pub(crate) fn ln_chi2_pdf(v: f64, p: f64) -> f64 {
    (0.5 * p - 1.0) * (0.5 * v).ln() - 0.5 * v - std::f64::consts::LN_2 - ln_gamma_unchecked(0.5 * p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::quad::{integrate_vec, QuadSettings};

    fn ctl() -> SeriesCtl {
        SeriesCtl::default()
    }

    #[test]
    fn central_two_dof() {
        let got = ncx2_pdf(2.0, 2, 0.0, &ctl()).unwrap();
        assert!((got - (-1f64).exp() / 2.0).abs() < 1e-15);
        assert!((got - 0.183_939_720_6).abs() < 1e-10);
    }

    // Bessel-form reference values from mpmath at 40 digits
    #[test]
    fn matches_reference_values() {
        let cases = [
            (2.5, 3, 7.0, 0.042_767_654_960_480_574),
            (8.0, 3, 5.0, 0.074_851_243_123_043_821),
            (0.01, 5, 100.0, 2.816_566_544_276_229_4e-26),
            (150.0, 10, 120.0, 0.010_996_650_778_686_541),
            (1.0e6 + 1500.0, 3, 1.0e6, 1.506_004_502_653_404_1e-4),
        ];
        for (v, p, lam, want) in cases {
            let got = ncx2_pdf(v, p, lam, &ctl()).unwrap();
            assert!(((got - want) / want).abs() < 1e-9, "({v},{p},{lam}): {got} vs {want}");
        }
    }

    #[test]
    fn moments_central_three_dof() {
        assert_eq!(ncx2_moments(3, 0.0).unwrap(), (3.0, 15.0, 105.0));
        assert_eq!(ncx2_moments(3, 5.0).unwrap().0, 8.0);
    }

    #[test]
    fn sampler_is_deterministic() {
        let a = ncx2_sample(3, 5.0, &mut RngStream::new(1, 2));
        let b = ncx2_sample(3, 5.0, &mut RngStream::new(1, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(ncx2_pdf(0.0, 3, 1.0, &ctl()).is_err());
        assert!(ncx2_pdf(1.0, 0, 1.0, &ctl()).is_err());
        assert!(ncx2_pdf(1.0, 3, -1.0, &ctl()).is_err());
        assert!(ncx2_moments(0, 1.0).is_err());
    }

    #[test]
    fn truncation_is_reported() {
        let tight = SeriesCtl::new(1e-10, 3, 16).unwrap();
        assert!(matches!(ncx2_pdf(1e4, 3, 1e4, &tight), Err(Error::Truncation { .. })));
    }

    #[test]
    fn quadrature_mean_matches_closed_form() {
        // E[V] for (p=3, λ=5) is λ + p = 8.
        let c = ctl();
        let s = QuadSettings::new(1e-12, 0.0, 8);
        let r = integrate_vec(
            |v| {
                let d = if v > 0.0 { ncx2_pdf(v, 3, 5.0, &c).unwrap() } else { 0.0 };
                [d, v * d]
            },
            0.0,
            200.0,
            &s,
            "test",
        )
        .unwrap();
        assert!((r.value[0] - 1.0).abs() < 1e-9);
        assert!((r.value[1] - 8.0).abs() < 1e-8);
    }
}
