//! Saddle-point Poisson and gamma log-densities, and truncated Poisson windows.
//!
//! The log-density kernels use Loader's deviance form (`stirlerr` + `bd0`),
//! which keeps full relative accuracy for counts and means up to 1e6 and
//! beyond, where the naive `n ln μ − μ − ln n!` loses digits.

use std::f64::consts::PI;

use super::gamma::ln_gamma_unchecked;
use super::SeriesCtl;
use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Γ(n+1) − (n+½)ln n + n − ln√(2π)`.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        return ln_gamma_unchecked(n + 1.0) - (n + 0.5) * n.ln() + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/m) + m − x`, evaluated without cancellation.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// `ln(mᵏ e^{−m} / Γ(k+1))` for real `k ≥ 0`, `m ≥ 0`.
pub(crate) fn ln_dpois_raw(k: f64, m: f64) -> f64 {
    if m == 0.0 {
        return if k == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if k == 0.0 {
        return -m;
    }
    -stirlerr(k) - bd0(k, m) - 0.5 * (2.0 * PI * k).ln()
}

/// Log density of Gamma(shape, rate 1) at `x > 0`.
pub(crate) fn ln_dgamma(x: f64, shape: f64) -> f64 {
    if shape >= 1.0 {
        ln_dpois_raw(shape - 1.0, x)
    } else {
        ln_dpois_raw(shape, x) + (shape / x).ln()
    }
}

/// A contiguous block of Poisson log-probabilities `[start, start + len)`.
#[derive(Debug, Clone)]
pub struct PoissonWindow {
    pub start: usize,
    pub log_weights: Vec<f64>,
    /// Upper bound on the probability mass outside the window.
    pub tail_bound: f64,
}

impl PoissonWindow {
    pub fn end(&self) -> usize {
        self.start + self.log_weights.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.log_weights
            .iter()
            .enumerate()
            .map(move |(i, &lw)| (self.start + i, lw))
    }
}

/// Poisson(mean) log-probabilities, expanded outward from the mode until
/// each side's omitted mass is provably below `tail_tol / 2`.
pub(crate) fn poisson_window(mean: f64, tail_tol: f64, max_terms: usize) -> Result<PoissonWindow> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::domain("poisson_weights", format!("mean = {mean}")));
    }
    if mean == 0.0 {
        return Ok(PoissonWindow {
            start: 0,
            log_weights: vec![0.0],
            tail_bound: 0.0,
        });
    }
    let half = 0.5 * tail_tol;
    let mode = mean.floor() as usize;
    let ln_mean = mean.ln();
    let lp_mode = ln_dpois_raw(mode as f64, mean);

    let mut upper = Vec::new();
    let mut lp = lp_mode;
    let mut n = mode;
    let mut up_tail;
    loop {
        // Terms after n shrink at least geometrically with ratio mean/(n+1).
        let r = mean / (n + 1) as f64;
        up_tail = if r < 1.0 { lp.exp() * r / (1.0 - r) } else { f64::INFINITY };
        if up_tail <= half {
            break;
        }
        if upper.len() + 1 >= max_terms {
            return Err(Error::Truncation {
                op: "poisson_weights",
                terms: upper.len() + 1,
                tail: up_tail,
            });
        }
        lp += ln_mean - ((n + 1) as f64).ln();
        n += 1;
        upper.push(lp);
    }

    let mut lower = Vec::new();
    let mut lp = lp_mode;
    let mut n = mode;
    let mut down_tail = 0.0;
    while n > 0 {
        let r = n as f64 / mean;
        down_tail = if r < 1.0 { lp.exp() * r / (1.0 - r) } else { f64::INFINITY };
        if down_tail <= half {
            break;
        }
        if lower.len() + upper.len() + 1 > max_terms {
            return Err(Error::Truncation {
                op: "poisson_weights",
                terms: lower.len() + upper.len() + 1,
                tail: down_tail + up_tail,
            });
        }
        lp += (n as f64).ln() - ln_mean;
        n -= 1;
        lower.push(lp);
        if n == 0 {
            down_tail = 0.0;
        }
    }

    let start = mode - lower.len();
    let mut log_weights = Vec::with_capacity(lower.len() + 1 + upper.len());
    log_weights.extend(lower.into_iter().rev());
    log_weights.push(lp_mode);
    log_weights.extend(upper);
    Ok(PoissonWindow {
        start,
        log_weights,
        tail_bound: up_tail + down_tail,
    })
}

/// Truncated Poisson(mean) probabilities as `(n, weight)` pairs.
///
/// The omitted tail mass is at most `ctl.rel_tol`.
pub fn poisson_weights(mean: f64, ctl: &SeriesCtl) -> Result<Vec<(usize, f64)>> {
    let w = poisson_window(mean, ctl.rel_tol, ctl.max_terms)?;
    Ok(w.iter().map(|(n, lw)| (n, lw.exp())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_mean() {
        let w = poisson_weights(0.0, &SeriesCtl::default()).unwrap();
        assert_eq!(w, vec![(0, 1.0)]);
    }

    #[test]
    fn normalised_within_tolerance() {
        for mean in [1e-3, 0.7, 1.0, 13.2, 50.0, 1e4, 1e6] {
            let ctl = SeriesCtl::new(1e-12, 1_000_000, 16).unwrap();
            let sum: f64 = poisson_weights(mean, &ctl).unwrap().iter().map(|x| x.1).sum();
            assert!(sum >= 1.0 - 1e-12 && sum <= 1.0 + 1e-13, "mean {mean}: sum {sum}");
        }
    }

    #[test]
    fn integer_mean_has_twin_modes() {
        let w = poisson_weights(50.0, &SeriesCtl::default()).unwrap();
        let get = |n| w.iter().find(|x| x.0 == n).unwrap().1;
        let (a, b) = (get(49), get(50));
        assert!((a - b).abs() <= 1e-14 * a);
        let max = w.iter().map(|x| x.1).fold(0.0, f64::max);
        assert!((max - b).abs() <= 1e-14 * b);
    }

    #[test]
    fn truncation_error_reports_tail() {
        let ctl = SeriesCtl::new(1e-10, 5, 16).unwrap();
        match poisson_weights(1e4, &ctl) {
            Err(Error::Truncation { tail, .. }) => assert!(tail > 0.0),
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn saddle_point_pmf_matches_direct_formula() {
        for (k, m) in [(3.0, 2.5), (40.0, 37.0), (1000.0, 1100.0), (0.5, 2.0)] {
            let direct = k * f64::ln(m) - m - ln_gamma_unchecked(k + 1.0);
            assert!((ln_dpois_raw(k, m) - direct).abs() < 1e-11, "k {k} m {m}");
        }
        // Gamma(shape) density against the textbook form.
        for (x, s) in [(0.3, 0.5), (2.0, 1.5), (50.0, 48.0)] {
            let direct = (s - 1.0) * f64::ln(x) - x - ln_gamma_unchecked(s);
            assert!((ln_dgamma(x, s) - direct).abs() < 1e-11);
        }
    }
}
