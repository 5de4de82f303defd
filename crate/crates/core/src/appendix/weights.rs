use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::prior::PriorSpec;
use crate::specfun::quad::integrate_vec;
use crate::specfun::{ln_gamma_unchecked, poisson_window, SeriesCtl};

/// Log-integrand drop (in nats) at which the integration range is cut.
const SUPPORT_DROP: f64 = 60.0;

/// The log-concave integrand `x ↦ shape·x − eˣ − b·ln(a + 2eˣ)` obtained from
/// `∫ g₀(z)(z/2)^{shape−1} e^{−z/2} dz` under `z = 2eˣ`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TiltedGamma {
    pub shape: f64,
    pub a: f64,
    pub b: f64,
}

impl TiltedGamma {
    pub fn ln_f(&self, x: f64) -> f64 {
        let u = x.exp();
        self.shape * x - u - self.b * (self.a + 2.0 * u).ln()
    }

    /// Location of the maximum, from the quadratic `2u² + Bu − shape·a = 0` in `u = eˣ`.
    pub fn peak(&self) -> f64 {
        let (s, a, b) = (self.shape, self.a, self.b);
        let big_b = a + 2.0 * b - 2.0 * s;
        let c = s * a;
        let disc = (big_b * big_b + 8.0 * c).sqrt();
        let u = if big_b > 0.0 {
            2.0 * c / (big_b + disc)
        } else {
            (disc - big_b) / 4.0
        };
        if u > 0.0 {
            u.ln()
        } else {
            // a = 0 and shape ≤ b: the integrand increases towards −∞
            f64::NEG_INFINITY
        }
    }

    pub fn curvature(&self, x: f64) -> f64 {
        let u = x.exp();
        let d = self.a + 2.0 * u;
        u + 2.0 * self.b * self.a * u / (d * d)
    }

    /// Interval outside of which the integrand is below `e^{−60}` of its peak.
    pub fn support(&self) -> Result<(f64, f64, f64)> {
        let x0 = self.peak();
        if !x0.is_finite() {
            return Err(Error::domain(
                "tilted_gamma",
                format!("integrand not integrable at 0 (shape = {}, b = {})", self.shape, self.b),
            ));
        }
        let l0 = self.ln_f(x0);
        let sigma = 1.0 / self.curvature(x0).sqrt();
        let edge = |dir: f64| {
            let mut h = sigma;
            while self.ln_f(x0 + dir * h) > l0 - SUPPORT_DROP && h < 1e4 {
                h *= 2.0;
            }
            let (mut lo, mut hi) = (0.5 * h, h);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if self.ln_f(x0 + dir * mid) > l0 - SUPPORT_DROP {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            x0 + dir * hi
        };
        Ok((edge(-1.0), edge(1.0), l0))
    }
}

/// `φ(n)`: ratio of `∫ κ(z)g₀(z)(z/2)^{s−1}e^{−z/2}dz` to the same integral
/// without `κ(z) = ab/(a+z)`, with `s = n + p/2`. Both share one grid.
pub(crate) fn phi_quadrature(n: usize, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<f64> {
    let (a, b) = (spec.a(), spec.b());
    if a == 0.0 {
        return Ok(0.0);
    }
    let tg = TiltedGamma {
        shape: n as f64 + spec.half_p(),
        a,
        b,
    };
    let (lo, hi, l0) = tg.support()?;
    let est = integrate_vec(
        |x| {
            let d = (tg.ln_f(x) - l0).exp();
            [d, d * a * b / (a + 2.0 * x.exp())]
        },
        lo,
        hi,
        &ctl.quad(0.0),
        "phi",
    )?;
    Ok(est.value[1] / est.value[0])
}

/// `ln w_k(n)` by quadrature of the defining integral.
pub(crate) fn ln_w_quadrature(n: usize, k: u32, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<f64> {
    let s = n as f64 + spec.half_p();
    let tg = TiltedGamma {
        shape: s + k as f64,
        a: spec.a(),
        b: spec.b(),
    };
    let (lo, hi, l0) = tg.support()?;
    let est = integrate_vec(|x| [(tg.ln_f(x) - l0).exp()], lo, hi, &ctl.quad(0.0), "w_k")?;
    Ok(l0 + est.value[0].ln() - ln_gamma_unchecked(s))
}

/// `φ(n)` and `ln w₀(n)` (up to a common additive constant) on `[start, end]`.
///
/// The relative log-weights are built from `w₀(n+1)/w₀(n) = (s − b + φ(n))/s`,
/// so any two entries of one table are mutually consistent.
#[derive(Debug, Clone)]
pub struct WeightTable {
    half_p: f64,
    b: f64,
    start: usize,
    phi: Vec<f64>,
    ln_w0: Vec<f64>,
}

impl WeightTable {
    pub fn new(spec: &PriorSpec, start: usize, end: usize, ctl: &SeriesCtl) -> Result<Self> {
        if end < start {
            return Err(Error::domain("WeightTable", format!("empty range [{start}, {end}]")));
        }
        // φ is needed up to end + 2 for the third ratio
        let phi: Vec<f64> = if spec.a() == 0.0 {
            vec![0.0; end - start + 3]
        } else {
            (start..=end + 2)
                .into_par_iter()
                .map(|n| phi_quadrature(n, spec, ctl))
                .collect::<Result<_>>()?
        };
        let (half_p, b) = (spec.half_p(), spec.b());
        let mut ln_w0 = Vec::with_capacity(end - start + 1);
        let mut acc = 0.0;
        ln_w0.push(acc);
        for i in 0..end - start {
            let s = (start + i) as f64 + half_p;
            acc += ((phi[i] - b) / s).ln_1p();
            ln_w0.push(acc);
        }
        Ok(Self {
            half_p,
            b,
            start,
            phi,
            ln_w0,
        })
    }

    /// Table covering every Poisson window with mean in `[mean_lo, mean_hi]`.
    pub fn for_means(spec: &PriorSpec, mean_lo: f64, mean_hi: f64, ctl: &SeriesCtl) -> Result<Self> {
        let tol = window_tol(ctl);
        let lo = poisson_window(mean_lo, tol, ctl.max_terms)?.start;
        let hi = poisson_window(mean_hi, tol, ctl.max_terms)?.end();
        Self::new(spec, lo, hi, ctl)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Last index with a log-weight.
    pub fn end(&self) -> usize {
        self.start + self.ln_w0.len() - 1
    }

    pub fn phi(&self, n: usize) -> f64 {
        self.phi[n - self.start]
    }

    pub fn ln_w0(&self, n: usize) -> f64 {
        self.ln_w0[n - self.start]
    }

    /// `w_k(n)/w_{k−1}(n) = n + p/2 + k − 1 − b + φ(n + k − 1)`, for `k ∈ {1,2,3}`.
    pub fn t(&self, k: usize, n: usize) -> f64 {
        n as f64 + self.half_p + (k as f64 - 1.0) - self.b + self.phi(n + k - 1)
    }

    /// `ln w_k(n)` relative to the table's anchor.
    pub fn ln_w(&self, k: usize, n: usize) -> f64 {
        let mut acc = self.ln_w0(n);
        for j in 1..=k {
            acc += self.t(j, n).ln();
        }
        acc
    }

    /// `ln(Poisson(n; y/2)·w₀(n))` over the window for `y`, clipped to the table.
    fn log_mixture(&self, y: f64, ctl: &SeriesCtl, op: &'static str) -> Result<(Vec<(usize, f64)>, f64)> {
        let window = poisson_window(0.5 * y, window_tol(ctl), ctl.max_terms)?;
        let lo = window.start.max(self.start);
        let hi = window.end().min(self.end());
        if lo > hi {
            return Err(Error::domain(
                op,
                format!("y = {y} outside the table range [{}, {}]", self.start, self.end()),
            ));
        }
        let terms: Vec<(usize, f64)> = window
            .iter()
            .filter(|&(n, _)| n >= lo && n <= hi)
            .map(|(n, lp)| (n, lp + self.ln_w0(n)))
            .collect();
        let top = terms.iter().map(|&(_, l)| l).fold(f64::NEG_INFINITY, f64::max);
        Ok((terms, top))
    }

    /// Mixing weights `ω_n(y) ∝ Poisson(n; y/2)·w₀(n)` of the posterior of `β`
    /// given `‖x‖² = y`, normalized to sum to one.
    pub fn mixture_weights(&self, y: f64, ctl: &SeriesCtl) -> Result<Vec<(usize, f64)>> {
        let (terms, top) = self.log_mixture(y, ctl, "mixture_weights")?;
        let mut out: Vec<(usize, f64)> = terms.into_iter().map(|(n, l)| (n, (l - top).exp())).collect();
        let total: f64 = out.iter().map(|&(_, w)| w).sum();
        for e in &mut out {
            e.1 /= total;
        }
        Ok(out)
    }

    /// `Σ_n ω_n(y)·values[n − start]`.
    pub fn mixture_average(&self, y: f64, values: &[f64], ctl: &SeriesCtl) -> Result<f64> {
        let (terms, top) = self.log_mixture(y, ctl, "mixture_average")?;
        let (mut num, mut den) = (0.0, 0.0);
        for (n, l) in terms {
            let w = (l - top).exp();
            num += w * values[n - self.start];
            den += w;
        }
        Ok(num / den)
    }

    /// Centered ratios `e_k(y) = E[w_k(N)|y]/E[w_{k−1}(N)|y] − y/2`, `k = 1, 2, 3`,
    /// with `N ~ Poisson(y/2)`.
    pub fn centered_ratios(&self, y: f64, ctl: &SeriesCtl) -> Result<[f64; 3]> {
        let half_y = 0.5 * y;
        let (log_terms, top) = self.log_mixture(y, ctl, "centered_ratios")?;
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        let (mut e1, mut e2, mut e3) = (0.0, 0.0, 0.0);
        let base = self.half_p - self.b;
        for (n, l) in log_terms {
            let w0 = (l - top).exp();
            let dn = n as f64 - half_y;
            let d1 = dn + base + self.phi(n);
            let d2 = dn + base + 1.0 + self.phi(n + 1);
            let d3 = dn + base + 2.0 + self.phi(n + 2);
            let w1 = w0 * (d1 + half_y);
            let w2 = w1 * (d2 + half_y);
            s0 += w0;
            s1 += w1;
            s2 += w2;
            e1 += w0 * d1;
            e2 += w1 * d2;
            e3 += w2 * d3;
        }
        Ok([e1 / s0, e2 / s1, e3 / s2])
    }
}

/// Poisson tail tolerance for weight windows; tighter than `rel_tol` because
/// the weights are tilted by `w_k`, which grows polynomially in `n`.
pub(crate) fn window_tol(ctl: &SeriesCtl) -> f64 {
    (ctl.rel_tol * 1e-6).max(1e-300)
}
