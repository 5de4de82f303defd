//! Exact sampler for the reduced posterior `q(β | v)`.
//!
//! Given `‖x‖² = v`, `β` is a mixture over a latent index `n` with
//! probabilities `∝ Poisson(n; v/2)·w₀(n)` of `g₀`-tilted Gamma(n + p/2, scale 2)
//! laws. The index is drawn by rejection under a two-line exponential envelope
//! (valid because `ln[Poisson(n)·w₀(n)]` is concave in `n` beyond a small
//! prior-dependent cutoff), the component by rejection from a Gamma proposal.
//! Both steps cost O(1) in `v`.
//!
//! For `a > 0` and large `v` a cheaper route proposes `β′ ~ χ'²(p, v)` and
//! accepts with `g₀(β′)/g₀(c)`, where `c` lies so far in the lower tail of the
//! norm `‖x‖` that Gaussian concentration bounds the neglected mass on
//! `[0, c)` by `e^{−45}` relative, below double-precision resolution. The
//! direct index sampler truncates at the same level.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::appendix::WeightTable;
use crate::error::{Error, Result};
use crate::prior::PriorSpec;
use crate::specfun::{ln_dpois_raw, ln_gamma_ratio, ncx2_sample, RngStream, SeriesCtl};

/// Largest index checked numerically for concavity; beyond it the Poisson
/// curvature `−1/n` dominates the `O(b/n²)` curvature of `ln w₀`.
const CONCAVITY_CHECK: usize = 100_000;
/// Envelope mass below this many nats of the peak is dropped by the direct sampler.
const DIRECT_DROP: f64 = 45.0;
/// Smallest `v/2` handled by the envelope sampler.
const ENVELOPE_MIN_MEAN: f64 = 16.0;
/// Smallest expected acceptance for which the tail-cut proposal is used.
const TAIL_CUT_MIN_ACCEPT: f64 = 0.6;

/// Cut point `c` for the tail-cut proposal at `v`, or `None` if the
/// acceptance would be poor. With `t` chosen so that
/// `e^{−t²/2}·g₀(0)/g₀(c′) ≤ e^{−45}/2`, where `c′ = (√(v+p) + t)²` bounds the
/// upper tail the same way, the mass of `g₀·χ'²` below `c = (√v − t)²` is at
/// most `e^{−45}` of the total.
fn tail_cut(v: f64, p: f64, a: f64, b: f64) -> Option<f64> {
    let mut t: f64 = 30.0;
    for _ in 0..3 {
        let upper = ((v + p).sqrt() + t).powi(2);
        t = (2.0 * (45.0 + 2.0 * std::f64::consts::LN_2 + b * (upper / a).ln_1p())).sqrt();
    }
    let root = v.sqrt() - t;
    if root <= 0.0 {
        return None;
    }
    let c = root * root;
    // acceptance ≈ g₀(v)/g₀(c)
    let accept = ((a + c) / (a + v)).powf(b);
    (accept >= TAIL_CUT_MIN_ACCEPT).then_some(c)
}

/// `ln w₀(n)` for every `n`: quadrature table below `table_len`, the
/// expansion of `E[(a + Z)^{−b}]` in powers of `a/Z` above it.
#[derive(Debug, Clone)]
pub(crate) struct LnW0 {
    half_p: f64,
    a: f64,
    b: f64,
    table: Vec<f64>,
}

impl LnW0 {
    pub(crate) fn new(spec: &PriorSpec, ctl: &SeriesCtl) -> Result<Self> {
        let (half_p, a, b) = (spec.half_p(), spec.a(), spec.b());
        let table = if a == 0.0 {
            Vec::new()
        } else {
            let len = (40.0 * (a + b + 1.0) + 20.0 + b).ceil() as usize;
            let anchor = crate::appendix::w_k(0, 0, spec, ctl)?.ln_abs;
            let rel = WeightTable::new(spec, 0, len - 1, ctl)?;
            (0..len).map(|n| anchor + rel.ln_w0(n)).collect()
        };
        Ok(Self { half_p, a, b, table })
    }

    fn series(&self, s: f64) -> f64 {
        // ln(1 + Σ_k C(−b, k)(a/2)^k Γ(s − b − k)/Γ(s − b))
        let h = 0.5 * self.a;
        let (mut c, mut acc) = (1.0, 0.0);
        for k in 1..=40 {
            let kf = k as f64;
            c *= -(self.b + kf - 1.0) / kf * h / (s - self.b - kf);
            acc += c;
            if c.abs() < 1e-17 * (1.0 + acc.abs()) {
                break;
            }
        }
        acc.ln_1p()
    }

    pub(crate) fn ln_w0(&self, n: usize) -> f64 {
        if let Some(&v) = self.table.get(n) {
            return v;
        }
        let s = n as f64 + self.half_p;
        let base = -self.b * std::f64::consts::LN_2 + ln_gamma_ratio(s, -self.b);
        if self.a == 0.0 {
            base
        } else {
            base + self.series(s)
        }
    }

    /// `ln w₀(n + 1) − ln w₀(n)`.
    pub(crate) fn ln_ratio(&self, n: usize) -> f64 {
        if n + 1 < self.table.len() {
            return self.table[n + 1] - self.table[n];
        }
        if n < self.table.len() {
            return self.ln_w0(n + 1) - self.ln_w0(n);
        }
        let s = n as f64 + self.half_p;
        let base = (-self.b / s).ln_1p();
        if self.a == 0.0 {
            base
        } else {
            base + self.series(s + 1.0) - self.series(s)
        }
    }

    #[cfg(test)]
    pub(crate) fn table_len(&self) -> usize {
        self.table.len()
    }
}

/// One-step exact sampler for the reduced chain and the reduced posterior.
#[derive(Debug, Clone)]
pub struct ReducedKernel {
    spec: PriorSpec,
    lnw0: LnW0,
    /// `ln[Poisson(n)·w₀(n)]` is concave on `n ≥ concave_from`.
    concave_from: usize,
}

impl ReducedKernel {
    pub fn new(spec: &PriorSpec, ctl: &SeriesCtl) -> Result<Self> {
        spec.require_valid("reduced_step")?;
        let lnw0 = LnW0::new(spec, ctl)?;
        let mut concave_from = 0;
        let mut prev = lnw0.ln_ratio(0);
        for j in 0..CONCAVITY_CHECK {
            let next = lnw0.ln_ratio(j + 1);
            // second difference of ln Poisson(n) + ln w₀(n) at j
            let d2 = -((j + 2) as f64 / (j + 1) as f64).ln() + next - prev;
            if d2 > 0.0 {
                concave_from = j + 1;
            }
            prev = next;
        }
        if concave_from > 1000 {
            return Err(Error::Sampler {
                op: "reduced_step",
                detail: format!("index log-weights not concave until n = {concave_from}"),
            });
        }
        Ok(Self {
            spec: *spec,
            lnw0,
            concave_from,
        })
    }

    pub fn spec(&self) -> &PriorSpec {
        &self.spec
    }

    fn ln_target(&self, n: usize, lambda: f64) -> f64 {
        ln_dpois_raw(n as f64, lambda) + self.lnw0.ln_w0(n)
    }

    fn diff(&self, n: usize, ln_lambda: f64) -> f64 {
        ln_lambda - ((n + 1) as f64).ln() + self.lnw0.ln_ratio(n)
    }

    /// Latent index `n` with probability `∝ Poisson(n; v/2)·w₀(n)`.
    pub fn sample_index(&self, v: f64, rng: &mut RngStream) -> usize {
        let lambda = 0.5 * v;
        if lambda == 0.0 {
            return 0;
        }
        let ln_lambda = lambda.ln();
        let nc = self.concave_from;
        // approximate mode: λ·w₀(n+1)/w₀(n) = n + 1
        let guess = (lambda - self.spec.b() - 1.0).max(0.0).round() as usize;
        let d = lambda.sqrt().round().max(1.0) as usize;
        if lambda < ENVELOPE_MIN_MEAN || guess < nc + 1 + d {
            return self.sample_index_direct(lambda, rng);
        }
        let kl = guess - d;
        let mut kr = guess + d;
        let sl = self.diff(kl - 1, ln_lambda);
        let mut sr = self.diff(kr, ln_lambda);
        while sr >= -1e-12 {
            kr += d;
            sr = self.diff(kr, ln_lambda);
        }
        let ll = self.ln_target(kl, lambda);
        let lr = self.ln_target(kr, lambda);
        let line_l = |n: f64| ll + (n - kl as f64) * sl;
        let line_r = |n: f64| lr + (n - kr as f64) * sr;
        // the left line covers [nc, split], the right line (split, ∞)
        let split = if sl > sr {
            let x = (lr - ll + kl as f64 * sl - kr as f64 * sr) / (sl - sr);
            (x.floor().max(nc as f64 - 1.0)) as i64
        } else {
            nc as i64 - 1
        };
        let top = ll.max(lr);
        let width = split + 1 - nc as i64;
        let mass_l = if width <= 0 {
            0.0
        } else {
            (line_l(split as f64) - top).exp() * geometric_sum(sl, width as u64)
        };
        let mass_r = (line_r((split + 1) as f64) - top).exp() / -(sr.exp_m1());
        // for n < nc use w₀(n) ≤ w₀(0)
        let w00 = self.lnw0.ln_w0(0);
        let low: Vec<f64> = (0..nc).map(|n| (ln_dpois_raw(n as f64, lambda) + w00 - top).exp()).collect();
        let mass_0: f64 = low.iter().sum();
        let total = mass_0 + mass_l + mass_r;
        loop {
            let u = rng.random::<f64>() * total;
            let (n, env) = if u < mass_0 {
                let mut acc = 0.0;
                let mut pick = nc.saturating_sub(1);
                for (i, w) in low.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                (pick, ln_dpois_raw(pick as f64, lambda) + w00)
            } else if u < mass_0 + mass_l {
                // counts down from split with ratio e^{−sl}
                let j = truncated_geometric(-sl, width as u64, rng);
                let n = split as u64 - j;
                (n as usize, line_l(n as f64))
            } else {
                let j = truncated_geometric(sr, u64::MAX, rng);
                let n = (split + 1) as u64 + j;
                (n as usize, line_r(n as f64))
            };
            let accept = (self.ln_target(n, lambda) - env).exp();
            debug_assert!(accept <= 1.0 + 1e-9, "envelope violated at n = {n}: {accept}");
            if rng.random::<f64>() < accept {
                return n;
            }
        }
    }

    /// Inversion over the explicitly normalized index weights; used for small `v/2`.
    fn sample_index_direct(&self, lambda: f64, rng: &mut RngStream) -> usize {
        let mut logs = Vec::new();
        let mut top = f64::NEG_INFINITY;
        let mut n = 0usize;
        loop {
            let l = self.ln_target(n, lambda);
            top = top.max(l);
            logs.push(l);
            if n as f64 > lambda && l < top - DIRECT_DROP {
                break;
            }
            n += 1;
        }
        let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                return i;
            }
            u -= w;
        }
        weights.len() - 1
    }

    /// Draw from the tilted Gamma component with shape `n + p/2`.
    pub fn sample_component(&self, n: usize, rng: &mut RngStream) -> f64 {
        let s = n as f64 + self.spec.half_p();
        let (a, b) = (self.spec.a(), self.spec.b());
        if b == 0.0 {
            return gamma(s, rng);
        }
        if a == 0.0 {
            return gamma(s - b, rng);
        }
        // proposal Gamma(s − b) accepts with (z/(a+z))^b; Gamma(s) with (a/(a+z))^b
        let shifted = s > b && (2.0 * (s - b)) / (a + 2.0 * (s - b)) >= a / (a + 2.0 * s);
        loop {
            let (z, ln_acc) = if shifted {
                let z = gamma(s - b, rng);
                (z, -b * (a / z).ln_1p())
            } else {
                let z = gamma(s, rng);
                (z, -b * (z / a).ln_1p())
            };
            if z > 0.0 && rng.random::<f64>().ln() < ln_acc {
                return z;
            }
        }
    }

    /// `β ~ q(· | v)`.
    pub fn sample_beta(&self, v: f64, rng: &mut RngStream) -> f64 {
        if self.spec.is_flat() {
            return ncx2_sample(self.spec.p, v, rng);
        }
        let (a, b) = (self.spec.a(), self.spec.b());
        if a > 0.0 {
            if let Some(c) = tail_cut(v, self.spec.p as f64, a, b) {
                let ln_gc = -b * (a + c).ln();
                loop {
                    let beta = ncx2_sample(self.spec.p, v, rng);
                    if beta <= c || rng.random::<f64>().ln() < -b * (a + beta).ln() - ln_gc {
                        return beta;
                    }
                }
            }
        }
        self.sample_beta_by_index(v, rng)
    }

    /// `β ~ q(· | v)` through the latent index, for every `v`.
    pub fn sample_beta_by_index(&self, v: f64, rng: &mut RngStream) -> f64 {
        let n = self.sample_index(v, rng);
        self.sample_component(n, rng)
    }

    /// One exact transition of the reduced chain from `η`.
    pub fn step(&self, eta: f64, rng: &mut RngStream) -> f64 {
        let v = ncx2_sample(self.spec.p, eta, rng);
        self.sample_beta(v, rng)
    }

    /// One exact transition of the full chain from `θ`.
    pub fn full_step(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        if theta.len() != self.spec.p as usize {
            return Err(Error::domain(
                "full_step",
                format!("theta has length {}, expected {}", theta.len(), self.spec.p),
            ));
        }
        let x: Vec<f64> = theta.iter().map(|t| t + rng.sample::<f64, _>(StandardNormal)).collect();
        let v: f64 = x.iter().map(|c| c * c).sum();
        let beta = self.sample_beta(v, rng);
        let r = beta.sqrt();
        let omega = if v > 0.0 {
            let norm = v.sqrt();
            let dir: Vec<f64> = x.iter().map(|c| c / norm).collect();
            crate::specfun::vmf_direction(&dir, r * norm, rng)?
        } else {
            crate::specfun::sphere_uniform(x.len(), rng)
        };
        Ok(omega.into_iter().map(|w| r * w).collect())
    }
}

/// Gamma(shape, scale 2).
fn gamma(shape: f64, rng: &mut RngStream) -> f64 {
    Gamma::new(shape, 2.0).expect("positive shape").sample(rng)
}

/// `Σ_{j<len} e^{−rate·j}` for `rate` of either sign.
fn geometric_sum(rate: f64, len: u64) -> f64 {
    if rate.abs() < 1e-300 {
        return len as f64;
    }
    -(-rate * len as f64).exp_m1() / -(-rate).exp_m1()
}

/// `j ∈ [0, len)` with probability `∝ e^{slope·j}`.
fn truncated_geometric(slope: f64, len: u64, rng: &mut RngStream) -> u64 {
    if slope > 0.0 {
        return len - 1 - truncated_geometric(-slope, len, rng);
    }
    let u: f64 = rng.random();
    if slope.abs() < 1e-300 {
        return ((u * len as f64) as u64).min(len - 1);
    }
    // invert (1 − e^{slope·j})/(1 − e^{slope·len})
    let span = if len == u64::MAX { -1.0 } else { (slope * len as f64).exp_m1() };
    let j = ((u * span).ln_1p() / slope).floor();
    (j.max(0.0) as u64).min(len.saturating_sub(1))
}
