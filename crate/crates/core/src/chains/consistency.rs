//! Two-sample checks that the full posterior pushed through `θ ↦ ‖θ‖²`
//! matches the reduced posterior.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::qdensity::QTable;
use super::TestFunction;
use crate::error::{Error, Result};
use crate::prior::PriorSpec;
use crate::specfun::{RngStream, SeriesCtl};

pub const DEFAULT_BURN_IN: usize = 1_000;
pub const DEFAULT_THIN: usize = 10;
const MIN_ACCEPTANCE: f64 = 1e-3;

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> f64 {
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample critical value `c(α)·√((n + m)/(n·m))`,
/// `c(α) = √(−ln(α/2)/2)`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(0.5 * alpha).ln() / 2.0).sqrt();
    let (n, m) = (n as f64, m as f64);
    c * ((n + m) / (n * m)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
    /// `statistic > critical`.
    pub reject: bool,
    pub acceptance_rate: f64,
}

/// Independence Metropolis sampler for `Q(dθ | x) ∝ N(θ; x, I)·g₀(‖θ‖²)`
/// with proposal `N(x, I)`.
#[derive(Debug, Clone)]
pub struct MetropolisPosterior {
    x: Vec<f64>,
    spec: PriorSpec,
    pub burn_in: usize,
    pub thin: usize,
}

impl MetropolisPosterior {
    pub fn new(x: &[f64], spec: &PriorSpec) -> Result<Self> {
        spec.require_valid("pushforward_consistency")?;
        if x.len() != spec.p as usize || !x.iter().all(|c| c.is_finite()) {
            return Err(Error::domain("pushforward_consistency", format!("x must be a finite {}-vector", spec.p)));
        }
        Ok(Self {
            x: x.to_vec(),
            spec: *spec,
            burn_in: DEFAULT_BURN_IN,
            thin: DEFAULT_THIN,
        })
    }

    /// `n` thinned draws of `‖θ‖²` and the acceptance rate.
    pub fn squared_norms(&self, n: usize, rng: &mut RngStream) -> Result<(Vec<f64>, f64)> {
        let propose = |rng: &mut RngStream| -> f64 {
            self.x
                .iter()
                .map(|c| {
                    let t = c + rng.sample::<f64, _>(StandardNormal);
                    t * t
                })
                .sum()
        };
        let mut z = propose(rng);
        let mut ln_g = self.spec.ln_g0(z);
        let total = self.burn_in + n * self.thin;
        let mut accepted = 0usize;
        let mut out = Vec::with_capacity(n);
        for it in 0..total {
            let z_new = propose(rng);
            let ln_g_new = self.spec.ln_g0(z_new);
            if ln_g_new >= ln_g || rng.random::<f64>().ln() < ln_g_new - ln_g {
                z = z_new;
                ln_g = ln_g_new;
                accepted += 1;
            }
            if it >= self.burn_in && (it - self.burn_in + 1) % self.thin == 0 {
                out.push(z);
            }
        }
        let rate = accepted as f64 / total as f64;
        if rate < MIN_ACCEPTANCE {
            return Err(Error::Sampler {
                op: "pushforward_consistency",
                detail: format!("Metropolis acceptance rate {rate:e} below {MIN_ACCEPTANCE:e}"),
            });
        }
        Ok((out, rate))
    }
}

/// KS comparison of `‖θ‖²`, `θ ~ Q(· | x)` under `theta_spec`, against
/// `β ~ q(· | ‖x‖²)` under `beta_spec`, `n` draws each, at `α = 0.01`.
pub fn pushforward_ks(
    x: &[f64],
    n: usize,
    theta_spec: &PriorSpec,
    beta_spec: &PriorSpec,
    rng: &mut RngStream,
    ctl: &SeriesCtl,
) -> Result<KsOutcome> {
    if n == 0 {
        return Err(Error::domain("pushforward_consistency", "n must be ≥ 1"));
    }
    let (norms, acceptance_rate) = MetropolisPosterior::new(x, theta_spec)?.squared_norms(n, rng)?;
    let v: f64 = x.iter().map(|c| c * c).sum();
    let table = QTable::new(v, beta_spec, ctl)?;
    let betas: Vec<f64> = (0..n).map(|_| table.sample(rng)).collect();
    let statistic = ks_two_sample(&norms, &betas);
    let critical = ks_critical(n, n, 0.01);
    Ok(KsOutcome {
        statistic,
        critical,
        reject: statistic > critical,
        acceptance_rate,
    })
}

/// [`pushforward_ks`] with the same prior on both sides.
pub fn pushforward_consistency(
    x: &[f64],
    n: usize,
    spec: &PriorSpec,
    rng: &mut RngStream,
    ctl: &SeriesCtl,
) -> Result<KsOutcome> {
    pushforward_ks(x, n, spec, spec, rng, ctl)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletEstimate {
    pub full: f64,
    pub full_se: f64,
    pub reduced: f64,
    pub reduced_se: f64,
}

impl DirichletEstimate {
    /// `|full − reduced|` in units of the combined standard error.
    pub fn z_score(&self) -> f64 {
        let se = self.full_se.hypot(self.reduced_se);
        if se > 0.0 {
            (self.full - self.reduced).abs() / se
        } else if self.full == self.reduced {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Estimates of `E[(h̃(‖θ‖²) − h̃(‖θ′‖²))²]`, `θ, θ′` independent from
/// `Q(· | x)`, and of `E[(h̃(a) − h̃(a′))²]`, `a, a′` independent from
/// `q(· | ‖x‖²)`, `n` pairs each.
pub fn dirichlet_per_x(
    h: &TestFunction,
    x: &[f64],
    n: usize,
    spec: &PriorSpec,
    rng: &mut RngStream,
    ctl: &SeriesCtl,
) -> Result<DirichletEstimate> {
    if n < 2 {
        return Err(Error::domain("dirichlet_per_x", "n must be ≥ 2"));
    }
    let sampler = MetropolisPosterior::new(x, spec)?;
    let (t1, _) = sampler.squared_norms(n, rng)?;
    let (t2, _) = sampler.squared_norms(n, rng)?;
    let v: f64 = x.iter().map(|c| c * c).sum();
    let table = QTable::new(v, spec, ctl)?;
    let mut full = Vec::with_capacity(n);
    for (a, b) in t1.iter().zip(&t2) {
        full.push((h.eval(*a)? - h.eval(*b)?).powi(2));
    }
    let mut reduced = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b) = (table.sample(rng), table.sample(rng));
        reduced.push((h.eval(a)? - h.eval(b)?).powi(2));
    }
    let (full, full_se) = mean_se(&full);
    let (reduced, reduced_se) = mean_se(&reduced);
    Ok(DirichletEstimate {
        full,
        full_se,
        reduced,
        reduced_se,
    })
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
