//! Exact samplers for the reduced and full chains, hitting-time simulation
//! and distributional consistency checks.

mod consistency;
mod hitting;
mod latent;
mod qdensity;

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::PriorSpec;
use crate::specfun::{RngStream, SeriesCtl};

pub use consistency::{
    dirichlet_per_x, ks_critical, ks_two_sample, pushforward_consistency, pushforward_ks, DirichletEstimate, KsOutcome,
    MetropolisPosterior,
};
pub use hitting::{hitting_times, supermartingale_probe, ProbeRow, SupermartingaleTable, SurvivalPoint};
pub use latent::ReducedKernel;
pub use qdensity::{QDensity, QTable};

/// Normalized `q(β | v)`.
pub fn reduced_q_density(beta: f64, v: f64, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<f64> {
    QDensity::new(v, spec, ctl)?.density(beta)
}

/// One inverse-CDF draw from `q(· | v)`. Builds the table on every call;
/// hold a [`QTable`] to draw repeatedly.
pub fn reduced_q_sample(v: f64, spec: &PriorSpec, rng: &mut RngStream, ctl: &SeriesCtl) -> Result<f64> {
    Ok(QTable::new(v, spec, ctl)?.sample(rng))
}

/// One exact transition of the reduced chain from `η`. Builds a
/// [`ReducedKernel`] on every call; hold one to step repeatedly.
pub fn reduced_step(eta: f64, spec: &PriorSpec, rng: &mut RngStream, ctl: &SeriesCtl) -> Result<f64> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::domain("reduced_step", format!("eta = {eta}")));
    }
    Ok(ReducedKernel::new(spec, ctl)?.step(eta, rng))
}

/// One exact transition of the full chain from `θ`.
pub fn full_step(theta: &[f64], spec: &PriorSpec, rng: &mut RngStream, ctl: &SeriesCtl) -> Result<Vec<f64>> {
    ReducedKernel::new(spec, ctl)?.full_step(theta, rng)
}

/// `θ + V` with `V ~ N(0, 2I)`.
pub fn random_walk_step(theta: &[f64], rng: &mut RngStream) -> Vec<f64> {
    theta
        .iter()
        .map(|t| t + std::f64::consts::SQRT_2 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

/// Starting point of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Start {
    /// Squared radius for the reduced chain, or a radius for the walk.
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub start: Start,
    /// Target set `[0, m)` for the reduced chain, ball radius for the walk.
    pub m: f64,
    pub n_paths: usize,
    pub max_steps: u64,
    pub master_seed: u64,
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::domain("PathConfig", format!("m = {} must be positive", self.m)));
        }
        if self.n_paths == 0 || self.max_steps == 0 {
            return Err(Error::domain("PathConfig", "n_paths and max_steps must be ≥ 1"));
        }
        let finite = match &self.start {
            Start::Scalar(x) => x.is_finite(),
            Start::Vector(v) => !v.is_empty() && v.iter().all(|x| x.is_finite()),
        };
        if !finite {
            return Err(Error::domain("PathConfig", "start must be finite and non-empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainKind {
    /// Reduced chain on `[0, ∞)` with target `[0, m)`.
    Reduced,
    /// Gaussian random walk with target the closed ball of radius `m`.
    Walk,
}

impl fmt::Display for ChainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainKind::Reduced => "reduced",
            ChainKind::Walk => "walk",
        })
    }
}

/// Outcome of a batch of hitting-time simulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingSummary {
    pub kind: ChainKind,
    pub n_paths: usize,
    pub max_steps: u64,
    pub hits: usize,
    pub censored: usize,
    pub hit_fraction: f64,
    /// Quartiles of the hitting step among paths that hit.
    pub quantiles: Option<[f64; 3]>,
    pub survival: Vec<SurvivalPoint>,
    /// First hitting step per path, `None` when censored.
    pub hit_steps: Vec<Option<u64>>,
}

/// A bounded function on `[0, ∞)`.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    bound: f64,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl TestFunction {
    pub fn new(name: impl Into<String>, bound: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(Error::domain("TestFunction", format!("bound = {bound}")));
        }
        Ok(Self {
            name: name.into(),
            bound,
            f: Arc::new(f),
        })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            name: format!("constant({c})"),
            bound: c.abs(),
            f: Arc::new(move |_| c),
        }
    }

    /// `a ↦ min(a, cap)`.
    pub fn capped(cap: f64) -> Self {
        Self {
            name: format!("min(a, {cap})"),
            bound: cap.abs(),
            f: Arc::new(move |a| a.min(cap)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Evaluate, failing if the value exceeds the declared bound.
    pub fn eval(&self, a: f64) -> Result<f64> {
        let y = (self.f)(a);
        if y.abs() <= self.bound {
            Ok(y)
        } else {
            Err(Error::domain("TestFunction", format!("{}: |h({a})| = {} exceeds bound {}", self.name, y.abs(), self.bound)))
        }
    }
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("name", &self.name).field("bound", &self.bound).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_step_histogram_matches_kernel_density() {
        use crate::specfun::{ncx2_pdf, quad::integrate_vec};
        let spec = PriorSpec::power(3, 1.0, 1.0);
        let ctl = SeriesCtl::default();
        let kernel = ReducedKernel::new(&spec, &ctl).unwrap();
        let lnw0 = latent::LnW0::new(&spec, &ctl).unwrap();
        let eta = 10.0;
        // bin edges from a pilot run on another stream
        let mut pilot: Vec<f64> = {
            let mut rng = RngStream::new(77, 1);
            (0..2_000).map(|_| kernel.step(eta, &mut rng)).collect()
        };
        pilot.sort_by(f64::total_cmp);
        let edges: [f64; 19] = std::array::from_fn(|i| pilot[(i + 1) * 100]);
        // bin probabilities: ∫ ncx2(v; 3, η)·Q([0, e] | v) dv
        let cdf_at_edges = |v: f64| -> [f64; 19] {
            let q = qdensity::QDensity::with_weights(v, &spec, &ctl, &lnw0).unwrap();
            let mut out = [0.0; 19];
            let mut lo = -40.0;
            let mut acc = 0.0;
            for (k, e) in edges.iter().enumerate() {
                let hi = e.ln();
                acc += integrate_vec(|u| [q.density(u.exp()).unwrap() * u.exp()], lo, hi, &ctl.quad(1e-12), "bin").unwrap().value[0];
                out[k] = acc;
                lo = hi;
            }
            out
        };
        let cdf = integrate_vec(
            |v| {
                if v <= 0.0 {
                    return [0.0; 19];
                }
                let w = ncx2_pdf(v, 3, eta, &ctl).unwrap();
                cdf_at_edges(v).map(|c| c * w)
            },
            0.0,
            200.0,
            &ctl.quad(1e-9),
            "outer",
        )
        .unwrap()
        .value;
        let mut probs = vec![cdf[0]];
        probs.extend(cdf.windows(2).map(|w| w[1] - w[0]));
        probs.push(1.0 - cdf[18]);
        let n = 100_000;
        let mut counts = [0usize; 20];
        let mut rng = RngStream::new(77, 0);
        for _ in 0..n {
            let beta = kernel.step(eta, &mut rng);
            counts[edges.partition_point(|&e| e < beta)] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&probs)
            .map(|(&o, &p)| {
                let e = p * n as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        // 99th percentile of chi-square with 19 degrees of freedom
        assert!(chi2 < 36.19, "chi2 = {chi2}, probs = {probs:?}, counts = {counts:?}");
    }

    #[test]
    fn walk_step_has_variance_two() {
        let mut rng = RngStream::new(1, 0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| random_walk_step(&[0.0], &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // var of the sample variance of N(0, 2) is 2σ⁴/(n−1)
        let se = (2.0 * 4.0 / (n - 1) as f64).sqrt();
        assert!((var - 2.0).abs() < 3.0 * se, "{var}");
        assert!(mean.abs() < 3.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn walk_step_is_reproducible() {
        let mut r1 = RngStream::new(5, 3);
        let mut r2 = RngStream::new(5, 3);
        let mut a = vec![1.0, 2.0, 3.0];
        let mut b = a.clone();
        for _ in 0..100 {
            a = random_walk_step(&a, &mut r1);
            b = random_walk_step(&b, &mut r2);
        }
        assert_eq!(a, b);
    }

    #[test]
    fn test_function_enforces_bound() {
        let h = TestFunction::capped(1.0);
        assert_eq!(h.eval(0.3).unwrap(), 0.3);
        assert_eq!(h.eval(7.0).unwrap(), 1.0);
        let bad = TestFunction::new("id", 1.0, |a| a).unwrap();
        assert!(bad.eval(2.0).is_err());
        assert!(TestFunction::new("x", f64::NAN, |a| a).is_err());
    }

    #[test]
    fn path_config_validation() {
        let mut cfg = PathConfig {
            start: Start::Scalar(5.0),
            m: 1.0,
            n_paths: 10,
            max_steps: 10,
            master_seed: 0,
        };
        assert!(cfg.validate().is_ok());
        cfg.m = 0.0;
        assert!(cfg.validate().is_err());
        cfg.m = 1.0;
        cfg.n_paths = 0;
        assert!(cfg.validate().is_err());
        cfg.n_paths = 1;
        cfg.start = Start::Vector(vec![]);
        assert!(cfg.validate().is_err());
    }
}
