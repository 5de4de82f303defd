//! The reduced posterior density `q(β | v)` and a tabulated inverse-CDF sampler.

use rand::Rng;

use super::latent::LnW0;
use crate::error::{Error, Result};
use crate::prior::PriorSpec;
use crate::specfun::{ln_ncx2_pdf_raw, poisson_window, RngStream, SeriesCtl};

/// Nats below the peak at which the tabulated support is cut.
const TABLE_DROP: f64 = 45.0;
/// `β` below `e^{LN_BETA_FLOOR}` is not tabulated.
const LN_BETA_FLOOR: f64 = -700.0;
const MAX_INTERVALS: usize = 200_000;

/// Ten-point Gauss–Legendre nodes and weights on `[−1, 1]`.
const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// `q(· | v)` with its normalizer cached.
///
/// `q(β | v) ∝ g₀(β)·χ'²(β; p, v)`, the noncentral chi-square density in `β`
/// with noncentrality `v`; equivalently `g₀(β)β^{p/2−1}` times the
/// noncentral chi-square density of `v` with noncentrality `β`. The
/// normalizer is `Σ_n Poisson(n; v/2)·w₀(n)`.
#[derive(Debug, Clone)]
pub struct QDensity {
    spec: PriorSpec,
    v: f64,
    ln_norm: f64,
    ctl: SeriesCtl,
}

impl QDensity {
    pub fn new(v: f64, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<Self> {
        spec.require_valid("reduced_q_density")?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain("reduced_q_density", format!("v = {v} must be positive")));
        }
        let lnw0 = LnW0::new(spec, ctl)?;
        Self::with_weights(v, spec, ctl, &lnw0)
    }

    pub(crate) fn with_weights(v: f64, spec: &PriorSpec, ctl: &SeriesCtl, lnw0: &LnW0) -> Result<Self> {
        let window = poisson_window(0.5 * v, 1e-3 * ctl.rel_tol, ctl.max_terms)?;
        let terms: Vec<f64> = window.iter().map(|(n, lp)| lp + lnw0.ln_w0(n)).collect();
        let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ln_norm = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
        Ok(Self {
            spec: *spec,
            v,
            ln_norm,
            ctl: *ctl,
        })
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn ln_density(&self, beta: f64) -> Result<f64> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain("reduced_q_density", format!("beta = {beta} must be positive")));
        }
        let ln_ncx2 = ln_ncx2_pdf_raw(beta, self.spec.half_p(), self.v, self.ctl.rel_tol, self.ctl.max_terms)?;
        Ok(self.spec.ln_g0(beta) + ln_ncx2 - self.ln_norm)
    }

    pub fn density(&self, beta: f64) -> Result<f64> {
        self.ln_density(beta).map(f64::exp)
    }
}

/// Piecewise cubic Hermite table of the CDF of `u = ln β` under `q(· | v)`.
#[derive(Debug, Clone)]
pub struct QTable {
    /// Nodes in `u`.
    u: Vec<f64>,
    /// Unnormalized CDF at the nodes.
    cdf: Vec<f64>,
    /// Unnormalized density of `u` at the nodes.
    dens: Vec<f64>,
    /// Upper bound on the relative mass outside the tabulated range.
    pub tail_mass: f64,
}

impl QTable {
    /// Tabulate `q(· | v)`, splitting intervals until the Hermite
    /// interpolant of the CDF is within `ctl.rel_tol` of the total mass.
    pub fn new(v: f64, spec: &PriorSpec, ctl: &SeriesCtl) -> Result<Self> {
        let q = QDensity::new(v, spec, ctl)?;
        Self::from_density(&q)
    }

    pub fn from_density(q: &QDensity) -> Result<Self> {
        let tol = q.ctl.rel_tol;
        let h = |u: f64| -> Result<f64> { Ok(q.ln_density(u.exp())? + u) };
        // coarse peak search on a unit grid around ln(v + p)
        let centre = (q.v + q.spec.p as f64).ln();
        let mut peak = (centre, h(centre)?);
        for k in 1..=40 {
            for u in [centre - 0.25 * k as f64, centre + 0.05 * k as f64] {
                let val = h(u)?;
                if val > peak.1 {
                    peak = (u, val);
                }
            }
        }
        let top = peak.1;
        let rel = |u: f64| -> Result<f64> { Ok((h(u)? - top).exp()) };
        let walk = |step: f64| -> Result<(f64, f64)> {
            let mut u = peak.0;
            loop {
                u += step;
                let l = h(u)? - top;
                if l < -TABLE_DROP {
                    return Ok((u, 0.0));
                }
                if u <= LN_BETA_FLOOR {
                    return Ok((LN_BETA_FLOOR, l.exp()));
                }
            }
        };
        let (lo, lo_val) = walk(-0.5)?;
        let (hi, _) = walk(0.1)?;
        // a left edge at the floor leaves a tail decaying at least like e^{(p/2 − b)u}
        let slope = (q.spec.half_p() - q.spec.b()).max(1e-3);
        let tail_mass = if lo_val > 0.0 { lo_val / slope } else { (-TABLE_DROP).exp() };

        let gl = |a: f64, b: f64| -> Result<f64> {
            let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
            let mut acc = 0.0;
            for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                acc += w * (rel(m - r * x)? + rel(m + r * x)?);
            }
            Ok(acc * r)
        };
        let n0 = 64;
        let mut u: Vec<f64> = (0..=n0).map(|i| lo + (hi - lo) * i as f64 / n0 as f64).collect();
        let mut pieces: Vec<f64> = u.windows(2).map(|w| gl(w[0], w[1])).collect::<Result<_>>()?;
        let mut done = vec![false; pieces.len()];
        loop {
            let total: f64 = pieces.iter().sum();
            let mut next_u = vec![u[0]];
            let mut next_pieces = Vec::with_capacity(pieces.len());
            let mut next_done = Vec::with_capacity(pieces.len());
            let mut split_any = false;
            for (i, w) in u.windows(2).enumerate() {
                let (a, b) = (w[0], w[1]);
                if done[i] {
                    next_u.push(b);
                    next_pieces.push(pieces[i]);
                    next_done.push(true);
                    continue;
                }
                let mid = 0.5 * (a + b);
                let left = gl(a, mid)?;
                let right = gl(mid, b)?;
                // Hermite interpolant of the running CDF at the midpoint
                let predicted = 0.5 * pieces[i] + (b - a) * (rel(a)? - rel(b)?) / 8.0;
                let quad_err = (left + right - pieces[i]).abs();
                if (predicted - left).abs().max(quad_err) > tol * total {
                    split_any = true;
                    next_u.extend([mid, b]);
                    next_pieces.extend([left, right]);
                    next_done.extend([false, false]);
                } else {
                    next_u.push(b);
                    next_pieces.push(left + right);
                    next_done.push(true);
                }
            }
            u = next_u;
            pieces = next_pieces;
            done = next_done;
            if !split_any {
                break;
            }
            if u.len() >= MAX_INTERVALS {
                return Err(Error::Sampler {
                    op: "reduced_q_sample",
                    detail: format!("CDF table did not reach tolerance {tol:e} within {MAX_INTERVALS} nodes"),
                });
            }
        }
        let mut cdf = Vec::with_capacity(u.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for p in &pieces {
            acc += p;
            cdf.push(acc);
        }
        let dens = u.iter().map(|&x| rel(x)).collect::<Result<_>>()?;
        Ok(Self { u, cdf, dens, tail_mass })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    fn hermite(&self, i: usize, t: f64) -> (f64, f64) {
        let hw = self.u[i + 1] - self.u[i];
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        let (d0, d1) = (self.dens[i] * hw, self.dens[i + 1] * hw);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * c0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * c1 + (t3 - t2) * d1;
        let slope = (6.0 * t2 - 6.0 * t) * c0 + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (-6.0 * t2 + 6.0 * t) * c1 + (3.0 * t2 - 2.0 * t) * d1;
        (value, slope)
    }

    /// Tabulated CDF at `β`.
    pub fn cdf(&self, beta: f64) -> f64 {
        let u = beta.ln();
        let total = *self.cdf.last().unwrap();
        if u <= self.u[0] {
            return 0.0;
        }
        if u >= *self.u.last().unwrap() {
            return 1.0;
        }
        let i = self.u.partition_point(|&x| x <= u) - 1;
        let t = (u - self.u[i]) / (self.u[i + 1] - self.u[i]);
        self.hermite(i, t).0 / total
    }

    /// Inverse-CDF draw.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let total = *self.cdf.last().unwrap();
        let target = rng.random::<f64>() * total;
        let i = (self.cdf.partition_point(|&c| c <= target).max(1) - 1).min(self.u.len() - 2);
        // safeguarded Newton on the cubic
        let (mut a, mut b) = (0.0, 1.0);
        let mut t = if self.cdf[i + 1] > self.cdf[i] {
            (target - self.cdf[i]) / (self.cdf[i + 1] - self.cdf[i])
        } else {
            0.5
        };
        for _ in 0..60 {
            let (val, slope) = self.hermite(i, t);
            let f = val - target;
            if f > 0.0 {
                b = t;
            } else {
                a = t;
            }
            let mut next = if slope > 0.0 { t - f / slope } else { 0.5 * (a + b) };
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - t).abs() < 1e-15 {
                t = next;
                break;
            }
            t = next;
        }
        (self.u[i] + t * (self.u[i + 1] - self.u[i])).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::appendix::ew_ratio;
    use crate::specfun::quad::integrate_vec;

    fn ctl() -> SeriesCtl {
        SeriesCtl::default()
    }

    #[test]
    fn density_integrates_to_one() {
        let spec = PriorSpec::power(3, 1.0, 1.0);
        for v in [1.0, 10.0, 100.0] {
            let q = QDensity::new(v, &spec, &ctl()).unwrap();
            // integrate in u = ln β
            let est = integrate_vec(|u| [q.density(u.exp()).unwrap() * u.exp()], -40.0, (v + 200.0).ln() + 1.0, &ctl().quad(1e-13), "test")
                .unwrap();
            assert!((est.value[0] - 1.0).abs() < 1e-8, "v = {v}: {}", est.value[0]);
        }
    }

    #[test]
    fn density_mean_matches_weight_ratio() {
        let spec = PriorSpec::power(3, 1.0, 1.0);
        for v in [1.0, 10.0, 100.0] {
            let q = QDensity::new(v, &spec, &ctl()).unwrap();
            let est = integrate_vec(
                |u| {
                    let b = u.exp();
                    [q.density(b).unwrap() * b * b]
                },
                -40.0,
                (v + 200.0).ln() + 1.0,
                &ctl().quad(1e-12),
                "test",
            )
            .unwrap();
            let want = 2.0 * ew_ratio(1, v, &spec, &ctl()).unwrap().ratio;
            assert!(((est.value[0] - want) / want).abs() < 1e-6, "v = {v}: {} vs {want}", est.value[0]);
        }
    }

    #[test]
    fn small_beta_slope_without_shift() {
        let spec = PriorSpec::power(3, 0.0, 0.5);
        let q = QDensity::new(2.0, &spec, &ctl()).unwrap();
        let (b1, b2) = (1e-4, 1.1e-4);
        let slope = (q.ln_density(b2).unwrap() - q.ln_density(b1).unwrap()) / (b2 / b1).ln();
        assert!((slope - (spec.half_p() - 1.0 - spec.b())).abs() < 1e-2, "{slope}");
    }

    #[test]
    fn rejects_bad_points() {
        let spec = PriorSpec::power(3, 1.0, 1.0);
        assert!(QDensity::new(0.0, &spec, &ctl()).is_err());
        let q = QDensity::new(1.0, &spec, &ctl()).unwrap();
        assert!(q.density(0.0).is_err());
        assert!(q.density(-1.0).is_err());
    }

    #[test]
    fn table_cdf_matches_quadrature() {
        let spec = PriorSpec::power(3, 1.0, 1.0);
        let q = QDensity::new(10.0, &spec, &ctl()).unwrap();
        let table = QTable::from_density(&q).unwrap();
        for beta in [0.5f64, 3.0, 10.0, 25.0] {
            let est = integrate_vec(|u| [q.density(u.exp()).unwrap() * u.exp()], -40.0, beta.ln(), &ctl().quad(1e-13), "test").unwrap();
            assert!((table.cdf(beta) - est.value[0]).abs() < 1e-8, "beta = {beta}");
        }
    }

    #[test]
    fn table_draws_are_positive_and_reproducible() {
        let spec = PriorSpec::power(5, 0.0, 1.9);
        let table = QTable::new(4.0, &spec, &ctl()).unwrap();
        let mut r1 = RngStream::new(9, 0);
        let mut r2 = RngStream::new(9, 0);
        for _ in 0..1000 {
            let x = table.sample(&mut r1);
            assert!(x > 0.0);
            assert_eq!(x.to_bits(), table.sample(&mut r2).to_bits());
        }
    }
}
