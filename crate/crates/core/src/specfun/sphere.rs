//! Uniform and exponentially tilted (von Mises–Fisher) directions.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use super::RngStream;
use crate::error::{Error, Result};

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Uniform draw from the unit sphere in `p` dimensions.
pub fn sphere_uniform(p: usize, rng: &mut RngStream) -> Vec<f64> {
    assert!(p >= 1, "sphere_uniform needs p >= 1");
    loop {
        let mut v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        if normalize(&mut v) > 0.0 {
            return v;
        }
    }
}

/// Draw from the density on the unit sphere proportional to
/// `exp(kappa · ω·mean_dir)`.
///
/// Uses Wood's rejection scheme for the cosine `w = ω·mean_dir`, with the
/// tangent component uniform on the orthogonal sphere.
pub fn vmf_direction(mean_dir: &[f64], kappa: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    let p = mean_dir.len();
    let norm = mean_dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    if p == 0 || (norm - 1.0).abs() > 1e-9 {
        return Err(Error::domain("vmf_direction", format!("mean direction has norm {norm}")));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::domain("vmf_direction", format!("kappa = {kappa}")));
    }
    if kappa == 0.0 {
        return Ok(sphere_uniform(p, rng));
    }
    if p == 1 {
        // Two-point sphere: P(+mean) = e^κ / (e^κ + e^{−κ}).
        let plus = 1.0 / (1.0 + (-2.0 * kappa).exp());
        let sign = if rng.random::<f64>() < plus { 1.0 } else { -1.0 };
        return Ok(vec![sign * mean_dir[0]]);
    }

    let d = (p - 1) as f64;
    let b = d / (2.0 * kappa + (4.0 * kappa * kappa + d * d).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + d * (1.0 - x0 * x0).ln();
    let beta = Beta::new(0.5 * d, 0.5 * d).expect("valid beta parameters");
    let (w, one_minus_w) = loop {
        let z: f64 = beta.sample(rng);
        let denom = 1.0 - (1.0 - b) * z;
        let w = (1.0 - (1.0 + b) * z) / denom;
        let one_minus_w = 2.0 * b * z / denom;
        let u: f64 = rng.random();
        if kappa * w + d * (1.0 - x0 * w).ln() - c >= u.ln() {
            break (w, one_minus_w);
        }
    };

    // Uniform tangent direction orthogonal to mean_dir.
    let tangent = loop {
        let mut g: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let dot: f64 = g.iter().zip(mean_dir).map(|(a, m)| a * m).sum();
        g.iter_mut().zip(mean_dir).for_each(|(a, m)| *a -= dot * m);
        if normalize(&mut g) > 1e-12 {
            break g;
        }
    };
    let s = (one_minus_w * (1.0 + w)).max(0.0).sqrt();
    let mut out: Vec<f64> = mean_dir
        .iter()
        .zip(&tangent)
        .map(|(m, t)| w * m + s * t)
        .collect();
    normalize(&mut out);
    Ok(out)
}
