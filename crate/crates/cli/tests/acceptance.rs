//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::f64::consts::E;
use std::process::{Command, ExitCode};
use std::time::Instant;

use recurlab_core::appendix::{mu_triple, phi, w_k, WeightTable};
use recurlab_core::chains::{
    dirichlet_per_x, hitting_times, pushforward_consistency, pushforward_ks, supermartingale_probe, ChainKind, PathConfig,
    ReducedKernel, Start, TestFunction,
};
use recurlab_core::grid::GridSpec;
use recurlab_core::recurrence::{bracket28, delta_scan, f0_pack, find_threshold, prop43_sup};
use recurlab_core::specfun::ncx2_moments;
use recurlab_core::specfun::ncx2_pdf;
use recurlab_core::specfun::quad::{integrate, QuadSettings};
use recurlab_core::{PriorSpec, RngStream, SeriesCtl};

type Check = Result<(bool, String), String>;

const SEED: u64 = 20_240_101;
/// Remainders below this are at the noise level of the series.
const RESOLUTION_FLOOR: f64 = 1e-9;

fn ctl() -> SeriesCtl {
    SeriesCtl::default()
}

fn unit() -> PriorSpec {
    PriorSpec::power(3, 1.0, 1.0)
}

fn specs() -> [PriorSpec; 4] {
    [
        unit(),
        PriorSpec::power(3, 0.0, 0.5),
        PriorSpec::power(4, 1.0, 2.0),
        PriorSpec::power(5, 0.0, 1.9),
    ]
}

fn e<T: std::fmt::Display>(err: T) -> String {
    err.to_string()
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn threshold() -> Result<f64, String> {
    let grid = GridSpec::log(1.0, 1e6, 61).values().map_err(e)?;
    find_threshold(&unit(), &grid, 0.5, &ctl()).map_err(e)?.threshold.ok_or_else(|| "no threshold on the grid".into())
}

fn asymptotics() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for spec in specs() {
        let limit = spec.drift_limit();
        let r3 = mu_triple(1e3, &spec, &ctl()).map_err(e)?.mu1 - limit;
        let r4 = mu_triple(1e4, &spec, &ctl()).map_err(e)?.mu1 - limit;
        let decays = r4.abs() <= 0.5 * r3.abs() || (r3.abs() <= RESOLUTION_FLOOR && r4.abs() <= RESOLUTION_FLOOR);
        ok &= r3.abs() <= 0.1 && decays;
        notes.push(format!("{spec}: rem(1e3) = {r3:.3e}, rem(1e4) = {r4:.3e}"));
    }
    Ok((ok, notes.join("; ")))
}

fn second_moment() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for spec in specs() {
        let rems: Vec<f64> = [1e2, 1e3, 1e4]
            .iter()
            .map(|&eta| mu_triple(eta, &spec, &ctl()).map(|m| (m.mu2 - 8.0 * eta).abs()))
            .collect::<Result<_, _>>()
            .map_err(e)?;
        let scaled = mu_triple(1e3, &spec, &ctl()).map_err(e)?.mu2 / 1e3;
        let spread = rems.iter().cloned().fold(0.0, f64::max) / rems.iter().cloned().fold(f64::INFINITY, f64::min);
        ok &= (7.8..=8.2).contains(&scaled) && spread <= 10.0;
        notes.push(format!("{spec}: μ₂(1e3)/1e3 = {scaled:.4}, max/min |μ₂ − 8η| = {spread:.3}"));
    }
    Ok((ok, notes.join("; ")))
}

fn third_moment() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for spec in specs() {
        let ratios: Vec<f64> = [1e2, 1e3, 1e4]
            .iter()
            .map(|&eta| mu_triple(eta, &spec, &ctl()).map(|m| m.mu3.abs() / eta))
            .collect::<Result<_, _>>()
            .map_err(e)?;
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        ok &= max.is_finite() && max / min <= 10.0;
        notes.push(format!("{spec}: |μ₃|/η ≤ {max:.3}, max/min = {:.3}", max / min));
    }
    Ok((ok, notes.join("; ")))
}

fn monte_carlo_moments() -> Check {
    let spec = unit();
    let kernel = ReducedKernel::new(&spec, &ctl()).map_err(e)?;
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (i, eta) in [1.0, 10.0, 100.0].into_iter().enumerate() {
        let mut rng = RngStream::new(SEED, i as u64);
        let d: Vec<f64> = (0..100_000).map(|_| kernel.step(eta, &mut rng) - eta).collect();
        let mu = mu_triple(eta, &spec, &ctl()).map_err(e)?;
        for (k, want) in [(1, mu.mu1), (2, mu.mu2), (3, mu.mu3)] {
            let (mean, se) = mean_se(&d.iter().map(|x| x.powi(k)).collect::<Vec<_>>());
            let z = (mean - want).abs() / se;
            worst = worst.max(z);
            ok &= z <= 3.0;
        }
    }
    Ok((ok, format!("largest |MC − analytic|/SE over 9 moments = {worst:.2}")))
}

fn superharmonicity(m: f64) -> Check {
    let spec = unit();
    let confirm = GridSpec::log(m, 1e6, 25).values().map_err(e)?;
    let deltas = delta_scan(&spec, &confirm, 0.5, &ctl()).map_err(e)?;
    let max_delta = deltas.iter().map(|d| d.delta).fold(f64::NEG_INFINITY, f64::max);
    let mut gap: f64 = 0.0;
    let mut grid = GridSpec::log(1.0, 1e6, 61).values().map_err(e)?;
    grid.extend(&confirm);
    for eta in grid {
        let mu = mu_triple(eta, &spec, &ctl()).map_err(e)?;
        gap = gap.max(bracket28(eta, &mu, 0.5).map_err(e)?.identity_gap);
    }
    let ok = m <= 1e3 && max_delta <= 0.0 && gap <= 1e-10;
    Ok((ok, format!("m = {m:.4}, max δ on 25 points = {max_delta:.3e}, max identity gap = {gap:.1e}")))
}

fn escape() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for m in [1.0, 10.0, 100.0] {
        let grid = GridSpec::linear(0.0, m, 21).values().map_err(e)?;
        let scan = prop43_sup(m, &unit(), &grid, &ctl()).map_err(e)?;
        ok &= scan.sup < 1.0 && scan.all_interior();
        notes.push(format!("m = {m}: sup = {:.6}, min escape = {:.3e}", scan.sup, scan.min_escape));
    }
    Ok((ok, notes.join("; ")))
}

fn paths(start: f64, m: f64, n_paths: usize, max_steps: u64) -> PathConfig {
    PathConfig {
        start: Start::Scalar(start),
        m,
        n_paths,
        max_steps,
        master_seed: SEED,
    }
}

fn dichotomy() -> Check {
    let cfg = paths(5.0, 1.0, 1_000, 100_000);
    let one = hitting_times(ChainKind::Walk, &cfg, &PriorSpec::flat(1), &ctl()).map_err(e)?.hit_fraction;
    let three = hitting_times(ChainKind::Walk, &cfg, &PriorSpec::flat(3), &ctl()).map_err(e)?.hit_fraction;
    Ok((one >= 0.95 && three <= 0.5, format!("p = 1 hits {one:.3}, p = 3 hits {three:.3}")))
}

fn contrast(m: f64) -> Check {
    // the reduced chain needs a long horizon: P(τ > t) decays like t^{-1/2}
    let strong = hitting_times(ChainKind::Reduced, &paths(100.0 * m, m, 1_000, 100_000_000), &unit(), &ctl()).map_err(e)?;
    let flat = hitting_times(ChainKind::Reduced, &paths(100.0 * m, m, 1_000, 100_000), &PriorSpec::flat(3), &ctl()).map_err(e)?;
    let ok = strong.hit_fraction >= 0.99 && flat.hit_fraction <= 0.5;
    Ok((
        ok,
        format!(
            "(3,1,1) hits {:.3} within 1e8 steps (median {:.0}); flat hits {:.3} within 1e5 steps (eventual probability 0.1)",
            strong.hit_fraction,
            strong.quantiles.map_or(f64::NAN, |q| q[1]),
            flat.hit_fraction
        ),
    ))
}

fn observations() -> [[f64; 3]; 3] {
    [[0.5, 0.0, 0.0], [2.0, 0.0, 0.0], [5.0, 0.0, 0.0]]
}

fn pushforward() -> Check {
    let shifted = PriorSpec::power(3, 1.0, 1.5);
    let mut ok = true;
    let mut notes = Vec::new();
    for (i, x) in observations().iter().enumerate() {
        let same = pushforward_consistency(x, 10_000, &unit(), &mut RngStream::new(SEED, 2 * i as u64), &ctl()).map_err(e)?;
        let other = pushforward_ks(x, 10_000, &unit(), &shifted, &mut RngStream::new(SEED, 2 * i as u64 + 1), &ctl()).map_err(e)?;
        ok &= !same.reject && other.reject;
        notes.push(format!(
            "‖x‖ = {}: D = {:.4}, control D = {:.4}, critical {:.4}",
            x[0], same.statistic, other.statistic, same.critical
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn dirichlet() -> Check {
    let h = TestFunction::capped(1.0);
    let mut ok = true;
    let mut notes = Vec::new();
    for (i, x) in observations().iter().enumerate() {
        let est = dirichlet_per_x(&h, x, 10_000, &unit(), &mut RngStream::new(SEED, 10 + i as u64), &ctl()).map_err(e)?;
        ok &= est.z_score() <= 3.0;
        notes.push(format!("‖x‖ = {}: {:.4} vs {:.4}, z = {:.2}", x[0], est.full, est.reduced, est.z_score()));
    }
    Ok((ok, notes.join("; ")))
}

fn probe(m: f64) -> Check {
    // late steps drift by about a tenth of a per-path SD, so 1000 comparisons
    // need enough paths to keep the largest excess clear of 3 SE
    let t = supermartingale_probe(&unit(), 10.0 * m, m, 16_000, 1_000, SEED, &ctl()).map_err(e)?;
    let (change, se) = t.total_change;
    Ok((
        t.non_increasing_within(3.0),
        format!("worst step excess {:.2} SE, total change {change:.3e} ± {se:.1e}", t.worst_excess()),
    ))
}

fn normalization_error(p: u32, lambda: f64) -> Result<f64, String> {
    let sd = (2.0 * p as f64 + 4.0 * lambda).sqrt();
    let upper = (lambda + p as f64 + 40.0 * sd + 100.0).sqrt();
    let total = integrate(
        |s| if s > 0.0 { 2.0 * s * ncx2_pdf(s * s, p, lambda, &ctl()).unwrap_or(f64::NAN) } else { 0.0 },
        0.0,
        upper,
        &QuadSettings::new(1e-12, 0.0, 32),
        "normalization",
    )
    .map_err(e)?;
    Ok((total - 1.0).abs())
}

fn kernel_checks() -> Check {
    let mut norm: f64 = 0.0;
    for p in [1, 3, 5, 10] {
        for lambda in [0.0, 1.0, 10.0, 100.0] {
            norm = norm.max(normalization_error(p, lambda)?);
        }
    }
    let moments = ncx2_moments(3, 0.0).map_err(e)?;

    let mut fd: f64 = 0.0;
    let mut identity: f64 = 0.0;
    for x in [0.0, 0.3, 1.0, 10.0, 1e3, 1e5] {
        let h = 1e-4 * (E + x);
        let (lo, hi, f) = (f0_pack(x - h), f0_pack(x + h), f0_pack(x));
        for (num, exact) in [
            ((hi.f0 - lo.f0) / (2.0 * h), f.d1),
            ((hi.d1 - lo.d1) / (2.0 * h), f.d2),
            ((hi.d2 - lo.d2) / (2.0 * h), f.d3),
            ((hi.d3 - lo.d3) / (2.0 * h), f.d4),
        ] {
            fd = fd.max(((num - exact) / exact).abs());
        }
        let lhs = (f.d1 + x * f.d2) / (f.d1 * f.d1);
        let rhs = -x + E * (x + E).ln();
        identity = identity.max(((lhs - rhs) / rhs).abs());
    }

    let mut ratio: f64 = 0.0;
    let mut phi_max = f64::NEG_INFINITY;
    let mut phi_ok = true;
    for spec in [unit(), PriorSpec::power(4, 1.0, 2.0), PriorSpec::power(3, 2.5, 0.7)] {
        let hp = spec.half_p();
        for n in [0usize, 1, 5, 60, 2_000, 10_000] {
            for k in 1..=3u32 {
                let lhs = (n as f64 + hp).ln() + w_k(n + 1, k - 1, &spec, &ctl()).map_err(e)?.ln_abs;
                let factor = n as f64 + hp + k as f64 - spec.b() - 1.0 + phi(n + k as usize - 1, &spec, &ctl()).map_err(e)?;
                let rhs = factor.ln() + w_k(n, k - 1, &spec, &ctl()).map_err(e)?.ln_abs;
                ratio = ratio.max(((lhs - rhs).exp() - 1.0).abs());
            }
        }
        let table = WeightTable::new(&spec, 0, 10_000, &ctl()).map_err(e)?;
        let top = (0..=10_000).map(|n| table.phi(n)).fold(f64::NEG_INFINITY, f64::max);
        phi_ok &= top <= spec.b();
        phi_max = phi_max.max(top / spec.b());
    }

    let ok = norm <= 1e-8 && moments == (3.0, 15.0, 105.0) && fd <= 1e-6 && identity <= 1e-10 && ratio <= 1e-8 && phi_ok;
    Ok((
        ok,
        format!(
            "normalization {norm:.1e}, moments {moments:?}, derivatives {fd:.1e}, f₀ identity {identity:.1e}, \
             weight ratio {ratio:.1e}, max φ/b {phi_max:.4}"
        ),
    ))
}

fn cli_bytes(dir: &std::path::Path, name: &str, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = dir.join(name);
    let status = Command::new(env!("CARGO_BIN_EXE_recurlab"))
        .env_remove("RECURLAB_OUT_DIR")
        .args(args)
        .arg("--out")
        .arg(&out)
        .output()
        .map_err(e)?;
    if !status.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&status.stderr)));
    }
    std::fs::read(out).map_err(e)
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(e)?;
    let verdict = ["verdict", "--seed", "7"];
    let simulate = ["simulate", "--seed", "7", "--paths", "200", "--max-steps", "20000"];
    let v = (cli_bytes(dir.path(), "v1.json", &verdict)?, cli_bytes(dir.path(), "v2.json", &verdict)?);
    let s = (cli_bytes(dir.path(), "s1.json", &simulate)?, cli_bytes(dir.path(), "s2.json", &simulate)?);
    let ok = v.0 == v.1 && s.0 == s.1;
    Ok((ok, format!("verdict {} bytes, simulate {} bytes, identical: {}, {}", v.0.len(), s.0.len(), v.0 == v.1, s.0 == s.1)))
}

fn main() -> ExitCode {
    let m = threshold();
    let with_m = |f: fn(f64) -> Check| -> Check { m.clone().and_then(f) };
    let criteria: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        ("appendix asymptotics", Box::new(asymptotics)),
        ("second-moment scaling", Box::new(second_moment)),
        ("third-moment scaling", Box::new(third_moment)),
        ("Monte Carlo moments", Box::new(monte_carlo_moments)),
        ("superharmonicity", Box::new(move || with_m(superharmonicity))),
        ("escape condition", Box::new(escape)),
        ("walk dichotomy", Box::new(dichotomy)),
        ("recurrence contrast", Box::new(move || with_m(contrast))),
        ("pushforward identity", Box::new(pushforward)),
        ("per-x Dirichlet identity", Box::new(dirichlet)),
        ("supermartingale probe", Box::new(move || with_m(probe))),
        ("kernel checks", Box::new(kernel_checks)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|err| (false, format!("error: {err}")));
        failed += usize::from(!ok);
        println!(
            "{} criterion {:>2} {name} [{:.1}s]: {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            started.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
