//! Globally adaptive Gauss–Kronrod (G10/K21) quadrature on finite intervals.
//!
//! Integrands return a fixed-size array so that several integrals can share
//! one set of nodes; the mesh is refined until every component meets its
//! tolerance. Error estimates follow the QUADPACK `qk21` heuristic.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_512_212_860,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Weights of the embedded 10-point Gauss rule at XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances and limits for [`integrate_vec`].
#[derive(Debug, Clone, Copy)]
pub struct QuadSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Number of equal panels the interval is split into before refinement.
    pub initial_panels: usize,
    pub max_intervals: usize,
}

impl QuadSettings {
    pub fn new(rel_tol: f64, abs_tol: f64, initial_panels: usize) -> Self {
        Self {
            rel_tol,
            abs_tol,
            initial_panels: initial_panels.max(1),
            max_intervals: 4000,
        }
    }
}

/// Integral estimate with per-component error bounds.
#[derive(Debug, Clone, Copy)]
pub struct QuadEstimate<const K: usize> {
    pub value: [f64; K],
    pub error: [f64; K],
    pub evals: usize,
}

struct Panel<const K: usize> {
    a: f64,
    b: f64,
    value: [f64; K],
    error: [f64; K],
    abs: [f64; K],
    priority: f64,
}

impl<const K: usize> PartialEq for Panel<K> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl<const K: usize> Eq for Panel<K> {}
impl<const K: usize> PartialOrd for Panel<K> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<const K: usize> Ord for Panel<K> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

fn kronrod21<const K: usize, F: FnMut(f64) -> [f64; K]>(
    f: &mut F,
    a: f64,
    b: f64,
) -> ([f64; K], [f64; K], [f64; K]) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = [0.0; K];
    let mut resg = [0.0; K];
    let mut resabs = [0.0; K];
    let mut fv1 = [[0.0; K]; 10];
    let mut fv2 = [[0.0; K]; 10];
    for c in 0..K {
        resk[c] = WGK[10] * fc[c];
        resabs[c] = (WGK[10] * fc[c]).abs();
    }
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for c in 0..K {
            resk[c] += WGK[j] * (f1[c] + f2[c]);
            resabs[c] += WGK[j] * (f1[c].abs() + f2[c].abs());
            if j % 2 == 1 {
                resg[c] += WG[j / 2] * (f1[c] + f2[c]);
            }
        }
        fv1[j] = f1;
        fv2[j] = f2;
    }
    let mut err = [0.0; K];
    for c in 0..K {
        let mean = 0.5 * resk[c];
        let mut resasc = WGK[10] * (fc[c] - mean).abs();
        for j in 0..10 {
            resasc += WGK[j] * ((fv1[j][c] - mean).abs() + (fv2[j][c] - mean).abs());
        }
        let k = resk[c] * half;
        let g = resg[c] * half;
        let asc = resasc * half.abs();
        let mut e = (k - g).abs();
        if asc != 0.0 && e != 0.0 {
            e = asc * (200.0 * e / asc).powf(1.5).min(1.0);
        }
        let abs = resabs[c] * half.abs();
        if abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            e = e.max(50.0 * f64::EPSILON * abs);
        }
        resk[c] = k;
        err[c] = e;
        resabs[c] = abs;
    }
    (resk, err, resabs)
}

/// Integrate a vector-valued function over `[a, b]`.
///
/// Each component `c` converges when its summed error is at most
/// `max(abs_tol, rel_tol·|value_c|, 50ε·∫|f_c|)`.
pub fn integrate_vec<const K: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    settings: &QuadSettings,
    layer: &str,
) -> Result<QuadEstimate<K>>
where
    F: FnMut(f64) -> [f64; K],
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integrate", format!("non-finite bounds [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadEstimate {
            value: [0.0; K],
            error: [0.0; K],
            evals: 0,
        });
    }
    let n0 = settings.initial_panels.max(1);
    let width = (b - a) / n0 as f64;
    let mut panels: Vec<Panel<K>> = Vec::with_capacity(n0);
    let mut evals = 0;
    for i in 0..n0 {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n0 { b } else { a + width * (i + 1) as f64 };
        let (value, error, abs) = kronrod21(&mut f, lo, hi);
        evals += 21;
        panels.push(Panel {
            a: lo,
            b: hi,
            value,
            error,
            abs,
            priority: 0.0,
        });
    }

    let totals = |panels: &[Panel<K>]| {
        let mut v = [0.0; K];
        let mut e = [0.0; K];
        let mut s = [0.0; K];
        for p in panels {
            for c in 0..K {
                v[c] += p.value[c];
                e[c] += p.error[c];
                s[c] += p.abs[c];
            }
        }
        (v, e, s)
    };

    let tolerance = |v: &[f64; K], s: &[f64; K]| {
        let mut t = [0.0; K];
        for c in 0..K {
            t[c] = settings
                .abs_tol
                .max(settings.rel_tol * v[c].abs())
                .max(50.0 * f64::EPSILON * s[c]);
        }
        t
    };

    let (mut value, mut error, mut sabs) = totals(&panels);
    let mut tol = tolerance(&value, &sabs);
    let converged = |e: &[f64; K], t: &[f64; K]| (0..K).all(|c| e[c] <= t[c]);
    if converged(&error, &tol) {
        return Ok(QuadEstimate { value, error, evals });
    }

    let prio = |p: &Panel<K>, t: &[f64; K]| -> f64 {
        (0..K)
            .map(|c| if t[c] > 0.0 { p.error[c] / t[c] } else { p.error[c] })
            .fold(0.0, f64::max)
    };

    let mut heap: BinaryHeap<Panel<K>> = BinaryHeap::new();
    for mut p in panels {
        p.priority = prio(&p, &tol);
        heap.push(p);
    }

    while heap.len() < settings.max_intervals {
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            break;
        }
        let (v1, e1, s1) = kronrod21(&mut f, worst.a, mid);
        let (v2, e2, s2) = kronrod21(&mut f, mid, worst.b);
        evals += 42;
        for c in 0..K {
            value[c] += v1[c] + v2[c] - worst.value[c];
            error[c] += e1[c] + e2[c] - worst.error[c];
            sabs[c] += s1[c] + s2[c] - worst.abs[c];
        }
        let mut left = Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
            abs: s1,
            priority: 0.0,
        };
        let mut right = Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
            abs: s2,
            priority: 0.0,
        };
        tol = tolerance(&value, &sabs);
        left.priority = prio(&left, &tol);
        right.priority = prio(&right, &tol);
        heap.push(left);
        heap.push(right);

        if converged(&error, &tol) {
            // Re-sum from the panels to shed accumulated update roundoff.
            let all: Vec<Panel<K>> = heap.into_vec();
            let (v, e, _) = totals(&all);
            return Ok(QuadEstimate {
                value: v,
                error: e,
                evals,
            });
        }
    }

    let all: Vec<Panel<K>> = heap.into_vec();
    let (v, e, s) = totals(&all);
    let t = tolerance(&v, &s);
    if converged(&e, &t) {
        return Ok(QuadEstimate {
            value: v,
            error: e,
            evals,
        });
    }
    let worst = (0..K)
        .max_by(|&i, &j| (e[i] / t[i]).total_cmp(&(e[j] / t[j])))
        .unwrap_or(0);
    Err(Error::Quadrature {
        layer: layer.to_string(),
        estimate: v[worst],
        error: e[worst],
    })
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    settings: &QuadSettings,
    layer: &str,
) -> Result<f64> {
    integrate_vec(|x| [f(x)], a, b, settings, layer).map(|r| r.value[0])
}
