//! The prior family `ν(dθ) = g₀(‖θ‖²) dθ` on ℝᵖ with `g₀(z) = (a + z)^{−b}`,
//! plus the flat (Lebesgue) prior as a distinguished variant.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::ln_gamma_unchecked;

const LN_SQRT_PI: f64 = 0.572_364_942_924_700_1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorFamily {
    /// Lebesgue measure, `g₀ ≡ 1`.
    Flat,
    /// `g₀(z) = (a + z)^{−b}`.
    Power { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// Dimension of θ.
    pub p: u32,
    #[serde(flatten)]
    pub family: PriorFamily,
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Classification {
    Invalid { reason: String },
    Valid { strong_range: bool },
}

impl Classification {
    pub fn is_valid(&self) -> bool {
        matches!(self, Classification::Valid { .. })
    }

    pub fn strong_range(&self) -> bool {
        matches!(self, Classification::Valid { strong_range: true })
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Invalid { reason } => write!(f, "invalid ({reason})"),
            Classification::Valid { strong_range } => {
                write!(f, "valid, strong_range={strong_range}")
            }
        }
    }
}

impl PriorSpec {
    pub fn power(p: u32, a: f64, b: f64) -> Self {
        Self {
            p,
            family: PriorFamily::Power { a, b },
        }
    }

    pub fn flat(p: u32) -> Self {
        Self {
            p,
            family: PriorFamily::Flat,
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.family, PriorFamily::Flat)
    }

    /// Shift `a`; the flat prior behaves as `a = 0`.
    pub fn a(&self) -> f64 {
        match self.family {
            PriorFamily::Flat => 0.0,
            PriorFamily::Power { a, .. } => a,
        }
    }

    /// Exponent `b`; the flat prior behaves as `b = 0`.
    pub fn b(&self) -> f64 {
        match self.family {
            PriorFamily::Flat => 0.0,
            PriorFamily::Power { b, .. } => b,
        }
    }

    pub fn half_p(&self) -> f64 {
        0.5 * self.p as f64
    }

    /// Limit of the mean increment of the reduced chain, `2p − 4b`.
    pub fn drift_limit(&self) -> f64 {
        2.0 * self.p as f64 - 4.0 * self.b()
    }

    pub fn classify(&self) -> Classification {
        validate(self)
    }

    /// Error unless the spec is valid.
    pub fn require_valid(&self, op: &'static str) -> Result<()> {
        match validate(self) {
            Classification::Valid { .. } => Ok(()),
            Classification::Invalid { reason } => Err(Error::domain(op, reason)),
        }
    }

    /// `ln g₀(z)`.
    pub(crate) fn ln_g0(&self, z: f64) -> f64 {
        match self.family {
            PriorFamily::Flat => 0.0,
            PriorFamily::Power { a, b } => -b * (a + z).ln(),
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            PriorFamily::Flat => write!(f, "flat(p={})", self.p),
            PriorFamily::Power { a, b } => write!(f, "(p={}, a={a}, b={b})", self.p),
        }
    }
}

/// Classify a prior: invalid when the marginal fails to be σ-finite or the
/// parameters are out of range, otherwise valid with the strong-range flag.
pub fn validate(spec: &PriorSpec) -> Classification {
    let invalid = |reason: String| Classification::Invalid { reason };
    if spec.p == 0 {
        return invalid("dimension p must be at least 1".into());
    }
    let half = spec.half_p();
    match spec.family {
        PriorFamily::Flat => Classification::Valid {
            strong_range: false,
        },
        PriorFamily::Power { a, b } => {
            if !(a.is_finite() && a >= 0.0) {
                return invalid(format!("shift a = {a} must be finite and ≥ 0"));
            }
            if !(b.is_finite() && b > 0.0) {
                return invalid(format!("exponent b = {b} must be finite and > 0"));
            }
            if a == 0.0 && b >= half {
                return invalid(format!("a = 0 requires b < p/2 = {half}; marginal is not σ-finite"));
            }
            if a > 0.0 && b > half {
                return invalid(format!("a > 0 requires b ≤ p/2 = {half}; the prior is proper"));
            }
            let strong = spec.p >= 3 && b >= half - 1.0 && (if a > 0.0 { b <= half } else { b < half });
            Classification::Valid {
                strong_range: strong,
            }
        }
    }
}

/// `g₀(z) = (a + z)^{−b}` (or 1 for the flat prior).
pub fn g0(z: f64, spec: &PriorSpec) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::domain("g0", format!("z = {z} must be ≥ 0")));
    }
    if let PriorFamily::Power { a, .. } = spec.family {
        if a == 0.0 && z == 0.0 {
            return Err(Error::domain("g0", "pole at z = 0 when a = 0"));
        }
    }
    Ok(spec.ln_g0(z).exp())
}

/// Density of the radial mixing measure `s(dβ)`: the prior pushed forward
/// through `θ ↦ ‖θ‖²`, i.e. `π^{p/2}/Γ(p/2) · g₀(β) β^{p/2−1}`.
pub fn s_density(beta: f64, spec: &PriorSpec) -> f64 {
    if !(beta > 0.0) {
        return 0.0;
    }
    ln_s_density(beta, spec).exp()
}

pub(crate) fn ln_s_density(beta: f64, spec: &PriorSpec) -> f64 {
    let h = spec.half_p();
    spec.p as f64 * LN_SQRT_PI - ln_gamma_unchecked(h) + spec.ln_g0(beta) + (h - 1.0) * beta.ln()
}
