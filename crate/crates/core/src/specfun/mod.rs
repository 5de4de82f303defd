//! Special functions, quadrature and random-variate kernels.

mod gamma;
mod ncx2;
mod poisson;
pub mod quad;
mod rng;
mod sphere;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gamma::log_gamma;
pub(crate) use gamma::{ln_gamma_ratio, ln_gamma_unchecked};
pub use ncx2::{ncx2_ln_pdf, ncx2_moments, ncx2_pdf, ncx2_sample};
pub(crate) use ncx2::ln_ncx2_pdf_raw;
pub use poisson::{poisson_weights, PoissonWindow};
pub(crate) use poisson::{ln_dpois_raw, poisson_window};
pub use rng::RngStream;
pub use sphere::{sphere_uniform, vmf_direction};

/// Numerical control shared by every series and quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesCtl {
    /// Relative tolerance, in (0, 1).
    pub rel_tol: f64,
    /// Cap on the number of series terms.
    pub max_terms: usize,
    /// Initial number of quadrature panels per integral.
    pub quad_panels: usize,
}

impl SeriesCtl {
    pub fn new(rel_tol: f64, max_terms: usize, quad_panels: usize) -> Result<Self> {
        let ctl = Self {
            rel_tol,
            max_terms,
            quad_panels,
        };
        ctl.validate()?;
        Ok(ctl)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::domain("SeriesCtl", format!("rel_tol = {} not in (0, 1)", self.rel_tol)));
        }
        if self.max_terms == 0 || self.quad_panels == 0 {
            return Err(Error::domain("SeriesCtl", "max_terms and quad_panels must be ≥ 1"));
        }
        Ok(())
    }

    pub(crate) fn quad(&self, abs_tol: f64) -> quad::QuadSettings {
        quad::QuadSettings::new(self.rel_tol, abs_tol, self.quad_panels)
    }
}

impl Default for SeriesCtl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_terms: 1_000_000,
            quad_panels: 16,
        }
    }
}
