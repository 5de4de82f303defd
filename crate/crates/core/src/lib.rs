//! Numerical laboratory for the recurrence of Markov chains induced by a
//! normal location model and improper priors `dθ / (a + ‖θ‖²)ᵇ`.
//!
//! Recurrence of the chain is a sufficient condition for every formal Bayes
//! estimator of a bounded function to be admissible. The crate computes the
//! ingredients of a superharmonic-function recurrence criterion for the
//! radial ("reduced") chain exactly, and simulates the chains themselves.
//!
//! Modules:
//! - [`specfun`]: log-gamma, Poisson windows, noncentral chi-square, samplers, quadrature.
//! - [`prior`]: the prior family, its validity ranges and radial mixing density.
//! - [`appendix`]: the `w_k`/`φ` machinery and the reduced-chain increment moments.
//! - [`recurrence`]: the drift function `f₀`, threshold search and the verdict.
//! - [`chains`]: exact samplers, hitting times and distributional consistency checks.

pub mod appendix;
pub mod chains;
pub mod error;
pub mod grid;
pub mod prior;
pub mod recurrence;
pub mod specfun;

pub use error::{Error, Result};
pub use prior::{Classification, PriorFamily, PriorSpec};
pub use specfun::{RngStream, SeriesCtl};
