//! The run configuration: a `--config` JSON file merged under explicit flags.

use std::path::{Path, PathBuf};

use recurlab_core::chains::ChainKind;
use recurlab_core::grid::{GridSpec, Spacing};
use recurlab_core::{PriorSpec, SeriesCtl};
use serde::{Deserialize, Serialize};

use crate::args::{Command, CommonArgs, EpsArgs, Format, GridArgs, PathArgs, PriorArgs};
use crate::CliError;

/// A dimension, or a list of them for `dichotomy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dims {
    One(u32),
    Many(Vec<u32>),
}

impl Dims {
    fn list(&self) -> Vec<u32> {
        match self {
            Dims::One(p) => vec![*p],
            Dims::Many(v) => v.clone(),
        }
    }
}

macro_rules! run_config {
    ($($(#[$doc:meta])* $field:ident: $ty:ty,)*) => {
        /// Every field is optional. After a run the report echoes the
        /// configuration with every default it used filled in.
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct RunConfig {
            $($(#[$doc])* #[serde(skip_serializing_if = "Option::is_none")] pub $field: Option<$ty>,)*
        }

        impl RunConfig {
            /// Fields set in `top` win over fields set in `self`.
            pub fn overlay(self, top: RunConfig) -> RunConfig {
                RunConfig { $($field: top.$field.or(self.$field),)* }
            }
        }
    };
}

run_config! {
    /// Subcommand the file is meant for; must match the one invoked.
    command: String,
    p: Dims,
    a: f64,
    b: f64,
    flat: bool,
    eta_min: f64,
    eta_max: f64,
    points: usize,
    spacing: Spacing,
    eps: f64,
    chain: ChainKind,
    m: f64,
    start: f64,
    n_paths: usize,
    max_steps: u64,
    x_norms: Vec<f64>,
    samples: usize,
    seed: u64,
    rel_tol: f64,
    max_terms: usize,
    quad_panels: usize,
    out: PathBuf,
    format: Format,
}

pub const DEFAULT_P: u32 = 3;
pub const DEFAULT_A: f64 = 1.0;
pub const DEFAULT_B: f64 = 1.0;
pub const DEFAULT_PATHS: usize = 1_000;
pub const DEFAULT_MAX_STEPS: u64 = 100_000;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_X_NORMS: [f64; 3] = [0.5, 2.0, 5.0];
pub const DEFAULT_DIMS: [u32; 2] = [1, 3];
pub const DEFAULT_WALK_START: f64 = 5.0;
pub const DEFAULT_WALK_M: f64 = 1.0;

fn take<T: Clone>(slot: &mut Option<T>, default: T) -> T {
    slot.get_or_insert(default).clone()
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    /// The flags given on the command line, as a configuration.
    pub fn from_command(cmd: &Command) -> (RunConfig, &CommonArgs) {
        let mut c = RunConfig::default();
        let common = match cmd {
            Command::Validate { prior, common } => {
                c.set_prior(prior);
                common
            }
            Command::Moments { prior, grid, common } | Command::Asymptotics { prior, grid, common } => {
                c.set_prior(prior);
                c.set_grid(grid);
                common
            }
            Command::Superharmonic {
                prior,
                grid,
                eps,
                common,
            }
            | Command::Verdict {
                prior,
                grid,
                eps,
                common,
            } => {
                c.set_prior(prior);
                c.set_grid(grid);
                c.set_eps(eps);
                common
            }
            Command::Simulate {
                prior,
                paths,
                chain,
                grid,
                eps,
                common,
            } => {
                c.set_prior(prior);
                c.set_paths(paths);
                c.chain = chain.map(Into::into);
                c.set_grid(grid);
                c.set_eps(eps);
                common
            }
            Command::Dichotomy { p, paths, common } => {
                if !p.is_empty() {
                    c.p = Some(Dims::Many(p.clone()));
                }
                c.set_paths(paths);
                common
            }
            Command::Consistency {
                prior,
                x_norms,
                samples,
                common,
            } => {
                c.set_prior(prior);
                if !x_norms.is_empty() {
                    c.x_norms = Some(x_norms.clone());
                }
                c.samples = *samples;
                common
            }
        };
        c.out = common.out.clone();
        c.format = common.format;
        c.seed = common.seed;
        c.rel_tol = common.rel_tol;
        c.max_terms = common.max_terms;
        c.quad_panels = common.quad_panels;
        (c, common)
    }

    fn set_prior(&mut self, a: &PriorArgs) {
        self.p = a.p.map(Dims::One);
        self.a = a.a;
        self.b = a.b;
        self.flat = a.flat.then_some(true);
    }

    fn set_grid(&mut self, g: &GridArgs) {
        self.eta_min = g.eta_min;
        self.eta_max = g.eta_max;
        self.points = g.points;
        self.spacing = g.spacing.map(Into::into);
    }

    fn set_eps(&mut self, e: &EpsArgs) {
        self.eps = e.eps;
    }

    fn set_paths(&mut self, p: &PathArgs) {
        self.m = p.m;
        self.start = p.start;
        self.n_paths = p.paths;
        self.max_steps = p.max_steps;
    }

    /// The prior, without checking its validity.
    pub fn prior(&mut self) -> Result<PriorSpec, CliError> {
        let p = match take(&mut self.p, Dims::One(DEFAULT_P)) {
            Dims::One(p) => p,
            Dims::Many(_) => return Err(bad("p must be a single dimension for this command")),
        };
        if p == 0 {
            return Err(bad("p must be ≥ 1"));
        }
        if take(&mut self.flat, false) {
            if self.a.is_some() || self.b.is_some() {
                return Err(bad("flat prior takes no a or b"));
            }
            return Ok(PriorSpec::flat(p));
        }
        self.flat = None;
        let (a, b) = (take(&mut self.a, DEFAULT_A), take(&mut self.b, DEFAULT_B));
        if !(a.is_finite() && b.is_finite()) {
            return Err(bad("a and b must be finite"));
        }
        Ok(PriorSpec::power(p, a, b))
    }

    /// The prior, rejected unless it is a valid prior for the chains.
    pub fn valid_prior(&mut self) -> Result<PriorSpec, CliError> {
        let spec = self.prior()?;
        let class = spec.classify();
        if !class.is_valid() {
            return Err(bad(format!("{spec}: {class}")));
        }
        Ok(spec)
    }

    pub fn dims(&mut self) -> Result<Vec<u32>, CliError> {
        let dims = take(&mut self.p, Dims::Many(DEFAULT_DIMS.to_vec())).list();
        if dims.is_empty() || dims.contains(&0) {
            return Err(bad("dimensions must be ≥ 1"));
        }
        Ok(dims)
    }

    pub fn grid(&mut self) -> Result<GridSpec, CliError> {
        let g = GridSpec {
            min: take(&mut self.eta_min, 1.0),
            max: take(&mut self.eta_max, 1e6),
            points: take(&mut self.points, 61),
            spacing: take(&mut self.spacing, Spacing::Log),
        };
        g.validate().map_err(|e| bad(e.to_string()))?;
        if g.min <= 0.0 {
            return Err(bad("eta_min must be positive"));
        }
        Ok(g)
    }

    pub fn eps(&mut self) -> Result<f64, CliError> {
        let eps = take(&mut self.eps, 0.5);
        if !(eps > 0.0 && eps < 1.0) {
            return Err(bad(format!("eps = {eps} not in (0, 1)")));
        }
        Ok(eps)
    }

    pub fn ctl(&mut self) -> Result<SeriesCtl, CliError> {
        let d = SeriesCtl::default();
        SeriesCtl::new(
            take(&mut self.rel_tol, d.rel_tol),
            take(&mut self.max_terms, d.max_terms),
            take(&mut self.quad_panels, d.quad_panels),
        )
        .map_err(|e| bad(e.to_string()))
    }

    pub fn seed(&mut self) -> u64 {
        take(&mut self.seed, 0)
    }

    pub fn n_paths(&mut self) -> Result<usize, CliError> {
        let n = take(&mut self.n_paths, DEFAULT_PATHS);
        if n == 0 {
            return Err(bad("paths must be ≥ 1"));
        }
        Ok(n)
    }

    pub fn max_steps(&mut self) -> Result<u64, CliError> {
        let n = take(&mut self.max_steps, DEFAULT_MAX_STEPS);
        if n == 0 {
            return Err(bad("max_steps must be ≥ 1"));
        }
        Ok(n)
    }

    pub fn positive(slot: &mut Option<f64>, default: f64, name: &str) -> Result<f64, CliError> {
        let v = take(slot, default);
        if !(v > 0.0 && v.is_finite()) {
            return Err(bad(format!("{name} = {v} must be positive")));
        }
        Ok(v)
    }

    pub fn x_norms(&mut self) -> Result<Vec<f64>, CliError> {
        let v = take(&mut self.x_norms, DEFAULT_X_NORMS.to_vec());
        if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(bad("x_norms must be finite and non-negative"));
        }
        Ok(v)
    }

    pub fn samples(&mut self) -> Result<usize, CliError> {
        let n = take(&mut self.samples, DEFAULT_SAMPLES);
        if n < 2 {
            return Err(bad("samples must be ≥ 2"));
        }
        Ok(n)
    }
}
