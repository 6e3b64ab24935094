//! Versioned JSON run configuration.

use std::path::{Path, PathBuf};

use dkpp_core::kernel::{build_kernel, load_profile_csv};
use dkpp_core::{
    Grid, InitialGuess, KernelKind, KernelSpec, NonlinearitySpec, ProblemSpec, RateKind, SolveConfig,
    SourceProfile, TimeWindow, URange,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub problem: ProblemParams,
    pub grid: GridParams,
    pub window: WindowParams,
    pub kernel: KernelConfig,
    pub nonlinearity: NonlinearityConfig,
    pub initial_condition: InitialConditionConfig,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub verification: VerificationParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Directory that relative data paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    /// Admit `α = 1` for closed-form cross-checks.
    #[serde(default)]
    pub oracle_mode: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub half_width: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowParams {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Gaussian {
        sigma: f64,
        #[serde(default = "one")]
        scale: f64,
        /// Rescale so that `Q` equals this value; overrides `scale`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_q: Option<f64>,
    },
    Bump {
        width: f64,
        #[serde(default = "one")]
        scale: f64,
        /// Rescale so that `Q` equals this value; overrides `scale`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_q: Option<f64>,
    },
    SincSquared {
        bandwidth: f64,
        #[serde(default = "one")]
        scale: f64,
        /// Rescale so that `Q` equals this value; overrides `scale`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_q: Option<f64>,
    },
    Laplace {
        #[serde(default = "one")]
        scale: f64,
    },
    Tabulated {
        path: PathBuf,
        #[serde(default = "one")]
        scale: f64,
        /// Rescale so that `Q` equals this value; overrides `scale`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_q: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateConfig {
    Linear { c: f64 },
    Saturating { k: f64 },
    Sine { k: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    Gaussian { amplitude: f64, width: f64, center: f64 },
    Band { amplitude: f64, p_lo: f64, p_hi: f64 },
    Tabulated { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredConstants {
    pub k: f64,
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub rate: RateConfig,
    /// The offset `h`; sampled `|source|` becomes the growth offset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared: Option<DeclaredConstants>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConditionConfig {
    /// `A·exp(-((x-c)/w)²)`
    Gaussian {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// `A·sin(p x)`; `p` should be a grid frequency.
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        frequency: f64,
    },
    Tabulated { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GuessConfig {
    #[default]
    ConstantExtension,
    Zero,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub tolerance: f64,
    pub max_iter: usize,
    pub slack: f64,
    pub initial_guess: GuessConfig,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            tolerance: dkpp_core::picard::DEFAULT_TOLERANCE,
            max_iter: dkpp_core::picard::DEFAULT_MAX_ITER,
            slack: dkpp_core::picard::DEFAULT_SLACK,
            initial_guess: GuessConfig::ConstantExtension,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerificationParams {
    pub samples: usize,
    pub u_min: f64,
    pub u_max: f64,
    /// Random field pairs for contraction checks.
    pub pairs: usize,
}

impl Default for VerificationParams {
    fn default() -> Self {
        Self { samples: dkpp_core::nonlinearity::DEFAULT_SWEEP_SAMPLES, u_min: -10.0, u_max: 10.0, pairs: 20 }
    }
}

/// Problem objects built from a validated config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub grid: Grid,
    pub window: TimeWindow,
    pub problem: ProblemSpec,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field-level checks that do not need the numerical objects.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Validation(format!("{field}: {msg}")));
        if self.schema_version != SCHEMA_VERSION {
            return bad("schema_version", format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let p = &self.problem;
        let alpha_ok = if p.oracle_mode { p.alpha > 0.0 && p.alpha <= 1.0 } else { p.alpha > 0.0 && p.alpha < 1.0 };
        if !alpha_ok {
            let range = if p.oracle_mode { "(0, 1]" } else { "(0, 1)" };
            return bad("problem.alpha", format!("{} is outside {range}", p.alpha));
        }
        if !(p.a.is_finite() && p.a >= 0.0) {
            return bad("problem.a", format!("must be finite and >= 0, got {}", p.a));
        }
        if !p.b.is_finite() {
            return bad("problem.b", format!("must be finite, got {}", p.b));
        }
        if !(self.grid.half_width.is_finite() && self.grid.half_width > 0.0) {
            return bad("grid.half_width", format!("must be positive, got {}", self.grid.half_width));
        }
        if self.grid.n_points < 8 || !self.grid.n_points.is_multiple_of(2) {
            return bad("grid.n_points", format!("must be even and >= 8, got {}", self.grid.n_points));
        }
        if !(self.window.horizon.is_finite() && self.window.horizon > 0.0) {
            return bad("window.horizon", format!("must be positive, got {}", self.window.horizon));
        }
        if self.window.steps == 0 {
            return bad("window.steps", "must be at least 1".into());
        }
        let s = &self.solver;
        if !(s.tolerance.is_finite() && s.tolerance > 0.0) {
            return bad("solver.tolerance", format!("must be positive, got {}", s.tolerance));
        }
        if s.max_iter == 0 {
            return bad("solver.max_iter", "must be at least 1".into());
        }
        if !(s.slack.is_finite() && s.slack >= 0.0) {
            return bad("solver.slack", format!("must be >= 0, got {}", s.slack));
        }
        let v = &self.verification;
        if v.samples < 1000 {
            return bad("verification.samples", format!("must be at least 1000, got {}", v.samples));
        }
        if !(v.u_min < v.u_max && v.u_min.is_finite() && v.u_max.is_finite()) {
            return bad("verification.u_min", format!("range [{}, {}] is empty", v.u_min, v.u_max));
        }
        if v.pairs == 0 {
            return bad("verification.pairs", "must be at least 1".into());
        }
        if let Some(d) = self.nonlinearity.declared {
            if !(d.k.is_finite() && d.k >= 0.0 && d.l.is_finite() && d.l >= 0.0) {
                return bad("nonlinearity.declared", format!("k and l must be finite and >= 0, got k={}, l={}", d.k, d.l));
            }
        }
        Ok(())
    }

    fn resolve_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn build_grid(&self) -> Result<Grid, CliError> {
        Grid::new(self.grid.half_width, self.grid.n_points).map_err(|e| CliError::Validation(format!("grid: {e}")))
    }

    pub fn build_window(&self) -> Result<TimeWindow, CliError> {
        TimeWindow::new(self.window.horizon, self.window.steps).map_err(|e| CliError::Validation(format!("window: {e}")))
    }

    pub fn build_kernel(&self, grid: &Grid) -> Result<KernelSpec, CliError> {
        let (kind, scale, target_q) = match &self.kernel {
            KernelConfig::Gaussian { sigma, scale, target_q } => (KernelKind::Gaussian { sigma: *sigma }, *scale, *target_q),
            KernelConfig::Bump { width, scale, target_q } => (KernelKind::Bump { width: *width }, *scale, *target_q),
            KernelConfig::SincSquared { bandwidth, scale, target_q } => {
                (KernelKind::SincSquared { bandwidth: *bandwidth }, *scale, *target_q)
            }
            KernelConfig::Laplace { scale } => (KernelKind::Laplace, *scale, None),
            KernelConfig::Tabulated { path, scale, target_q } => {
                let samples = load_profile_csv(&self.resolve_path(path), grid).map_err(|e| CliError::Validation(format!("kernel.path: {e}")))?;
                (KernelKind::Tabulated { samples }, *scale, *target_q)
            }
        };
        let scale = match target_q {
            None => scale,
            Some(q) if q.is_finite() && q > 0.0 => {
                let unit = build_kernel(kind.clone(), 1.0, grid).map_err(|e| CliError::Validation(format!("kernel: {e}")))?;
                if unit.q() <= 0.0 {
                    return Err(CliError::Validation("kernel.target_q: kernel has Q = 0 and cannot be rescaled".into()));
                }
                q / unit.q()
            }
            Some(q) => return Err(CliError::Validation(format!("kernel.target_q: must be positive and finite, got {q}"))),
        };
        build_kernel(kind, scale, grid).map_err(|e| CliError::Validation(format!("kernel: {e}")))
    }

    pub fn build_nonlinearity(&self, grid: &Grid) -> Result<NonlinearitySpec, CliError> {
        let n = &self.nonlinearity;
        let rate = match n.rate {
            RateConfig::Linear { c } => RateKind::Linear { c },
            RateConfig::Saturating { k } => RateKind::Saturating { k },
            RateConfig::Sine { k } => RateKind::Sine { k },
        };
        let source = match &n.source {
            None => None,
            Some(SourceConfig::Gaussian { amplitude, width, center }) => {
                Some(SourceProfile::Gaussian { amplitude: *amplitude, width: *width, center: *center })
            }
            Some(SourceConfig::Band { amplitude, p_lo, p_hi }) => {
                Some(SourceProfile::Band { amplitude: *amplitude, p_lo: *p_lo, p_hi: *p_hi })
            }
            Some(SourceConfig::Tabulated { path }) => {
                let samples = load_profile_csv(&self.resolve_path(path), grid)
                    .map_err(|e| CliError::Validation(format!("nonlinearity.source.path: {e}")))?;
                Some(SourceProfile::Tabulated { samples })
            }
        };
        NonlinearitySpec::new(rate, source, grid, n.declared.map(|d| (d.k, d.l)))
            .map_err(|e| CliError::Validation(format!("nonlinearity: {e}")))
    }

    pub fn build_initial_condition(&self, grid: &Grid) -> Result<Vec<f64>, CliError> {
        let u0 = match &self.initial_condition {
            InitialConditionConfig::Gaussian { amplitude, width, center } => {
                if !(width.is_finite() && *width > 0.0) {
                    return Err(CliError::Validation(format!("initial_condition.width: must be positive, got {width}")));
                }
                grid.points()
                    .iter()
                    .map(|x| {
                        let s = (x - center) / width;
                        amplitude * (-s * s).exp()
                    })
                    .collect()
            }
            InitialConditionConfig::Sine { amplitude, frequency } => {
                grid.points().iter().map(|x| amplitude * (frequency * x).sin()).collect()
            }
            InitialConditionConfig::Tabulated { path } => load_profile_csv(&self.resolve_path(path), grid)
                .map_err(|e| CliError::Validation(format!("initial_condition.path: {e}")))?,
        };
        Ok(u0)
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let grid = self.build_grid()?;
        let window = self.build_window()?;
        let kernel = self.build_kernel(&grid)?;
        let nonlinearity = self.build_nonlinearity(&grid)?;
        let u0 = self.build_initial_condition(&grid)?;
        let p = self.problem;
        let problem = if p.oracle_mode {
            ProblemSpec::oracle_mode(p.alpha, p.a, p.b, kernel, nonlinearity, u0)
        } else {
            ProblemSpec::new(p.alpha, p.a, p.b, kernel, nonlinearity, u0)
        }
        .map_err(|e| CliError::Validation(format!("problem: {e}")))?;
        Ok(Resolved { grid, window, problem })
    }

    pub fn u_range(&self) -> URange {
        URange { lo: self.verification.u_min, hi: self.verification.u_max }
    }

    pub fn solve_config(&self, allow_uncertified: bool, seed: u64) -> SolveConfig {
        let s = &self.solver;
        SolveConfig {
            tolerance: s.tolerance,
            max_iter: s.max_iter,
            slack: s.slack,
            allow_uncertified,
            initial_guess: match s.initial_guess {
                GuessConfig::ConstantExtension => InitialGuess::ConstantExtension,
                GuessConfig::Zero => InitialGuess::Zero,
                GuessConfig::Random => InitialGuess::Random { seed, amplitude: 1.0 },
            },
        }
    }
}
