//! JSON scenario configuration. Every section rejects unknown keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ObstacleKind, ObstacleSpec};
use crate::kernels::{compute_moments, validate_kernel, KernelProfile, RadialShape};
use crate::nonlinearity::{
    admissible_delta_bound, default_kappa, extend_tilde, make_cubic_bistable, make_shifted, Cubic,
};
use crate::nonlocal_op::OperatorMode;
use crate::solver::InnerSolver;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProblemConfig {
    pub schema_version: u32,
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default)]
    pub kernel: KernelConfig,
    pub nonlinearity: NonlinearityConfig,
    pub obstacle: ObstacleConfig,
    pub epsilon: f64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub mode: OperatorMode,
    #[serde(default)]
    pub auxiliary: AuxiliaryConfig,
    #[serde(default)]
    pub front: FrontConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

fn default_dimension() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct KernelConfig {
    pub shape: RadialShape,
    /// Support radius of the unscaled kernel.
    pub support: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            shape: RadialShape::Tent,
            support: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub theta: f64,
    pub amplitude: f64,
    /// Slope of `f~` near 0; admissible default when absent.
    #[serde(default)]
    pub kappa: Option<f64>,
    /// Shift of the sub-solution reaction; half the admissible bound when absent.
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ObstacleConfig {
    pub kind: ObstacleKind,
    #[serde(default)]
    pub r0: f64,
    #[serde(default)]
    pub r1: f64,
    /// Channel exponent; `N/(N-1)` when absent.
    #[serde(default)]
    pub channel_exponent: Option<f64>,
    /// Flare depth near the annulus boundary; `eps^gamma/4` when absent.
    #[serde(default)]
    pub smoothing: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct GridConfig {
    /// Explicit box half-width `W`; otherwise `W = outer radius + boxSupports * r_eps`.
    pub box_half_width: Option<f64>,
    pub box_supports: f64,
    /// Exactly one of the next three fixes `h`.
    pub spacing: Option<f64>,
    pub cells_per_support: Option<f64>,
    pub cells_per_channel_width: Option<f64>,
    pub max_cells: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            box_half_width: None,
            box_supports: 6.0,
            spacing: None,
            cells_per_support: None,
            cells_per_channel_width: None,
            max_cells: 512,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum AuxiliaryReaction {
    /// `f~`: linear near 0 with slope `-kappa`.
    #[default]
    Tilde,
    /// `f` itself, continued linearly outside `[0,1]`.
    Base,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum BallRadiusRule {
    /// `delta0` from the auxiliary constants.
    #[default]
    Delta0,
    /// `ballFraction * ||w0||`.
    Fraction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct AuxiliaryConfig {
    pub nonlinearity: AuxiliaryReaction,
    pub ball_radius: BallRadiusRule,
    pub ball_fraction: f64,
    /// `R = W - truncationSupports * r_eps`.
    pub truncation_supports: f64,
    /// `sigma = sigmaFraction * sigma_eps`.
    pub sigma_fraction: f64,
    /// Projected-gradient tolerance in units of `eps^2`.
    pub grad_tol: f64,
    pub max_iterations: usize,
    pub step: Option<f64>,
}

impl Default for AuxiliaryConfig {
    fn default() -> Self {
        AuxiliaryConfig {
            nonlinearity: AuxiliaryReaction::Tilde,
            ball_radius: BallRadiusRule::Delta0,
            ball_fraction: 0.75,
            truncation_supports: 2.0,
            sigma_fraction: 0.5,
            grad_tol: 1e-9,
            max_iterations: 50_000,
            step: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct FrontConfig {
    pub widths: f64,
    pub tol: f64,
    pub max_steps: usize,
    pub dt: f64,
}

impl Default for FrontConfig {
    fn default() -> Self {
        let d = crate::construction::FrontOptions::default();
        FrontConfig {
            widths: d.widths,
            tol: d.tol,
            max_steps: d.max_steps,
            dt: d.dt,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct SolverConfig {
    pub k: Option<f64>,
    pub outer_tol: f64,
    pub inner_tol: Option<f64>,
    pub max_outer: usize,
    pub inner_solver: InnerSolver,
    pub max_inner: usize,
    pub sandwich_tol: f64,
    /// `liouvilleFlag` is `min u >= 1 - classificationTol`.
    pub classification_tol: f64,
    /// Outermost ring mean must reach `1 - farFieldTol`.
    pub far_field_tol: f64,
    /// Certification bound on the steady-state residual; `2 h int|grad J| / eps + 1e-8` when absent.
    pub residual_tol: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = crate::solver::SolverOptions::default();
        SolverConfig {
            k: d.k,
            outer_tol: d.outer_tol,
            inner_tol: d.inner_tol,
            max_outer: d.max_outer,
            inner_solver: d.inner_solver,
            max_inner: d.max_inner,
            sandwich_tol: d.sandwich_tol,
            classification_tol: 1e-3,
            far_field_tol: 1e-2,
            residual_tol: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Output directory; `out/<scenario>` when absent. Relative paths resolve against the working directory.
    pub directory: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub poincare_samples: usize,
    pub poincare_cells_per_support: usize,
    pub barrier_samples: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            poincare_samples: 50,
            poincare_cells_per_support: 8,
            barrier_samples: 32,
        }
    }
}

/// Quantities fixed by a validated config, computed without touching the grid.
#[derive(Debug, Clone)]
pub struct Plan {
    pub cubic: Cubic<f64>,
    pub profile: KernelProfile<f64>,
    pub profile_eps: KernelProfile<f64>,
    pub obstacle: ObstacleSpec<f64>,
    pub support_eps: f64,
    pub spacing: f64,
    pub box_half_width: f64,
    pub cells: usize,
    pub kappa: f64,
    pub delta: f64,
    pub r0_star: f64,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .directory
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&self.scenario))
    }

    /// Runs every precondition check of the pipeline and derives the grid.
    pub fn plan(&self) -> Result<Plan> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schemaVersion {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.scenario.is_empty() {
            return Err(Error::Config("scenario name is empty".into()));
        }
        if self.dimension != 2 {
            return Err(Error::Config(format!(
                "dimension {} is not supported: grids are 2D",
                self.dimension
            )));
        }
        let eps = self.epsilon;
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Config(format!("epsilon = {eps} must lie in (0, 1]")));
        }
        let cubic = make_cubic_bistable(self.nonlinearity.theta, self.nonlinearity.amplitude)?;
        let profile = match self.kernel.shape {
            RadialShape::Tent => KernelProfile::tent(2, self.kernel.support),
            RadialShape::Indicator => KernelProfile::indicator(2, self.kernel.support),
        };
        let report = validate_kernel(&profile)?;
        if !report.all_passed() {
            return Err(Error::InvalidProfile(report.failures().join("; ")));
        }
        let moments = compute_moments(&profile, &cubic)?;
        let profile_eps = profile.rescale(eps)?;
        let support_eps = profile_eps.support;

        let kappa = match self.nonlinearity.kappa {
            Some(k) => {
                extend_tilde(&cubic, k)?;
                k
            }
            None => default_kappa(&cubic)?,
        };
        let delta = match self.nonlinearity.delta {
            Some(d) => d,
            None => 0.5 * admissible_delta_bound(&cubic),
        };
        make_shifted(&cubic, delta)?;

        let o = &self.obstacle;
        let mut obstacle = match o.kind {
            ObstacleKind::None => ObstacleSpec::none(),
            ObstacleKind::Ball => ObstacleSpec::ball(o.r0),
            ObstacleKind::Annulus => ObstacleSpec::annulus(o.r0, o.r1),
            ObstacleKind::ChannelAnnulus => ObstacleSpec::channel(o.r0, o.r1, eps),
        };
        if let Some(g) = o.channel_exponent {
            obstacle.channel_exponent = g;
        }
        if let Some(s) = o.smoothing {
            obstacle.smoothing = s;
        }
        obstacle.validate(Some(moments.r0_star), self.dimension)?;
        if o.kind == ObstacleKind::Annulus && o.r1 - o.r0 <= support_eps {
            return Err(Error::Config(format!(
                "annulus width {} must exceed the kernel support {support_eps} to shield the ball",
                o.r1 - o.r0
            )));
        }

        let g = &self.grid;
        let spacing = match (g.spacing, g.cells_per_support, g.cells_per_channel_width) {
            (Some(h), None, None) => h,
            (None, Some(c), None) => support_eps / c,
            (None, None, Some(c)) => {
                if o.kind != ObstacleKind::ChannelAnnulus {
                    return Err(Error::Config(
                        "cellsPerChannelWidth needs a channelAnnulus obstacle".into(),
                    ));
                }
                obstacle.channel_width() / c
            }
            (None, None, None) => support_eps / 8.0,
            _ => {
                return Err(Error::Config(
                    "give at most one of spacing, cellsPerSupport, cellsPerChannelWidth".into(),
                ))
            }
        };
        if !(spacing > 0.0) {
            return Err(Error::Resolution(format!(
                "spacing {spacing} must be positive"
            )));
        }
        let box_half_width = g
            .box_half_width
            .unwrap_or(obstacle.outer_radius() + g.box_supports * support_eps);
        let cells = (2.0 * box_half_width / spacing).round() as usize;
        if cells > g.max_cells {
            return Err(Error::Resolution(format!(
                "{cells} cells per axis exceed maxCells = {}; coarsen the grid or shrink the box",
                g.max_cells
            )));
        }
        let a = &self.auxiliary;
        if !(a.sigma_fraction > 0.0 && a.sigma_fraction < 1.0) {
            return Err(Error::Config(format!(
                "sigmaFraction {} must lie in (0,1)",
                a.sigma_fraction
            )));
        }
        if a.ball_radius == BallRadiusRule::Fraction
            && !(a.ball_fraction > 0.0 && a.ball_fraction < 1.0)
        {
            return Err(Error::Config(format!(
                "ballFraction {} must lie in (0,1) so that v = 0 stays outside the ball",
                a.ball_fraction
            )));
        }
        if o.kind == ObstacleKind::ChannelAnnulus {
            let radius = box_half_width - a.truncation_supports * support_eps;
            if radius <= o.r1 {
                return Err(Error::Config(format!(
                    "truncation radius R = {radius} must exceed R1 = {}",
                    o.r1
                )));
            }
        }
        let s = &self.solver;
        if let Some(k) = s.k {
            if !(k > 0.0) {
                return Err(Error::Config(format!("solver.k = {k} must be positive")));
            }
        }
        if !(s.outer_tol > 0.0
            && s.sandwich_tol >= 0.0
            && s.classification_tol > 0.0
            && s.far_field_tol > 0.0)
        {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if s.max_outer == 0 || s.max_inner == 0 {
            return Err(Error::Config(
                "solver.maxOuter and solver.maxInner must be at least 1".into(),
            ));
        }
        if !(self.front.widths > 0.0 && self.front.dt > 0.0 && self.front.tol > 0.0) {
            return Err(Error::Config(
                "front widths, dt and tol must be positive".into(),
            ));
        }
        Ok(Plan {
            cubic,
            profile,
            profile_eps,
            obstacle,
            support_eps,
            spacing,
            box_half_width,
            cells,
            kappa,
            delta,
            r0_star: moments.r0_star,
        })
    }

    /// Copy with `epsilon` replaced (for sweeps).
    pub fn with_epsilon(&self, eps: f64) -> Self {
        let mut c = self.clone();
        c.epsilon = eps;
        c
    }
}
