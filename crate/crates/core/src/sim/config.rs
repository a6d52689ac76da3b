use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fields::GridDesc;
use crate::mesh::MovingRegion;
use crate::pressure::{Preconditioner, SolverMode, SolverSettings};
use crate::transport::{Backtrace, DEFAULT_LAYERS};
use crate::{Error, Result, Vec2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    #[serde(default)]
    pub origin: [f64; 2],
}

/// Initial liquid: the union of these shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum LiquidShape {
    Box { min: [f64; 2], max: [f64; 2] },
    Sphere { center: [f64; 2], radius: f64 },
}

impl LiquidShape {
    pub fn signed_distance(&self, x: Vec2) -> f64 {
        match self {
            LiquidShape::Box { min, max } => {
                let c = Vec2::new(0.5 * (min[0] + max[0]), 0.5 * (min[1] + max[1]));
                let half = Vec2::new(0.5 * (max[0] - min[0]), 0.5 * (max[1] - min[1]));
                let q = (x - c).abs() - half;
                let outside = Vec2::new(q.x.max(0.0), q.y.max(0.0)).norm();
                outside + q.x.max(q.y).min(0.0)
            }
            LiquidShape::Sphere { center, radius } => (x - Vec2::new(center[0], center[1])).norm() - radius,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    /// First cell of the window (inclusive).
    pub min: [usize; 2],
    /// One past the last cell.
    pub max: [usize; 2],
    #[serde(default = "both_axes")]
    pub axis_mask: [bool; 2],
    #[serde(default)]
    pub u_g: [f64; 2],
}

fn both_axes() -> [bool; 2] {
    [true, true]
}

impl RegionConfig {
    pub fn to_region(&self) -> MovingRegion {
        MovingRegion::new(self.min, self.max, self.axis_mask, self.u_g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerName {
    Jacobi,
    Ilu0,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative residual of the pressure solve.
    pub solver_tol: f64,
    pub preconditioner: PreconditionerName,
    pub reinit_iterations: usize,
    pub extrapolation_layers: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            solver_tol: 1e-4,
            preconditioner: PreconditionerName::Ilu0,
            reinit_iterations: 10,
            extrapolation_layers: DEFAULT_LAYERS,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BacktraceName {
    #[default]
    Euler,
    Midpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub grid: GridConfig,
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 2],
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_mode")]
    pub mode: SolverMode,
    pub frame_interval: f64,
    pub frames: usize,
    #[serde(default)]
    pub backtrace: BacktraceName,
    #[serde(default)]
    pub liquid: Vec<LiquidShape>,
    #[serde(default)]
    pub regions: Vec<RegionConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_gravity() -> [f64; 2] {
    [0.0, -9.81]
}

fn default_cfl() -> f64 {
    2.0
}

fn default_mode() -> SolverMode {
    SolverMode::FullSecondOrder
}

impl SceneConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SceneConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene config serializes")
    }

    /// SHA-256 of the canonical (re-serialized) config, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        self.desc()?;
        if !(self.cfl.is_finite() && self.cfl > 0.0) {
            return bad("cfl must be positive");
        }
        if !(self.frame_interval.is_finite() && self.frame_interval > 0.0) {
            return bad("frame_interval must be positive");
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return bad("gravity must be finite");
        }
        let t = &self.tolerances;
        if !(t.solver_tol > 0.0 && t.solver_tol < 1.0) {
            return bad("solver_tol must be in (0, 1)");
        }
        if (t.extrapolation_layers as f64) < self.cfl + 1.0 {
            return bad("extrapolation_layers must be at least cfl + 1");
        }
        for s in &self.liquid {
            match s {
                LiquidShape::Box { min, max } if min[0] >= max[0] || min[1] >= max[1] => {
                    return bad("empty liquid box")
                }
                LiquidShape::Sphere { radius, .. } if *radius <= 0.0 => return bad("sphere radius must be positive"),
                _ => {}
            }
        }
        let regions: Vec<MovingRegion> = self.regions.iter().map(RegionConfig::to_region).collect();
        crate::mesh::validate_regions(&self.desc()?, &regions)
    }

    pub fn desc(&self) -> Result<GridDesc> {
        GridDesc::new_2d(self.grid.nx, self.grid.ny, self.grid.dx, self.grid.origin)
    }

    pub fn gravity(&self) -> Vec2 {
        Vec2::new(self.gravity[0], self.gravity[1])
    }

    /// Signed distance of the initial liquid union (negative inside).
    pub fn initial_phi(&self, x: Vec2) -> f64 {
        self.liquid
            .iter()
            .map(|s| s.signed_distance(x))
            .fold(f64::INFINITY, f64::min)
            // no liquid: everything is far from an interface
            .min(1e3)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            tol: self.tolerances.solver_tol,
            preconditioner: match self.tolerances.preconditioner {
                PreconditionerName::Jacobi => Preconditioner::Jacobi,
                PreconditionerName::Ilu0 => Preconditioner::Ilu0,
            },
            ..Default::default()
        }
    }

    pub fn backtrace(&self) -> Backtrace {
        match self.backtrace {
            BacktraceName::Euler => Backtrace::Euler,
            BacktraceName::Midpoint => Backtrace::Midpoint,
        }
    }
}
