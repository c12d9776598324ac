//! JSON run configuration. Every struct rejects unknown keys so a typo in an
//! experiment sweep fails loudly instead of silently using a default.

use optmix_core::optimize::{OptConfig, OptMode};
use optmix_core::Grid;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub grid: GridSpec,
    pub physics: PhysicsSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub control: ControlSpec,
    #[serde(default)]
    pub optimizer: Option<OptimizerSpec>,
    #[serde(default)]
    pub epsilon_schedule: Option<Vec<f64>>,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_stride() -> usize {
    0 // 0 = first/last only
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    #[serde(rename = "Lx", default = "default_lx")]
    pub lx: f64,
    #[serde(rename = "Ly", default = "default_ly")]
    pub ly: f64,
}

fn default_lx() -> f64 {
    TAU
}

fn default_ly() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSpec {
    pub k: f64,
    pub epsilon: f64,
    pub gamma: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

fn default_cfl() -> f64 {
    0.5
}

/// Initial scalar: a named preset or a snapshot file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Preset(String),
    Snapshot {
        snapshot: String,
    },
}

/// Boundary control used by `simulate` (and as the descent seed).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "lowercase")]
pub enum ControlSpec {
    /// g = 0 on both walls.
    Zero,
    /// g = amplitude on both walls (drives the plug flow amplitude/k).
    Plug { amplitude: f64 },
    /// g = +amplitude bottom, -amplitude top (steady shear drive).
    Shear { amplitude: f64 },
    /// independent uniform samples in [-amplitude, amplitude] per wall point
    /// and time node
    Random { amplitude: f64 },
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec::Zero
    }
}

impl ControlSpec {
    /// Velocity scale used when sizing the time step before any solve.
    pub fn velocity_scale(&self, k: f64) -> f64 {
        match self {
            ControlSpec::Zero => 0.0,
            ControlSpec::Plug { amplitude }
            | ControlSpec::Shear { amplitude }
            | ControlSpec::Random { amplitude } => amplitude.abs() / k,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol_g")]
    pub tol_g: f64,
    #[serde(default = "default_armijo_c1")]
    pub armijo_c1: f64,
    #[serde(default = "default_backtrack")]
    pub backtrack: f64,
    #[serde(default = "default_step0")]
    pub step0: f64,
    #[serde(default = "default_lbfgs_mem")]
    pub lbfgs_mem: usize,
    #[serde(default)]
    pub mode: OptMode,
    #[serde(default = "default_max_backtracks")]
    pub max_backtracks: usize,
}

fn default_max_iters() -> usize {
    100
}
fn default_tol_g() -> f64 {
    1e-6
}
fn default_armijo_c1() -> f64 {
    1e-4
}
fn default_backtrack() -> f64 {
    0.5
}
fn default_step0() -> f64 {
    1.0
}
fn default_lbfgs_mem() -> usize {
    10
}
fn default_max_backtracks() -> usize {
    40
}

impl OptimizerSpec {
    pub fn to_core(&self, seed: u64) -> OptConfig {
        OptConfig {
            max_iters: self.max_iters,
            tol_g: self.tol_g,
            armijo_c1: self.armijo_c1,
            backtrack: self.backtrack,
            step0: self.step0,
            lbfgs_mem: self.lbfgs_mem,
            mode: self.mode,
            max_backtracks: self.max_backtracks,
            seed,
        }
    }
}

impl RunSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.physics.k <= 0.0 {
            return Err(format!("physics.k must be > 0, got {}", self.physics.k));
        }
        if self.physics.epsilon < 0.0 {
            return Err("physics.epsilon must be >= 0".into());
        }
        if self.physics.gamma <= 0.0 {
            return Err("physics.gamma must be > 0".into());
        }
        if self.physics.t_final <= 0.0 {
            return Err("physics.T must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.physics.cfl) || self.physics.cfl == 0.0 {
            return Err(format!(
                "physics.cfl must lie in (0, 1], got {}",
                self.physics.cfl
            ));
        }
        if let InitialSpec::Preset(name) = &self.initial {
            if !matches!(name.as_str(), "stripe" | "checkerboard" | "blob") {
                return Err(format!(
                    "unknown initial preset {name:?}; expected stripe, checkerboard, blob, \
                     or {{\"snapshot\": path}}"
                ));
            }
        }
        if let Some(sched) = &self.epsilon_schedule {
            if sched.iter().any(|&e| e <= 0.0) {
                return Err("epsilon_schedule entries must be > 0".into());
            }
            if sched.windows(2).any(|w| w[1] >= w[0]) {
                return Err("epsilon_schedule must be strictly decreasing".into());
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, String> {
        Grid::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)
            .map_err(|e| format!("invalid grid: {e}"))
    }

    /// The initial scalar on the resolved grid.
    pub fn theta0(&self, grid: Grid) -> Result<optmix_core::ScalarField, String> {
        use optmix_core::ScalarField;
        match &self.initial {
            InitialSpec::Preset(name) => {
                let lx = grid.lx;
                let ly = grid.ly;
                Ok(match name.as_str() {
                    "stripe" => ScalarField::from_fn(grid, |x, _| (TAU * x / lx).sin()),
                    "checkerboard" => ScalarField::from_fn(grid, |x, y| {
                        (TAU * x / lx).sin() * (PI * y / ly).cos()
                    }),
                    "blob" => {
                        let mut f = ScalarField::from_fn(grid, |x, y| {
                            let dx = (x - 0.5 * lx).abs().min(lx - (x - 0.5 * lx).abs());
                            let dy = y - 0.5 * ly;
                            let r2 = (dx * dx + dy * dy) / (0.04 * lx * lx);
                            (-r2).exp().min(0.5)
                        });
                        let mean = f.mean();
                        for v in &mut f.values {
                            *v -= mean;
                        }
                        f
                    }
                    other => return Err(format!("unknown preset {other}")),
                })
            }
            InitialSpec::Snapshot { snapshot } => {
                optmix_core::snapshot::read_scalar(std::path::Path::new(snapshot), grid)
                    .map_err(|e| format!("cannot read initial snapshot {snapshot}: {e}"))
            }
        }
    }
}
