//! Run configuration: a single JSON document describing the grid, material,
//! load schedule, initial state, Eulerian audit resolution, optimizer
//! settings, time partition and seed. Parsing either yields a fully valid
//! configuration or fails with a field diagnostic.

use crate::energy::{LoadSchedule, MaterialModel, TimeProfile};
use crate::fields::{BoxFace, DeformationField, Grid, MagnetizationField, State};
use crate::fixtures;
use crate::kinematics::{Mat3, Vec3};
use crate::optimizer::OptimizerConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Fixture(#[from] fixtures::FixtureError),
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub box_min: [f64; 3],
    pub box_max: [f64; 3],
    pub dims: [usize; 3],
    pub dirichlet_faces: Vec<BoxFace>,
    #[serde(default)]
    pub neumann_faces: Vec<BoxFace>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            box_min: [0.0; 3],
            box_max: [1.0; 3],
            dims: [4; 3],
            dirichlet_faces: vec![BoxFace::ZMin],
            neumann_faces: vec![BoxFace::ZMax],
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, ConfigError> {
        for d in 0..3 {
            if self.box_max[d] <= self.box_min[d] {
                return Err(invalid("grid.box_max", "box must have positive extent"));
            }
            if self.dims[d] == 0 {
                return Err(invalid("grid.dims", "at least one cell per axis"));
            }
        }
        if self.dirichlet_faces.is_empty() {
            return Err(invalid(
                "grid.dirichlet_faces",
                "the Dirichlet part of the boundary must have positive area (H^2(Gamma) > 0)",
            ));
        }
        for f in &self.dirichlet_faces {
            if self.neumann_faces.contains(f) {
                return Err(invalid(
                    "grid.neumann_faces",
                    format!("face {f:?} is both Dirichlet and Neumann"),
                ));
            }
        }
        Ok(Grid::new(
            self.box_min,
            self.box_max,
            self.dims,
            self.dirichlet_faces.clone(),
            self.neumann_faces.clone(),
        ))
    }
}

/// Boundary/initial deformation datum.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DeformationSpec {
    #[default]
    Identity,
    /// `y(x) = A x + b`.
    Affine { a: [[f64; 3]; 3], b: [f64; 3] },
}

impl DeformationSpec {
    pub fn build(&self, grid: &Grid) -> Result<DeformationField, ConfigError> {
        match self {
            DeformationSpec::Identity => Ok(DeformationField::identity(grid)),
            DeformationSpec::Affine { a, b } => {
                let mat = Mat3::from_fn(|i, j| a[i][j]);
                if mat.determinant() <= 0.0 {
                    return Err(invalid(
                        "initial.deformation",
                        "affine datum must be orientation-preserving (det A > 0)",
                    ));
                }
                Ok(DeformationField::from_map(grid, |x| {
                    mat * x + Vec3::from(*b)
                }))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnetizationSpec {
    Constant([f64; 3]),
    /// In-plane helix of the given frequency about the z axis.
    Helix { omega: f64 },
}

impl Default for MagnetizationSpec {
    fn default() -> Self {
        MagnetizationSpec::Constant([0.0, 0.0, 1.0])
    }
}

impl MagnetizationSpec {
    pub fn build(&self, grid: &Grid) -> Result<MagnetizationField, ConfigError> {
        match self {
            MagnetizationSpec::Constant(v) => {
                let v = Vec3::from(*v);
                if v.norm() == 0.0 {
                    return Err(invalid("initial.mu", "magnetization must be nonzero"));
                }
                Ok(MagnetizationField::constant(grid, v))
            }
            MagnetizationSpec::Helix { omega } => {
                let omega = *omega;
                MagnetizationField::from_map(grid, |x| {
                    Vec3::new((omega * x.z).cos(), (omega * x.z).sin(), 0.0)
                })
                .map_err(|e| invalid("initial.mu", e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct InitialSpec {
    #[serde(default)]
    pub deformation: DeformationSpec,
    #[serde(default)]
    pub mu: MagnetizationSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct LoadsSpec {
    #[serde(default)]
    pub body: Option<TimeProfile>,
    #[serde(default)]
    pub surface: Option<TimeProfile>,
    #[serde(default)]
    pub field: Option<TimeProfile>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub steps: usize,
    pub t_end: f64,
}

fn default_eulerian_resolution() -> usize {
    32
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Build the state from a named fixture instead of grid + initial.
    #[serde(default)]
    pub fixture: Option<String>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub material: MaterialModel,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub loads: LoadsSpec,
    #[serde(default)]
    pub partition: Option<PartitionSpec>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_eulerian_resolution")]
    pub eulerian_resolution: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            fixture: None,
            grid: GridSpec::default(),
            material: MaterialModel::default(),
            initial: InitialSpec::default(),
            loads: LoadsSpec::default(),
            partition: None,
            optimizer: OptimizerConfig::default(),
            eulerian_resolution: default_eulerian_resolution(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid.build()?;
        self.material
            .validate()
            .map_err(|m| invalid("material", m))?;
        self.optimizer
            .validate()
            .map_err(|m| invalid("optimizer", m))?;
        if let Some(p) = &self.partition {
            if p.steps == 0 || p.t_end <= 0.0 {
                return Err(invalid("partition", "needs steps >= 1 and t_end > 0"));
            }
        }
        if self.eulerian_resolution < 8 {
            return Err(invalid("eulerian_resolution", "needs at least 8 voxels"));
        }
        if let Some(name) = &self.fixture {
            if !fixtures::FIXTURE_NAMES.contains(&name.as_str()) {
                return Err(ConfigError::Fixture(
                    fixtures::FixtureError::UnknownFixture(name.clone()),
                ));
            }
        }
        Ok(())
    }

    pub fn t_end(&self) -> f64 {
        self.partition.map(|p| p.t_end).unwrap_or(1.0)
    }

    pub fn load_schedule(&self) -> LoadSchedule {
        LoadSchedule {
            body: self.loads.body.clone(),
            surface: self.loads.surface.clone(),
            field: self.loads.field.clone(),
            t_end: self.t_end(),
        }
    }

    /// Builds the initial state (fixture takes precedence).
    pub fn initial_state(&self) -> Result<State, ConfigError> {
        if let Some(name) = &self.fixture {
            return Ok(fixtures::build(name, self.grid.dims[0])?);
        }
        let grid = self.grid.build()?;
        let y = self.initial.deformation.build(&grid)?;
        let mu = self.initial.mu.build(&grid)?;
        Ok(State { grid, y, mu })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let q = cfg.initial_state().unwrap();
        assert!(q.min_quadrature_det() > 0.0);
    }

    #[test]
    fn empty_dirichlet_names_the_requirement() {
        let cfg = RunConfig {
            grid: GridSpec {
                dirichlet_faces: vec![],
                ..GridSpec::default()
            },
            ..RunConfig::default()
        };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("H^2(Gamma) > 0"), "message: {err}");
    }

    #[test]
    fn roundtrips_through_json() {
        let cfg = RunConfig {
            fixture: Some("helix".into()),
            partition: Some(PartitionSpec {
                steps: 8,
                t_end: 2.0,
            }),
            loads: LoadsSpec {
                field: Some(TimeProfile::PiecewiseLinear(vec![
                    (0.0, [0.0, 0.0, 0.5]),
                    (2.0, [0.0, 0.0, -0.5]),
                ])),
                ..LoadsSpec::default()
            },
            ..RunConfig::default()
        };
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
    }

    #[test]
    fn degenerate_affine_rejected() {
        let cfg = RunConfig {
            initial: InitialSpec {
                deformation: DeformationSpec::Affine {
                    a: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]],
                    b: [0.0; 3],
                },
                ..InitialSpec::default()
            },
            ..RunConfig::default()
        };
        assert!(cfg.initial_state().is_err());
    }

    #[test]
    fn parse_error_carries_location() {
        let err = serde_json::from_str::<RunConfig>("{\n  \"seed\": \"x\"\n}").unwrap_err();
        assert!(err.to_string().contains("line"));
    }
}
