//! Scenario configuration, TOML loading and the built-in scenarios.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::Gains;
use crate::geometry::{Circle, Point2D, Pose2D};
use crate::plant::RobotParams;
use crate::sensor::{default_mounts, SensorFrameSpec, SensorMount};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown built-in scenario `{0}`")]
    UnknownScenario(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Where the controller gets its heading and tracking point from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    /// Camera pipeline with a dead-reckoned heading.
    #[default]
    Sensor,
    /// Ground-truth pose; cameras are only used at start-up.
    Oracle,
}

impl FromStr for EstimatorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sensor" => Ok(Self::Sensor),
            "oracle" => Ok(Self::Oracle),
            other => Err(format!(
                "unknown estimator mode `{other}` (expected sensor|oracle)"
            )),
        }
    }
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sensor => "sensor",
            Self::Oracle => "oracle",
        })
    }
}

/// Everything a closed-loop run needs. Defaults reproduce the first built-in
/// scenario (`paper-a`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub params: RobotParams,
    pub path: Circle,
    pub initial_pose: Pose2D,
    pub gains: Gains,
    pub w_ref: f64,
    pub dt: f64,
    pub t_end: f64,
    pub estimator_mode: EstimatorMode,
    pub sensor_spec: SensorFrameSpec,
    /// `None` selects [`default_mounts`] for the configured footprint.
    pub mounts: Option<[SensorMount; 3]>,
    pub seed: u64,
    /// Spacing of rows written to CSV (s).
    pub output_interval: f64,
    /// Optional symmetric wheel-speed limit (rad/s).
    pub wheel_speed_limit: Option<f64>,
    /// Consecutive control steps a lost camera may be bridged before aborting.
    pub max_hold_steps: u32,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "paper-a".to_owned(),
            params: RobotParams::default(),
            path: Circle::new(Point2D::new(2.0, 2.0), 1.0),
            initial_pose: Pose2D::new(1.8, 0.8, 1f64.to_radians()),
            gains: Gains::new(0.01, 0.5, 1.0),
            w_ref: 1.0,
            dt: 1e-3,
            t_end: 15.0,
            estimator_mode: EstimatorMode::Sensor,
            sensor_spec: SensorFrameSpec::default(),
            mounts: None,
            seed: 0,
            output_interval: 0.01,
            wheel_speed_limit: None,
            max_hold_steps: 50,
        }
    }
}

/// Names of the built-in scenarios, in listing order.
pub const BUILTIN_NAMES: [&str; 6] = [
    "paper-a",
    "paper-b1",
    "paper-b2",
    "paper-b3",
    "paper-inside",
    "paper-far",
];

impl ScenarioConfig {
    /// Looks up a built-in scenario by name.
    pub fn builtin(name: &str) -> Result<Self, ConfigError> {
        let base = Self::default();
        let outside = Pose2D::new(1.8, 0.8, 1f64.to_radians());
        let cfg = match name {
            "paper-a" => base,
            "paper-b1" => Self {
                gains: Gains::new(0.05, 0.2, 1.0),
                initial_pose: outside,
                ..base
            },
            "paper-b2" => Self {
                gains: Gains::new(0.01, 0.2, 1.0),
                initial_pose: outside,
                ..base
            },
            "paper-b3" => Self {
                gains: Gains::new(0.1, 0.2, 1.0),
                initial_pose: outside,
                ..base
            },
            "paper-inside" => Self {
                gains: Gains::new(0.3, 1.0, 1.0),
                initial_pose: Pose2D::new(1.8, 1.2, 1f64.to_radians()),
                ..base
            },
            "paper-far" => Self {
                gains: Gains::new(0.21, 0.5, 1.0),
                initial_pose: Pose2D::new(1.5, 0.5, 1f64.to_radians()),
                // the line starts ~0.58 m to the side of the robot
                sensor_spec: SensorFrameSpec::new(1.8, 1.2),
                ..base
            },
            other => return Err(ConfigError::UnknownScenario(other.to_owned())),
        };
        Ok(Self {
            name: name.to_owned(),
            ..cfg
        })
    }

    pub fn builtins() -> Vec<Self> {
        BUILTIN_NAMES
            .iter()
            .map(|n| Self::builtin(n).expect("built-in names are valid"))
            .collect()
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let table: toml::Table = text.parse()?;
        let named = table.contains_key("name");
        let mut cfg: Self = table.try_into()?;
        if !named {
            if let Some(stem) = path.file_stem() {
                cfg.name = stem.to_string_lossy().into_owned();
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// A built-in name or a path to a TOML file.
    pub fn resolve(spec: &str) -> Result<Self, ConfigError> {
        if BUILTIN_NAMES.contains(&spec) {
            return Self::builtin(spec);
        }
        Self::from_file(Path::new(spec))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serialises")
    }

    pub fn resolved_mounts(&self) -> [SensorMount; 3] {
        self.mounts
            .unwrap_or_else(|| default_mounts(&self.sensor_spec, self.params.radius))
    }

    /// Number of integration steps; the trace holds one more row.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        self.params.validate().or_else(invalid)?;
        self.gains.validate().or_else(invalid)?;
        self.sensor_spec.validate().or_else(invalid)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return invalid(format!("t_end must be positive, got {}", self.t_end));
        }
        if !self.w_ref.is_finite() {
            return invalid("w_ref must be finite".to_owned());
        }
        if !(self.path.radius > 0.0) || !self.path.center.is_finite() {
            return invalid("path must be a finite circle with positive radius".to_owned());
        }
        if (self.path.radius - self.params.radius).abs() > 1e-12 * self.params.radius {
            return invalid(format!(
                "path radius {} must equal params.R {}",
                self.path.radius, self.params.radius
            ));
        }
        if !self.initial_pose.is_finite() {
            return invalid("initial_pose must be finite".to_owned());
        }
        if !(self.output_interval > 0.0) {
            return invalid("output_interval must be positive".to_owned());
        }
        if let Some(limit) = self.wheel_speed_limit {
            if !(limit > 0.0) {
                return invalid(format!("wheel_speed_limit must be positive, got {limit}"));
            }
        }
        if let Some(mounts) = &self.mounts {
            for (i, m) in mounts.iter().enumerate() {
                if m.index as usize != i + 1 {
                    return invalid(format!("mount {} has index {}", i + 1, m.index));
                }
                if !(m.d_x.is_finite() && m.d_y.is_finite()) {
                    return invalid(format!("mount {} offsets must be finite", i + 1));
                }
            }
        }
        Ok(())
    }
}

/// One cell of a gain sweep; `phi` falls back to the base scenario's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCell {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    #[serde(default)]
    pub phi: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    gains: Vec<GridCell>,
}

/// Parses a grid file of `[[gains]]` tables.
pub fn parse_grid(text: &str, base_phi: f64) -> Result<Vec<Gains>, ConfigError> {
    let grid: GridFile = toml::from_str(text)?;
    if grid.gains.is_empty() {
        return Err(ConfigError::Invalid("gain grid is empty".to_owned()));
    }
    grid.gains
        .into_iter()
        .map(|c| {
            let g = Gains {
                k1: c.k1,
                k2: c.k2,
                k3: c.k3,
                phi: c.phi.unwrap_or(base_phi),
            };
            g.validate().map_err(ConfigError::Invalid)?;
            Ok(g)
        })
        .collect()
}
