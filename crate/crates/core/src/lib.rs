//! Circular line tracking for a differential-drive robot carrying three
//! downward-looking line cameras.
//!
//! The pipeline, module by module:
//!
//! - [`sensor`]: what each camera reports for a given robot pose and path;
//! - [`estimation`]: path circle, tracking point, heading and tracking errors;
//! - [`controller`]: sliding surfaces and the saturated sliding-mode law;
//! - [`plant`]: wheel map and ground-truth kinematics;
//! - [`sim`], [`metrics`], [`scenario`], [`trace`]: closed-loop runs,
//!   convergence metrics, configuration and CSV output.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod estimation;
pub mod geometry;
pub mod metrics;
pub mod plant;
pub mod scenario;
pub mod sensor;
pub mod sim;
pub mod trace;

pub use controller::{Gains, SlidingSurface};
pub use estimation::ErrorState;
pub use geometry::{Circle, Point2D, Pose2D};
pub use metrics::Convergence;
pub use plant::{ControlCommand, RobotParams, WheelSpeeds};
pub use scenario::{EstimatorMode, ScenarioConfig};
pub use sim::{run_scenario, SimError, Trace, TraceRow};
