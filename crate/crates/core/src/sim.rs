//! Closed-loop simulation driver.
//!
//! Every control period: read the cameras (or the true pose in oracle mode),
//! estimate the tracking point and heading, form the robot-frame errors, run
//! the sliding-mode law, map to wheel speeds, record a [`TraceRow`] and
//! integrate the plant over `dt`.

use thiserror::Error;

use crate::controller::{control, lyapunov, sliding_surface, SlidingSurface};
use crate::estimation::{
    compute_errors, e_cam_from_detection, estimate_circle, init_global_center,
    locate_tracking_point, midpoints_in_robot, step_estimator, CircleEstimate, ErrorState,
    EstimationError, EstimatorState, ReferenceState,
};
use crate::geometry::{wrap_angle, GeometryError, Point2D, Pose2D};
use crate::plant::{
    body_from_wheels, clamp_wheels, integrate_step, wheels_from_body, ControlCommand, WheelSpeeds,
};
use crate::scenario::{ConfigError, EstimatorMode, ScenarioConfig};
use crate::sensor::{detect_line, LineDetection, SensorFrameSpec, SensorMount};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("camera {sensor} does not see the line at t = 0")]
    InitialVisibility { sensor: u8 },
    #[error("camera 2 segment is perpendicular to the heading at t = 0")]
    DegenerateInitialHeading,
    #[error("path looks straight at t = {t:.3} s ({source})")]
    StraightLineDetected {
        t: f64,
        #[source]
        source: GeometryError,
    },
    #[error("line lost for {steps} consecutive steps at t = {t:.3} s")]
    SensorLoss { t: f64, steps: u32 },
}

impl SimError {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 2,
            _ => 3,
        }
    }
}

/// One recorded control period.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceRow {
    pub t: f64,
    pub true_pose: Pose2D,
    pub o_cam: Point2D,
    pub e: ErrorState,
    pub s: SlidingSurface,
    pub cmd: ControlCommand,
    pub wheels: WheelSpeeds,
    /// Lyapunov function value.
    pub v_lyap: f64,
    /// Camera-2 heading error; NaN when unavailable.
    pub e_cam: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub config: ScenarioConfig,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    /// Rows spaced by the configured output interval.
    pub fn decimated(&self) -> impl Iterator<Item = &TraceRow> {
        let stride = ((self.config.output_interval / self.config.dt).round() as usize).max(1);
        self.rows.iter().step_by(stride)
    }
}

fn mix_seed(seed: u64, step: usize, camera: usize) -> u64 {
    // splitmix64 finaliser
    let mut z = seed
        ^ (step as u64)
            .wrapping_mul(3)
            .wrapping_add(camera as u64)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Cameras<'a> {
    cfg: &'a ScenarioConfig,
    mounts: [SensorMount; 3],
    exact: SensorFrameSpec,
}

impl<'a> Cameras<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        Self {
            cfg,
            mounts: cfg.resolved_mounts(),
            exact: SensorFrameSpec {
                quantize: None,
                noise_std: 0.0,
                ..cfg.sensor_spec
            },
        }
    }

    fn read(&self, pose: &Pose2D, step: usize) -> [LineDetection; 3] {
        std::array::from_fn(|i| {
            detect_line(
                &self.cfg.path,
                pose,
                &self.mounts[i],
                &self.cfg.sensor_spec,
                mix_seed(self.cfg.seed, step, i),
            )
        })
    }

    fn read_exact(&self, pose: &Pose2D, camera: usize) -> LineDetection {
        detect_line(&self.cfg.path, pose, &self.mounts[camera], &self.exact, 0)
    }
}

fn true_tracking_point(pose: &Pose2D, radius: f64) -> Point2D {
    pose.position() + Point2D::new(0.0, radius).rotated(pose.theta)
}

fn initial_e_cam(d2: &LineDetection) -> Result<f64, SimError> {
    e_cam_from_detection(d2).map_err(|e| match e {
        EstimationError::MissingDetection(i) => SimError::InitialVisibility { sensor: i },
        _ => SimError::DegenerateInitialHeading,
    })
}

/// Runs one closed-loop scenario and returns the full-rate trace
/// (`steps() + 1` rows, one per control period including `t = 0`).
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Trace, SimError> {
    cfg.validate()?;
    let cams = Cameras::new(cfg);
    let radius = cfg.params.radius;
    let n = cfg.steps();
    let mut pose = cfg.initial_pose.wrapped();

    // Initialisation from the known start pose and the first camera frame.
    let (mut est, mut reference) = match cfg.estimator_mode {
        EstimatorMode::Sensor => {
            let d = cams.read(&pose, 0);
            let m = midpoints_in_robot(&d, &cams.mounts).map_err(|e| match e {
                EstimationError::MissingDetection(i) => SimError::InitialVisibility { sensor: i },
                _ => unreachable!("midpoint mapping only reports missing cameras"),
            })?;
            let circle = estimate_circle(&m).map_err(|e| straight(0.0, e))?;
            let e_cam = initial_e_cam(&d[1])?;
            let reference = ReferenceState {
                center_global: init_global_center(&pose, &circle),
                w_ref: cfg.w_ref,
                theta_ref: wrap_angle(pose.theta + e_cam),
            };
            let est = EstimatorState {
                theta_hat: pose.theta,
                o_cam_global: locate_tracking_point(
                    reference.center_global,
                    pose.theta,
                    &circle,
                    radius,
                ),
                circle,
                e_cam,
            };
            (est, reference)
        }
        EstimatorMode::Oracle => {
            let e_cam = initial_e_cam(&cams.read_exact(&pose, 1))?;
            let reference = ReferenceState {
                center_global: cfg.path.center,
                w_ref: cfg.w_ref,
                theta_ref: wrap_angle(pose.theta + e_cam),
            };
            let est = EstimatorState {
                theta_hat: pose.theta,
                o_cam_global: true_tracking_point(&pose, radius),
                circle: CircleEstimate {
                    center_robot: crate::geometry::inverse_transform(cfg.path.center, &pose),
                    radius,
                },
                e_cam,
            };
            (est, reference)
        }
    };

    let mut rows = Vec::with_capacity(n + 1);
    let mut cmd = ControlCommand::ZERO;
    let mut holding = 0u32;

    for k in 0..=n {
        let t = k as f64 * cfg.dt;
        let e = compute_errors(&reference, est.o_cam_global, est.theta_hat);
        let s = sliding_surface(&e);

        if holding == 0 {
            // a rank-deficient input matrix keeps the previous command
            if let Ok(u) = control(&e, &cfg.params, reference.w_ref, &cfg.gains) {
                cmd = u;
            }
        }
        let mut wheels = wheels_from_body(&cmd, &cfg.params);
        if let Some(limit) = cfg.wheel_speed_limit {
            wheels = clamp_wheels(wheels, limit);
            cmd = body_from_wheels(&wheels, &cfg.params);
        }

        rows.push(TraceRow {
            t,
            true_pose: pose,
            o_cam: est.o_cam_global,
            e,
            s,
            cmd,
            wheels,
            v_lyap: lyapunov(&s),
            e_cam: est.e_cam,
        });
        if k == n {
            break;
        }

        pose = integrate_step(&pose, &cmd, cfg.dt);
        let t_next = (k + 1) as f64 * cfg.dt;

        match cfg.estimator_mode {
            EstimatorMode::Sensor => {
                let d = cams.read(&pose, k + 1);
                let up = step_estimator(&est, &d, &cams.mounts, cmd.w, cfg.dt, &reference, radius);
                match up.fault {
                    Some(EstimationError::MissingDetection(_)) => {
                        holding += 1;
                        if holding > cfg.max_hold_steps {
                            return Err(SimError::SensorLoss {
                                t: t_next,
                                steps: holding,
                            });
                        }
                    }
                    Some(EstimationError::CollinearPoints(g)) => {
                        return Err(SimError::StraightLineDetected {
                            t: t_next,
                            source: g,
                        })
                    }
                    Some(EstimationError::DegenerateSegment) | None => holding = 0,
                }
                est = up.state;
                reference = up.reference;
            }
            EstimatorMode::Oracle => {
                reference = reference.advanced(cfg.dt);
                est = EstimatorState {
                    theta_hat: pose.theta,
                    o_cam_global: true_tracking_point(&pose, radius),
                    circle: CircleEstimate {
                        center_robot: crate::geometry::inverse_transform(cfg.path.center, &pose),
                        radius,
                    },
                    e_cam: e_cam_from_detection(&cams.read_exact(&pose, 1)).unwrap_or(f64::NAN),
                };
            }
        }
    }

    Ok(Trace {
        config: cfg.clone(),
        rows,
    })
}

fn straight(t: f64, e: EstimationError) -> SimError {
    match e {
        EstimationError::CollinearPoints(source) => SimError::StraightLineDetected { t, source },
        _ => unreachable!("circle fit only reports collinearity"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::Gains;

    fn short(mut cfg: ScenarioConfig) -> ScenarioConfig {
        cfg.t_end = 0.5;
        cfg
    }

    #[test]
    fn trace_has_one_row_per_period() {
        let tr = run_scenario(&short(ScenarioConfig::default())).unwrap();
        assert_eq!(tr.rows.len(), 501);
        for w in tr.rows.windows(2) {
            assert!((w[1].t - w[0].t - 1e-3).abs() < 1e-12);
        }
        assert_eq!(tr.decimated().count(), 51);
    }

    #[test]
    fn on_circle_start_stays_put() {
        let cfg = ScenarioConfig {
            initial_pose: Pose2D::new(2.0, 1.0, 0.0),
            estimator_mode: EstimatorMode::Oracle,
            t_end: 5.0,
            ..ScenarioConfig::default()
        };
        let tr = run_scenario(&cfg).unwrap();
        for r in &tr.rows {
            assert!(r.e.max_abs() < 1e-6, "t = {} e = {:?}", r.t, r.e);
        }
    }

    #[test]
    fn unseen_line_aborts() {
        let cfg = ScenarioConfig {
            initial_pose: Pose2D::new(0.0, -3.0, 0.0),
            ..ScenarioConfig::default()
        };
        let err = run_scenario(&cfg).unwrap_err();
        assert!(matches!(err, SimError::InitialVisibility { .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn invalid_config_is_a_config_error() {
        let cfg = ScenarioConfig {
            gains: Gains::new(-1.0, 1.0, 1.0),
            ..ScenarioConfig::default()
        };
        let err = run_scenario(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn lost_line_is_held_for_exactly_the_hold_budget() {
        // reversing the reference rate drives the cameras off the line
        let cfg = |hold| ScenarioConfig {
            w_ref: -1.0,
            gains: Gains::new(1.0, 1.0, 1.0),
            max_hold_steps: hold,
            t_end: 5.0,
            ..ScenarioConfig::default()
        };
        let (t0, s0) = match run_scenario(&cfg(0)) {
            Err(SimError::SensorLoss { t, steps }) => (t, steps),
            other => panic!("expected sensor loss, got {other:?}"),
        };
        assert_eq!(s0, 1);
        match run_scenario(&cfg(50)) {
            Err(e @ SimError::SensorLoss { t, steps }) => {
                assert_eq!(steps, 51);
                assert!((t - (t0 + 0.05)).abs() < 1e-9, "t = {t}, first loss {t0}");
                assert_eq!(e.exit_code(), 3);
            }
            other => panic!("expected sensor loss, got {other:?}"),
        }
    }

    #[test]
    fn wheel_limit_is_respected() {
        let cfg = ScenarioConfig {
            wheel_speed_limit: Some(20.0),
            ..short(ScenarioConfig::default())
        };
        let tr = run_scenario(&cfg).unwrap();
        for r in &tr.rows {
            assert!(r.wheels.w_rw.abs() <= 20.0 + 1e-9);
            assert!(r.wheels.w_lw.abs() <= 20.0 + 1e-9);
        }
    }
}
