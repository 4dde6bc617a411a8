//! Differential-drive kinematics and the ground-truth integrator.

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotParams {
    /// Distance from the robot centre to each driving wheel (m).
    pub b: f64,
    /// Wheel radius (m).
    pub r: f64,
    /// Offset of the tracking point and radius of the path (m).
    #[serde(rename = "R")]
    pub radius: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            b: 0.365,
            r: 0.047,
            radius: 1.0,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("b", self.b), ("r", self.r), ("R", self.radius)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Body velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub v: f64,
    pub w: f64,
}

impl ControlCommand {
    pub const ZERO: ControlCommand = ControlCommand { v: 0.0, w: 0.0 };

    pub fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.w.is_finite()
    }
}

/// Wheel angular velocities (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelSpeeds {
    pub w_rw: f64,
    pub w_lw: f64,
}

/// Planar rate `(x_dot, y_dot, theta_dot)`.
pub type Rate = (f64, f64, f64);

/// Velocity of the tracking point `(0, R)` of the robot frame.
pub fn tracking_point_derivative(theta: f64, cmd: &ControlCommand, radius: f64) -> Rate {
    let (s, c) = theta.sin_cos();
    let along = cmd.v - radius * cmd.w;
    (along * c, along * s, cmd.w)
}

/// Unicycle kinematics of the robot centre.
pub fn robot_center_derivative(theta: f64, cmd: &ControlCommand) -> Rate {
    let (s, c) = theta.sin_cos();
    (cmd.v * c, cmd.v * s, cmd.w)
}

pub fn wheels_from_body(cmd: &ControlCommand, params: &RobotParams) -> WheelSpeeds {
    WheelSpeeds {
        w_rw: (cmd.v + params.b * cmd.w) / params.r,
        w_lw: (cmd.v - params.b * cmd.w) / params.r,
    }
}

pub fn body_from_wheels(ws: &WheelSpeeds, params: &RobotParams) -> ControlCommand {
    ControlCommand {
        v: 0.5 * params.r * (ws.w_rw + ws.w_lw),
        w: 0.5 * params.r * (ws.w_rw - ws.w_lw) / params.b,
    }
}

/// Scales both wheels down together so neither exceeds `limit` in magnitude.
pub fn clamp_wheels(ws: WheelSpeeds, limit: f64) -> WheelSpeeds {
    let peak = ws.w_rw.abs().max(ws.w_lw.abs());
    if peak <= limit {
        return ws;
    }
    let k = limit / peak;
    WheelSpeeds {
        w_rw: ws.w_rw * k,
        w_lw: ws.w_lw * k,
    }
}

/// One classical RK4 step of the robot-centre kinematics with `cmd` held.
pub fn integrate_step(state: &Pose2D, cmd: &ControlCommand, dt: f64) -> Pose2D {
    let f = |p: &Pose2D| robot_center_derivative(p.theta, cmd);
    let shift =
        |p: &Pose2D, k: Rate, h: f64| Pose2D::new(p.x + h * k.0, p.y + h * k.1, p.theta + h * k.2);

    let k1 = f(state);
    let k2 = f(&shift(state, k1, 0.5 * dt));
    let k3 = f(&shift(state, k2, 0.5 * dt));
    let k4 = f(&shift(state, k3, dt));

    let w = dt / 6.0;
    Pose2D::new(
        state.x + w * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        state.y + w * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        wrap_angle(state.theta + w * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2D;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, TAU};

    #[test]
    fn tracking_point_examples() {
        assert_eq!(
            tracking_point_derivative(0.0, &ControlCommand::new(1.0, 0.0), 1.0),
            (1.0, 0.0, 0.0)
        );
        assert_eq!(
            tracking_point_derivative(0.0, &ControlCommand::new(1.0, 1.0), 1.0),
            (0.0, 0.0, 1.0)
        );
        assert_eq!(
            tracking_point_derivative(0.4, &ControlCommand::ZERO, 1.0),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn robot_center_examples() {
        assert_eq!(
            robot_center_derivative(0.0, &ControlCommand::new(1.0, 0.0)),
            (1.0, 0.0, 0.0)
        );
        let (dx, dy, dth) = robot_center_derivative(FRAC_PI_2, &ControlCommand::new(2.0, 0.0));
        assert_abs_diff_eq!(dx, 0.0, epsilon = 1e-15);
        assert_eq!((dy, dth), (2.0, 0.0));
        assert_eq!(
            robot_center_derivative(1.0, &ControlCommand::new(0.0, 3.0)),
            (0.0, 0.0, 3.0)
        );
    }

    #[test]
    fn wheel_map_with_table_parameters() {
        let p = RobotParams::default();
        let ws = wheels_from_body(&ControlCommand::ZERO, &p);
        assert_eq!((ws.w_rw, ws.w_lw), (0.0, 0.0));
        let ws = wheels_from_body(&ControlCommand::new(0.047, 0.0), &p);
        assert_abs_diff_eq!(ws.w_rw, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ws.w_lw, 1.0, epsilon = 1e-15);
        let ws = wheels_from_body(&ControlCommand::new(0.0, 1.0), &p);
        assert_abs_diff_eq!(ws.w_rw, 7.7660, epsilon = 5e-5);
        assert_abs_diff_eq!(ws.w_lw, -7.7660, epsilon = 5e-5);
    }

    #[test]
    fn inverse_wheel_map() {
        let p = RobotParams::default();
        let c = body_from_wheels(
            &WheelSpeeds {
                w_rw: 1.0,
                w_lw: 1.0,
            },
            &p,
        );
        assert_abs_diff_eq!(c.v, 0.047, epsilon = 1e-15);
        assert_eq!(c.w, 0.0);
        assert_eq!(
            body_from_wheels(&WheelSpeeds::default(), &p),
            ControlCommand::ZERO
        );
        let c = body_from_wheels(
            &WheelSpeeds {
                w_rw: 7.7660,
                w_lw: -7.7660,
            },
            &p,
        );
        assert_abs_diff_eq!(c.v, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.w, 1.0, epsilon = 1e-4);
    }

    #[test]
    fn wheel_clamp_preserves_curvature() {
        let ws = WheelSpeeds {
            w_rw: 20.0,
            w_lw: -10.0,
        };
        let c = clamp_wheels(ws, 10.0);
        assert_eq!((c.w_rw, c.w_lw), (10.0, -5.0));
        assert_eq!(clamp_wheels(ws, 30.0), ws);
    }

    #[test]
    fn rest_and_straight_line() {
        let s = Pose2D::new(0.3, -0.2, 0.9);
        assert_eq!(integrate_step(&s, &ControlCommand::ZERO, 0.7), s);
        let s = integrate_step(
            &Pose2D::new(1.0, 2.0, 0.0),
            &ControlCommand::new(1.0, 0.0),
            0.5,
        );
        assert_eq!(s, Pose2D::new(1.5, 2.0, 0.0));
    }

    #[test]
    fn unit_circle_closes_after_one_period() {
        let dt = 1e-3;
        let n = (TAU / dt).round() as usize;
        let dt = TAU / n as f64;
        let start = Pose2D::new(0.0, -1.0, 0.0);
        let mut s = start;
        for _ in 0..n {
            s = integrate_step(&s, &ControlCommand::new(1.0, 1.0), dt);
        }
        assert!(s.position().distance(start.position()) < 1e-10);
        assert!(s.position().distance(Point2D::ORIGIN) - 1.0 < 1e-10);
    }
}
