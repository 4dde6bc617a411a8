//! Sliding-mode tracking controller.
//!
//! Surfaces:
//!
//! ```text
//! s1 = e1 + e2
//! s2 = e1 - e2
//! s3 = -e1 + e2 + e3
//! ```
//!
//! Differentiating along the error dynamics gives `s_dot = f + g(e) u` with
//! `f = (0, 0, w_ref)` and a 3x2 input matrix `g`. The command is the least
//! squares solution of `g u = -(f + K sat(s / phi))`, `K = diag(k1, k2, k3)`.

use nalgebra::{Matrix3x2, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::ErrorState;
use crate::plant::{ControlCommand, RobotParams};

/// Smallest admissible singular value of `g`.
pub const RANK_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum ControlError {
    #[error("input matrix is rank deficient (smallest singular value {0:e})")]
    RankDeficient(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Boundary-layer half-width.
    #[serde(default = "default_phi")]
    pub phi: f64,
}

fn default_phi() -> f64 {
    0.05
}

impl Default for Gains {
    fn default() -> Self {
        Self::new(0.01, 0.5, 1.0)
    }
}

impl Gains {
    pub fn new(k1: f64, k2: f64, k3: f64) -> Self {
        Self {
            k1,
            k2,
            k3,
            phi: default_phi(),
        }
    }

    pub fn with_phi(self, phi: f64) -> Self {
        Self { phi, ..self }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("phi", self.phi),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    fn diagonal(&self) -> Vector3<f64> {
        Vector3::new(self.k1, self.k2, self.k3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SlidingSurface {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl SlidingSurface {
    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.s1, self.s2, self.s3)
    }

    pub fn max_abs(&self) -> f64 {
        self.s1.abs().max(self.s2.abs()).max(self.s3.abs())
    }
}

/// Switching nonlinearity used in the control law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Switching {
    /// `sat(s / phi)`
    #[default]
    Saturation,
    /// `sign(s)`
    Sign,
}

pub fn sliding_surface(e: &ErrorState) -> SlidingSurface {
    SlidingSurface {
        s1: e.e1 + e.e2,
        s2: e.e1 - e.e2,
        s3: -e.e1 + e.e2 + e.e3,
    }
}

/// Drift and input matrix of the surface dynamics `s_dot = f + g u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceDynamics {
    pub f: Vector3<f64>,
    pub g: Matrix3x2<f64>,
}

pub fn surface_dynamics(e: &ErrorState, radius: f64, w_ref: f64) -> SurfaceDynamics {
    let (e1, e2) = (e.e1, e.e2);
    #[rustfmt::skip]
    let g = Matrix3x2::new(
        -1.0, e2 + radius - e1,
        -1.0, e2 + radius + e1,
         1.0, -(e2 + radius + e1 + 1.0),
    );
    SurfaceDynamics {
        f: Vector3::new(0.0, 0.0, w_ref),
        g,
    }
}

/// Boundary-layer saturation: `x / phi` clipped to [-1, 1].
pub fn sat(x: f64, phi: f64) -> f64 {
    let y = x / phi;
    if y.abs() <= 1.0 {
        y
    } else {
        y.signum()
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn switching_term(s: &SlidingSurface, gains: &Gains, switching: Switching) -> Vector3<f64> {
    let sw = match switching {
        Switching::Saturation => s.as_vector().map(|x| sat(x, gains.phi)),
        Switching::Sign => s.as_vector().map(sign),
    };
    gains.diagonal().component_mul(&sw)
}

/// Least-squares solution of `g u = rhs` through the SVD of `g`.
fn solve_least_squares(
    g: &Matrix3x2<f64>,
    rhs: &Vector3<f64>,
) -> Result<Vector2<f64>, ControlError> {
    let svd = g.svd(true, true);
    let smin = svd.singular_values.min();
    if !(smin >= RANK_EPS) {
        return Err(ControlError::RankDeficient(smin));
    }
    svd.solve(rhs, 0.0)
        .map_err(|_| ControlError::RankDeficient(smin))
}

/// Control law with boundary-layer saturation.
pub fn control(
    e: &ErrorState,
    params: &RobotParams,
    w_ref: f64,
    gains: &Gains,
) -> Result<ControlCommand, ControlError> {
    control_with(e, params, w_ref, gains, Switching::Saturation)
}

pub fn control_with(
    e: &ErrorState,
    params: &RobotParams,
    w_ref: f64,
    gains: &Gains,
    switching: Switching,
) -> Result<ControlCommand, ControlError> {
    let s = sliding_surface(e);
    let dyn_ = surface_dynamics(e, params.radius, w_ref);
    let rhs = -(dyn_.f + switching_term(&s, gains, switching));
    let u = solve_least_squares(&dyn_.g, &rhs)?;
    Ok(ControlCommand::new(u[0], u[1]))
}

/// `s_dot = f + g u` for a given command.
pub fn surface_rate(e: &ErrorState, cmd: &ControlCommand, radius: f64, w_ref: f64) -> Vector3<f64> {
    let d = surface_dynamics(e, radius, w_ref);
    d.f + d.g * Vector2::new(cmd.v, cmd.w)
}

/// `V = s's / 2`.
pub fn lyapunov(s: &SlidingSurface) -> f64 {
    0.5 * (s.s1 * s.s1 + s.s2 * s.s2 + s.s3 * s.s3)
}
