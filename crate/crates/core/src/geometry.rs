//! Planar frame algebra and three-point circle geometry.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative collinearity threshold for [`circumcircle`].
pub const COLLINEAR_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum GeometryError {
    #[error("points are collinear or coincident (|det| = {det:e}, scale = {scale:e})")]
    CollinearPoints { det: f64, scale: f64 },
}

/// A position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const ORIGIN: Point2D = Point2D { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn distance(self, other: Point2D) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point2D) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2D) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Counter-clockwise rotation by `theta`.
    pub fn rotated(self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point2D {
    type Output = Point2D;
    fn add(self, rhs: Point2D) -> Point2D {
        Point2D::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2D {
    type Output = Point2D;
    fn sub(self, rhs: Point2D) -> Point2D {
        Point2D::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2D {
    type Output = Point2D;
    fn mul(self, rhs: f64) -> Point2D {
        Point2D::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point2D {
    type Output = Point2D;
    fn neg(self) -> Point2D {
        Point2D::new(-self.x, -self.y)
    }
}

/// Position and heading of a frame expressed in its parent frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn position(&self) -> Point2D {
        Point2D::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Same pose with the heading wrapped to (-pi, pi].
    pub fn wrapped(self) -> Self {
        Self {
            theta: wrap_angle(self.theta),
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point2D,
    pub radius: f64,
}

impl Circle {
    pub const fn new(center: Point2D, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn point_at(&self, angle: f64) -> Point2D {
        let (s, c) = angle.sin_cos();
        Point2D::new(
            self.center.x + self.radius * c,
            self.center.y + self.radius * s,
        )
    }
}

/// Maps an angle onto its representative in (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Expresses a point given in the frame `frame_pose` in the parent frame:
/// `Rot(theta) * p + origin`.
pub fn rigid_transform(p: Point2D, frame_pose: &Pose2D) -> Point2D {
    p.rotated(frame_pose.theta) + frame_pose.position()
}

/// Inverse of [`rigid_transform`]: expresses a parent-frame point in `frame_pose`.
pub fn inverse_transform(p: Point2D, frame_pose: &Pose2D) -> Point2D {
    (p - frame_pose.position()).rotated(-frame_pose.theta)
}

/// Circle through three points.
///
/// Solves the 2x2 system obtained by subtracting the circle equation at
/// `p1` from the equations at `p2` and `p3`:
///
/// ```text
/// [2(x2-x1) 2(y2-y1)] [cx]   [x2^2 - x1^2 + y2^2 - y1^2]
/// [2(x3-x1) 2(y3-y1)] [cy] = [x3^2 - x1^2 + y3^2 - y1^2]
/// ```
///
/// The system is solved in coordinates centred on `p1`, which leaves the
/// determinant unchanged and avoids cancellation in the squared terms.
/// Rejects the triple when `|det| < COLLINEAR_EPS * S`, with `S` the largest
/// pairwise squared distance.
pub fn circumcircle(p1: Point2D, p2: Point2D, p3: Point2D) -> Result<Circle, GeometryError> {
    let u = p2 - p1;
    let w = p3 - p1;

    let (a11, a12) = (2.0 * u.x, 2.0 * u.y);
    let (a21, a22) = (2.0 * w.x, 2.0 * w.y);
    let det = a11 * a22 - a12 * a21;

    let scale = u
        .norm_squared()
        .max(w.norm_squared())
        .max((p3 - p2).norm_squared());
    if !(det.abs() >= COLLINEAR_EPS * scale) || scale == 0.0 {
        return Err(GeometryError::CollinearPoints { det, scale });
    }

    let b1 = u.norm_squared();
    let b2 = w.norm_squared();
    let local = Point2D::new((b1 * a22 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det);
    let center = local + p1;
    // mean of the three distances keeps the result symmetric in its arguments
    let radius = (center.distance(p1) + center.distance(p2) + center.distance(p3)) / 3.0;
    Ok(Circle::new(center, radius))
}
