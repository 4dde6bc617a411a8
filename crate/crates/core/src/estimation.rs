//! From three camera reports to robot-frame tracking errors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{circumcircle, rigid_transform, wrap_angle, GeometryError, Point2D, Pose2D};
use crate::sensor::{sensor_to_robot, LineDetection, SensorMount};

/// Below this `|y_B - y_A|` (m) the heading error is undefined.
pub const DEGENERATE_SEGMENT_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum EstimationError {
    #[error("camera {0} does not see the line")]
    MissingDetection(u8),
    #[error("chord midpoints are collinear: {0}")]
    CollinearPoints(#[from] GeometryError),
    #[error("camera 2 segment is perpendicular to the direction of travel")]
    DegenerateSegment,
}

/// Path circle as seen from the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleEstimate {
    pub center_robot: Point2D,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceState {
    /// Fixed global centre of the path circle.
    pub center_global: Point2D,
    pub w_ref: f64,
    /// Heading of the reference frame; advances at `w_ref`.
    pub theta_ref: f64,
}

impl ReferenceState {
    pub fn advanced(&self, dt: f64) -> Self {
        Self {
            theta_ref: wrap_angle(self.theta_ref + self.w_ref * dt),
            ..*self
        }
    }
}

/// Tracking errors in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorState {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

impl ErrorState {
    pub fn new(e1: f64, e2: f64, e3: f64) -> Self {
        Self { e1, e2, e3 }
    }

    pub fn max_abs(&self) -> f64 {
        self.e1.abs().max(self.e2.abs()).max(self.e3.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    /// Dead-reckoned heading.
    pub theta_hat: f64,
    pub o_cam_global: Point2D,
    pub circle: CircleEstimate,
    pub e_cam: f64,
}

/// Chord midpoints of the three cameras in the robot frame.
pub fn midpoints_in_robot(
    detections: &[LineDetection; 3],
    mounts: &[SensorMount; 3],
) -> Result<[Point2D; 3], EstimationError> {
    let mut out = [Point2D::ORIGIN; 3];
    for (i, (d, m)) in detections.iter().zip(mounts).enumerate() {
        if !d.valid {
            return Err(EstimationError::MissingDetection(i as u8 + 1));
        }
        out[i] = sensor_to_robot(d.midpoint_c, m);
    }
    Ok(out)
}

pub fn estimate_circle(m: &[Point2D; 3]) -> Result<CircleEstimate, EstimationError> {
    let c = circumcircle(m[0], m[1], m[2])?;
    Ok(CircleEstimate {
        center_robot: c.center,
        radius: c.radius,
    })
}

/// Global circle centre from the known initial pose and the first estimate.
pub fn init_global_center(initial_pose: &Pose2D, circle0: &CircleEstimate) -> Point2D {
    rigid_transform(circle0.center_robot, initial_pose)
}

/// Angle between camera 2's segment and the robot heading:
/// `atan((x_B - x_A) / (y_B - y_A))` in image coordinates.
pub fn e_cam_from_detection(d2: &LineDetection) -> Result<f64, EstimationError> {
    if !d2.valid {
        return Err(EstimationError::MissingDetection(2));
    }
    let dx = d2.endpoint_b.x - d2.endpoint_a.x;
    let dy = d2.endpoint_b.y - d2.endpoint_a.y;
    if dy.abs() < DEGENERATE_SEGMENT_EPS {
        return Err(EstimationError::DegenerateSegment);
    }
    Ok((dx / dy).atan())
}

pub fn heading_estimate(theta_ref: f64, e_cam: f64) -> f64 {
    wrap_angle(theta_ref - e_cam)
}

/// Global position of the tracking point `(0, R)` of the robot frame:
///
/// ```text
/// (x_ref - R sin(theta), y_ref + R cos(theta)) - Rot(theta) * center_robot
/// ```
pub fn locate_tracking_point(
    center_global: Point2D,
    theta: f64,
    circle: &CircleEstimate,
    radius: f64,
) -> Point2D {
    let (s, c) = theta.sin_cos();
    let offset = Point2D::new(center_global.x - radius * s, center_global.y + radius * c);
    offset - circle.center_robot.rotated(theta)
}

/// Global errors between the reference centre and the tracking point,
/// rotated into the robot frame.
pub fn compute_errors(reference: &ReferenceState, o_cam: Point2D, theta: f64) -> ErrorState {
    let e_global = reference.center_global - o_cam;
    let e_robot = e_global.rotated(-theta);
    ErrorState {
        e1: e_robot.x,
        e2: e_robot.y,
        e3: wrap_angle(reference.theta_ref - theta),
    }
}

/// Result of one estimator update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorUpdate {
    pub state: EstimatorState,
    pub reference: ReferenceState,
    /// Set when the detections could not be used; geometric fields were held.
    pub fault: Option<EstimationError>,
}

/// Advances the estimator by one control period.
///
/// Headings are propagated first (`theta_hat` by the commanded rate,
/// `theta_ref` by `w_ref`); the circle, `e_cam` and the tracking point are
/// then refreshed from `detections`, which must be taken at the end of the
/// period. On a missing or collinear detection the previous circle is
/// held and the tracking point is recomputed from it with the new heading.
/// A degenerate camera-2 segment only holds `e_cam`.
#[allow(clippy::too_many_arguments)]
pub fn step_estimator(
    state: &EstimatorState,
    detections: &[LineDetection; 3],
    mounts: &[SensorMount; 3],
    commanded_w: f64,
    dt: f64,
    reference: &ReferenceState,
    radius: f64,
) -> EstimatorUpdate {
    let theta_hat = wrap_angle(state.theta_hat + commanded_w * dt);
    let reference = reference.advanced(dt);

    let mut fault = None;
    let circle = match midpoints_in_robot(detections, mounts).and_then(|m| estimate_circle(&m)) {
        Ok(c) => c,
        Err(err) => {
            fault = Some(err);
            state.circle
        }
    };
    let e_cam = match e_cam_from_detection(&detections[1]) {
        Ok(a) => a,
        Err(err) => {
            fault.get_or_insert(err);
            state.e_cam
        }
    };

    EstimatorUpdate {
        state: EstimatorState {
            theta_hat,
            o_cam_global: locate_tracking_point(
                reference.center_global,
                theta_hat,
                &circle,
                radius,
            ),
            circle,
            e_cam,
        },
        reference,
        fault,
    }
}
