//! Virtual downward-looking line cameras.
//!
//! Each camera sees a `width x length` rectangle of the floor. Its image
//! frame `{C_i}` relates to the robot frame `{R}` through a fixed map: the
//! image point `(c_x, c_y)` lands at
//!
//! ```text
//! [ 0  1] [1  0] [c_x]   [±d_x]
//! [-1  0] [0 -1] [c_y] + [ d_y]   =   (-c_y ± d_x, -c_x + d_y)
//! ```
//!
//! where the x offset is negated for the third (rear) camera. Image x
//! therefore runs to the robot's right and image y runs backwards.
//!
//! [`detect_line`] intersects the path circle with that rectangle and reports
//! the visible arc: its two end points `A`, `B` where it crosses the frame
//! border, and its middle point `C`, all in image coordinates.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{inverse_transform, Circle, Point2D, Pose2D};

/// Arcs shorter than this (in meters) are treated as tangential contact.
pub const TANGENCY_EPS: f64 = 1e-9;

/// Line-tracking grid of the reference camera.
pub const DEFAULT_GRID: PixelGrid = PixelGrid {
    columns: 78,
    rows: 51,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelGrid {
    pub columns: u32,
    pub rows: u32,
}

impl Default for PixelGrid {
    fn default() -> Self {
        DEFAULT_GRID
    }
}

/// Floor footprint of one camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorFrameSpec {
    /// Image x extent (m), across the robot.
    pub width_w: f64,
    /// Image y extent (m), along the robot.
    pub length_l: f64,
    #[serde(default)]
    pub quantize: Option<PixelGrid>,
    #[serde(default)]
    pub noise_std: f64,
}

impl Default for SensorFrameSpec {
    fn default() -> Self {
        Self {
            width_w: 0.60,
            length_l: 0.40,
            quantize: None,
            noise_std: 0.0,
        }
    }
}

impl SensorFrameSpec {
    pub fn new(width_w: f64, length_l: f64) -> Self {
        Self {
            width_w,
            length_l,
            ..Self::default()
        }
    }

    pub fn center(&self) -> Point2D {
        Point2D::new(0.5 * self.width_w, 0.5 * self.length_l)
    }

    pub fn contains(&self, p: Point2D) -> bool {
        p.x >= 0.0 && p.x <= self.width_w && p.y >= 0.0 && p.y <= self.length_l
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.width_w > 0.0 && self.width_w.is_finite()) {
            return Err(format!("width_w must be positive, got {}", self.width_w));
        }
        if !(self.length_l > 0.0 && self.length_l.is_finite()) {
            return Err(format!("length_l must be positive, got {}", self.length_l));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        if let Some(g) = self.quantize {
            if g.columns < 2 || g.rows < 2 {
                return Err(format!(
                    "pixel grid needs at least 2x2 cells, got {}x{}",
                    g.columns, g.rows
                ));
            }
        }
        Ok(())
    }

    fn clamp(&self, p: Point2D) -> Point2D {
        Point2D::new(p.x.clamp(0.0, self.width_w), p.y.clamp(0.0, self.length_l))
    }
}

/// Placement of a camera on the robot.
///
/// `d_x`, `d_y` are the offsets of the image origin; for camera 3 the x
/// offset enters with a negative sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorMount {
    pub index: u8,
    pub d_x: f64,
    pub d_y: f64,
}

impl SensorMount {
    pub fn new(index: u8, d_x: f64, d_y: f64) -> Self {
        Self { index, d_x, d_y }
    }

    /// Mount whose image centre (the lens axis) lands on `lens` in the robot frame.
    pub fn with_lens_at(index: u8, lens: Point2D, spec: &SensorFrameSpec) -> Self {
        // image centre (w/2, l/2) maps to (x_off - l/2, d_y - w/2)
        let x_off = lens.x + 0.5 * spec.length_l;
        let d_y = lens.y + 0.5 * spec.width_w;
        let d_x = if index == 3 { -x_off } else { x_off };
        Self { index, d_x, d_y }
    }

    /// Signed x offset of the image origin in the robot frame.
    pub fn x_offset(&self) -> f64 {
        if self.index == 3 {
            -self.d_x
        } else {
            self.d_x
        }
    }

    pub fn lens_in_robot(&self, spec: &SensorFrameSpec) -> Point2D {
        sensor_to_robot(spec.center(), self)
    }
}

/// Longitudinal spacing of the outer lenses from the robot centre.
pub const DEFAULT_LENS_SPACING: f64 = 0.15;

/// Default three-camera layout: the middle lens on the robot centre and the
/// outer lenses at `x = ±0.15 m`, all three on a circle of radius `radius`
/// through the robot centre, centred at `(0, radius)`.
pub fn default_mounts(spec: &SensorFrameSpec, radius: f64) -> [SensorMount; 3] {
    let dx = DEFAULT_LENS_SPACING.min(radius);
    let dy = radius - (radius * radius - dx * dx).sqrt();
    [
        SensorMount::with_lens_at(1, Point2D::new(dx, dy), spec),
        SensorMount::with_lens_at(2, Point2D::ORIGIN, spec),
        SensorMount::with_lens_at(3, Point2D::new(-dx, dy), spec),
    ]
}

/// Rotation block printed for every camera.
const CAMERA_ROTATION: [[f64; 2]; 2] = [[0.0, 1.0], [-1.0, 0.0]];
/// Mirror block printed for every camera.
const CAMERA_MIRROR: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, -1.0]];

fn mat_vec(m: &[[f64; 2]; 2], v: Point2D) -> Point2D {
    Point2D::new(m[0][0] * v.x + m[0][1] * v.y, m[1][0] * v.x + m[1][1] * v.y)
}

/// Maps an image point of camera `mount.index` into the robot frame.
pub fn sensor_to_robot(c: Point2D, mount: &SensorMount) -> Point2D {
    mat_vec(&CAMERA_ROTATION, mat_vec(&CAMERA_MIRROR, c))
        + Point2D::new(mount.x_offset(), mount.d_y)
}

/// Inverse of [`sensor_to_robot`]; the map is an involution up to the offset.
pub fn robot_to_sensor(p: Point2D, mount: &SensorMount) -> Point2D {
    let q = p - Point2D::new(mount.x_offset(), mount.d_y);
    Point2D::new(-q.y, -q.x)
}

/// Pose of the image frame in the robot frame, to be applied after mirroring
/// the image y axis: `sensor_to_robot(c) = rigid_transform((c_x, -c_y), pose)`.
pub fn sensor_pose_in_robot(mount: &SensorMount) -> Pose2D {
    Pose2D::new(mount.x_offset(), mount.d_y, -FRAC_PI_2)
}

/// One camera's report.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LineDetection {
    pub midpoint_c: Point2D,
    pub endpoint_a: Point2D,
    pub endpoint_b: Point2D,
    pub valid: bool,
}

impl LineDetection {
    pub fn invalid() -> Self {
        Self::default()
    }
}

fn edge_crossings(circle: &Circle, spec: &SensorFrameSpec) -> Vec<f64> {
    let (q, r) = (circle.center, circle.radius);
    let mut angles = Vec::with_capacity(8);
    for x in [0.0, spec.width_w] {
        let dx = x - q.x;
        if dx.abs() <= r {
            let h = (r * r - dx * dx).sqrt();
            for y in [q.y - h, q.y + h] {
                if (0.0..=spec.length_l).contains(&y) {
                    angles.push((y - q.y).atan2(dx).rem_euclid(TAU));
                }
            }
        }
    }
    for y in [0.0, spec.length_l] {
        let dy = y - q.y;
        if dy.abs() <= r {
            let h = (r * r - dy * dy).sqrt();
            for x in [q.x - h, q.x + h] {
                if (0.0..=spec.width_w).contains(&x) {
                    angles.push(dy.atan2(x - q.x).rem_euclid(TAU));
                }
            }
        }
    }
    angles.sort_by(f64::total_cmp);
    // corners and tangent points show up twice
    let tol = 1e-12;
    angles.dedup_by(|a, b| (*a - *b).abs() < tol);
    if angles.len() > 1 && (angles[0] + TAU - angles[angles.len() - 1]) < tol {
        angles.pop();
    }
    angles
}

/// Visible arc of `circle` (image coordinates) inside the frame, as
/// `(start_angle, span)`. Picks the arc whose middle is closest to the frame
/// centre when there are several.
fn visible_arc(circle: &Circle, spec: &SensorFrameSpec) -> Option<(f64, f64)> {
    let angles = edge_crossings(circle, spec);
    if angles.len() < 2 {
        return None;
    }
    let centre = spec.center();
    let slack = 1e-12 * (spec.width_w + spec.length_l);
    let mut best: Option<(f64, f64, f64)> = None;
    for (i, &start) in angles.iter().enumerate() {
        let end = if i + 1 < angles.len() {
            angles[i + 1]
        } else {
            angles[0] + TAU
        };
        let span = end - start;
        if span * circle.radius < TANGENCY_EPS {
            continue;
        }
        let mid = circle.point_at(start + 0.5 * span);
        let inside = mid.x >= -slack
            && mid.x <= spec.width_w + slack
            && mid.y >= -slack
            && mid.y <= spec.length_l + slack;
        if !inside {
            continue;
        }
        let d = mid.distance(centre);
        if best.is_none_or(|(_, _, bd)| d < bd) {
            best = Some((start, span, d));
        }
    }
    best.map(|(s, sp, _)| (s, sp))
}

fn quantize(p: Point2D, grid: PixelGrid, spec: &SensorFrameSpec) -> Point2D {
    let cell = |v: f64, extent: f64, n: u32| {
        let size = extent / n as f64;
        let idx = ((v / size).floor() as i64).clamp(0, n as i64 - 1);
        (idx as f64 + 0.5) * size
    };
    Point2D::new(
        cell(p.x, spec.width_w, grid.columns),
        cell(p.y, spec.length_l, grid.rows),
    )
}

/// Simulates what camera `mount` reports for the robot at `robot` over the
/// global path `path`.
///
/// Returns an invalid detection when the circle misses the footprint, only
/// touches it, or lies entirely inside it. Quantisation and noise (drawn from
/// a generator seeded with `rng_seed`) are applied after the geometric
/// intersection, and the result is clamped back into the frame.
pub fn detect_line(
    path: &Circle,
    robot: &Pose2D,
    mount: &SensorMount,
    spec: &SensorFrameSpec,
    rng_seed: u64,
) -> LineDetection {
    let center_robot = inverse_transform(path.center, robot);
    let image_circle = Circle::new(robot_to_sensor(center_robot, mount), path.radius);

    let Some((start, span)) = visible_arc(&image_circle, spec) else {
        return LineDetection::invalid();
    };

    let p0 = spec.clamp(image_circle.point_at(start));
    let p1 = spec.clamp(image_circle.point_at(start + span));
    let mut c = spec.clamp(image_circle.point_at(start + 0.5 * span));
    let (mut a, mut b) = if (p0.y, p0.x) <= (p1.y, p1.x) {
        (p0, p1)
    } else {
        (p1, p0)
    };

    if let Some(grid) = spec.quantize {
        a = quantize(a, grid, spec);
        b = quantize(b, grid, spec);
        c = quantize(c, grid, spec);
    }
    if spec.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let normal = Normal::new(0.0, spec.noise_std).expect("noise_std validated");
        for p in [&mut a, &mut b, &mut c] {
            p.x += normal.sample(&mut rng);
            p.y += normal.sample(&mut rng);
            *p = spec.clamp(*p);
        }
    }

    LineDetection {
        midpoint_c: c,
        endpoint_a: a,
        endpoint_b: b,
        valid: true,
    }
}
