use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use circtrack::controller::{
    control, control_with, sliding_surface, surface_dynamics, surface_rate, Switching,
};
use circtrack::estimation::{
    compute_errors, locate_tracking_point, CircleEstimate, ReferenceState,
};
use circtrack::geometry::{circumcircle, inverse_transform, rigid_transform, wrap_angle};
use circtrack::plant::{
    body_from_wheels, integrate_step, tracking_point_derivative, wheels_from_body,
};
use circtrack::sensor::{
    default_mounts, detect_line, robot_to_sensor, sensor_to_robot, SensorFrameSpec,
};
use circtrack::{Circle, ControlCommand, ErrorState, Gains, Point2D, Pose2D, RobotParams};

fn unit_circle_point(c: Point2D, r: f64, a: f64) -> Point2D {
    Point2D::new(c.x + r * a.cos(), c.y + r * a.sin())
}

/// Angles at least `gap` apart on the circle.
fn spread_angles(gap: f64) -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0..TAU, gap..(TAU - 2.0 * gap), gap..(TAU - 2.0 * gap)).prop_filter_map(
        "angles too close",
        move |(a, d1, d2)| {
            let (b, c) = (a + d1, a + d1 + d2);
            let close = |x: f64, y: f64| {
                let d = (x - y).rem_euclid(TAU);
                d.min(TAU - d) < gap
            };
            (!close(a, c) && !close(b, c)).then_some((a, b, c))
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn circumcircle_recovers_generating_circle(
        cx in -100.0..100.0f64, cy in -100.0..100.0f64, r in 0.01..100.0f64,
        (a, b, c) in spread_angles(0.05),
    ) {
        let center = Point2D::new(cx, cy);
        let pts = [a, b, c].map(|t| unit_circle_point(center, r, t));
        let got = circumcircle(pts[0], pts[1], pts[2]).unwrap();
        let scale = r.max(center.norm());
        prop_assert!((got.radius - r).abs() <= 1e-9 * r, "radius {} vs {}", got.radius, r);
        prop_assert!(got.center.distance(center) <= 1e-9 * scale);
    }

    #[test]
    fn circumcircle_ignores_point_order(
        cx in -10.0..10.0f64, cy in -10.0..10.0f64, r in 0.1..10.0f64,
        (a, b, c) in spread_angles(0.05),
    ) {
        let center = Point2D::new(cx, cy);
        let [p, q, s] = [a, b, c].map(|t| unit_circle_point(center, r, t));
        let base = circumcircle(p, q, s).unwrap();
        for (x, y, z) in [(q, p, s), (s, q, p), (p, s, q), (q, s, p), (s, p, q)] {
            let other = circumcircle(x, y, z).unwrap();
            prop_assert!(other.center.distance(base.center) <= 1e-12 * (1.0 + base.center.norm()) * 10.0);
            prop_assert!((other.radius - base.radius).abs() <= 1e-12 * base.radius * 10.0);
        }
    }

    #[test]
    fn circumcircle_rejects_collinear(
        x0 in -10.0..10.0f64, y0 in -10.0..10.0f64, dir in 0.0..TAU,
        t1 in -5.0..5.0f64, t2 in -5.0..5.0f64,
    ) {
        let d = Point2D::new(dir.cos(), dir.sin());
        let p = Point2D::new(x0, y0);
        prop_assert!(circumcircle(p, p + d * t1, p + d * t2).is_err());
    }

    #[test]
    fn transform_round_trip(
        px in -50.0..50.0f64, py in -50.0..50.0f64,
        x in -50.0..50.0f64, y in -50.0..50.0f64, th in -10.0..10.0f64,
    ) {
        let pose = Pose2D::new(x, y, th);
        let p = Point2D::new(px, py);
        let back = inverse_transform(rigid_transform(p, &pose), &pose);
        prop_assert!(back.distance(p) <= 1e-12 * (1.0 + p.norm() + pose.position().norm()));
        // distances are preserved
        let q = Point2D::new(py, px);
        let d = rigid_transform(p, &pose).distance(rigid_transform(q, &pose));
        prop_assert!((d - p.distance(q)).abs() <= 1e-12 * (1.0 + d));
    }

    #[test]
    fn wrap_angle_is_idempotent_and_in_range(a in -1e4..1e4f64) {
        let w = wrap_angle(a);
        prop_assert!(w > -PI && w <= PI);
        prop_assert_eq!(wrap_angle(w), w);
        let turns = (a - w) / TAU;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn wheel_map_round_trip(v in -5.0..5.0f64, w in -10.0..10.0f64) {
        let p = RobotParams::default();
        let cmd = ControlCommand::new(v, w);
        let back = body_from_wheels(&wheels_from_body(&cmd, &p), &p);
        prop_assert!((back.v - v).abs() <= 1e-12);
        prop_assert!((back.w - w).abs() <= 1e-12);
    }

    #[test]
    fn tracking_point_rate_matches_offset_point(
        th in -PI..PI, v in -2.0..2.0f64, w in -3.0..3.0f64, r in 0.1..2.0f64,
    ) {
        // d/dt of (x, y) + Rot(theta) (0, r) along the unicycle flow
        let cmd = ControlCommand::new(v, w);
        let h = 1e-6;
        let p = |pose: &Pose2D| pose.position() + Point2D::new(0.0, r).rotated(pose.theta);
        let pose = Pose2D::new(0.3, -0.7, th);
        let fwd = integrate_step(&pose, &cmd, h);
        let bwd = integrate_step(&pose, &ControlCommand::new(-v, -w), h);
        let num = (p(&fwd) - p(&bwd)) * (0.5 / h);
        let (dx, dy, dth) = tracking_point_derivative(th, &cmd, r);
        prop_assert!((dx - num.x).abs() < 1e-7 && (dy - num.y).abs() < 1e-7);
        prop_assert!((dth - w).abs() < 1e-15);
    }

    #[test]
    fn constant_command_traces_exact_arc(
        v in 0.1..2.0f64, w in prop_oneof![-3.0..-0.1f64, 0.1..3.0f64], th in -PI..PI,
    ) {
        let cmd = ControlCommand::new(v, w);
        let mut pose = Pose2D::new(1.0, 2.0, th);
        let center = pose.position() + Point2D::new(-th.sin(), th.cos()) * (v / w);
        let dt = 1e-3;
        let n = 2000;
        for _ in 0..n {
            pose = integrate_step(&pose, &cmd, dt);
        }
        let t = n as f64 * dt;
        prop_assert!((pose.position().distance(center) - (v / w).abs()).abs() < 1e-9);
        prop_assert!(wrap_angle(pose.theta - (th + w * t)).abs() < 1e-9);
    }

    #[test]
    fn tracking_point_is_exact_with_exact_circle(
        x in -3.0..3.0f64, y in -3.0..3.0f64, th in -PI..PI,
        cx in -3.0..3.0f64, cy in -3.0..3.0f64, r in 0.2..2.0f64,
    ) {
        let pose = Pose2D::new(x, y, th);
        let center = Point2D::new(cx, cy);
        let circle = CircleEstimate { center_robot: inverse_transform(center, &pose), radius: r };
        let got = locate_tracking_point(center, th, &circle, r);
        let want = Point2D::new(x - r * th.sin(), y + r * th.cos());
        prop_assert!(got.distance(want) < 1e-9);
    }

    #[test]
    fn surface_rate_matches_closed_loop_finite_difference(
        x in 1.0..3.0f64, y in 0.5..2.5f64, th in -PI..PI, th_ref in -PI..PI,
        v in -1.5..1.5f64, w in -2.0..2.0f64, w_ref in -1.5..1.5f64,
    ) {
        // s(t) built from poses of the true plant; its derivative must be f + g u
        let r = 1.0;
        let center = Point2D::new(2.0, 2.0);
        let cmd = ControlCommand::new(v, w);
        let s_at = |pose: &Pose2D, th_ref: f64| {
            let o = pose.position() + Point2D::new(0.0, r).rotated(pose.theta);
            let reference = ReferenceState { center_global: center, w_ref, theta_ref: th_ref };
            let e = compute_errors(&reference, o, pose.theta);
            (e, sliding_surface(&e))
        };
        let pose = Pose2D::new(x, y, th);
        let (e, _) = s_at(&pose, th_ref);
        prop_assume!(wrap_angle(th_ref - th).abs() < 3.0);
        let h = 1e-6;
        let (_, sp) = s_at(&integrate_step(&pose, &cmd, h), th_ref + w_ref * h);
        let (_, sm) = s_at(&integrate_step(&pose, &ControlCommand::new(-v, -w), h), th_ref - w_ref * h);
        let num = (sp.as_vector() - sm.as_vector()) / (2.0 * h);
        let model = surface_rate(&e, &cmd, r, w_ref);
        prop_assert!((num - model).amax() < 1e-6, "num {num:?} model {model:?}");
    }

    #[test]
    fn control_matches_normal_equations(
        e1 in -0.5..0.5f64, e2 in -0.5..0.5f64, e3 in -1.0..1.0f64,
        k1 in 0.001..2.0f64, k2 in 0.001..2.0f64, k3 in 0.001..2.0f64,
        w_ref in -2.0..2.0f64,
    ) {
        let e = ErrorState::new(e1, e2, e3);
        let gains = Gains::new(k1, k2, k3);
        let u = control(&e, &RobotParams::default(), w_ref, &gains).unwrap();
        let want = normal_equations(&e, 1.0, w_ref, &gains);
        prop_assert!((u.v - want.0).abs() < 1e-9 * (1.0 + want.0.abs()));
        prop_assert!((u.w - want.1).abs() < 1e-9 * (1.0 + want.1.abs()));
    }

    #[test]
    fn surface_rate_is_projected_reaching_law(
        e1 in -0.5..0.5f64, e2 in -0.5..0.5f64, e3 in -1.0..1.0f64,
        w_ref in -2.0..2.0f64,
    ) {
        // s_dot = -K sw(s) + (residual of the least-squares fit), and the
        // residual is orthogonal to both columns of g
        let e = ErrorState::new(e1, e2, e3);
        let gains = Gains::new(0.3, 0.7, 1.1);
        let u = control_with(&e, &RobotParams::default(), w_ref, &gains, Switching::Sign).unwrap();
        let s = sliding_surface(&e);
        let sw = [s.s1, s.s2, s.s3].map(|x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 });
        let k = [0.3, 0.7, 1.1];
        let sdot = surface_rate(&e, &u, 1.0, w_ref);
        let resid: Vec<f64> = (0..3).map(|i| sdot[i] + k[i] * sw[i]).collect();
        let g = surface_dynamics(&e, 1.0, w_ref).g;
        for col in 0..2 {
            let dot: f64 = (0..3).map(|i| g[(i, col)] * resid[i]).sum();
            prop_assert!(dot.abs() < 1e-9);
        }
        // when the residual vanishes, s' s_dot = -sum k_i |s_i|
        let st_sdot = s.s1 * sdot[0] + s.s2 * sdot[1] + s.s3 * sdot[2];
        let st_resid = s.s1 * resid[0] + s.s2 * resid[1] + s.s3 * resid[2];
        let reach = -(k[0] * s.s1.abs() + k[1] * s.s2.abs() + k[2] * s.s3.abs());
        prop_assert!((st_sdot - (reach + st_resid)).abs() < 1e-9);
    }

    #[test]
    fn control_is_continuous_inside_boundary_layer(
        e1 in -0.02..0.02f64, e2 in -0.02..0.02f64, e3 in -0.02..0.02f64,
        d1 in -1.0..1.0f64, d2 in -1.0..1.0f64, d3 in -1.0..1.0f64,
    ) {
        let gains = Gains::new(0.01, 0.5, 1.0);
        let e = ErrorState::new(e1, e2, e3);
        prop_assume!(sliding_surface(&e).max_abs() < gains.phi * 0.9);
        let h = 1e-7;
        let ep = ErrorState::new(e1 + h * d1, e2 + h * d2, e3 + h * d3);
        let p = RobotParams::default();
        let u = control(&e, &p, 1.0, &gains).unwrap();
        let up = control(&ep, &p, 1.0, &gains).unwrap();
        // Lipschitz bound: |K| / phi times a modest pseudoinverse norm
        prop_assert!((u.v - up.v).abs() < 1e3 * h && (u.w - up.w).abs() < 1e3 * h);
    }

    #[test]
    fn detections_lie_on_the_path(
        x in 1.6..2.4f64, y in 0.7..1.3f64, th in -0.3..0.3f64,
    ) {
        let spec = SensorFrameSpec::default();
        let path = Circle::new(Point2D::new(2.0, 2.0), 1.0);
        let pose = Pose2D::new(x, y, th);
        for m in default_mounts(&spec, 1.0) {
            let d = detect_line(&path, &pose, &m, &spec, 0);
            if !d.valid {
                continue;
            }
            for p in [d.endpoint_a, d.endpoint_b, d.midpoint_c] {
                let g = rigid_transform(sensor_to_robot(p, &m), &pose);
                prop_assert!((g.distance(path.center) - 1.0).abs() < 1e-9);
                prop_assert!(spec.contains(p));
            }
            // C bisects the arc: equal chords to both endpoints
            let ca = d.midpoint_c.distance(d.endpoint_a);
            let cb = d.midpoint_c.distance(d.endpoint_b);
            prop_assert!((ca - cb).abs() < 1e-9);
            // |AB| = 2 sqrt(R^2 - d^2), d the distance from the centre to line AB
            let centre = robot_to_sensor(inverse_transform(path.center, &pose), &m);
            let ab = d.endpoint_b - d.endpoint_a;
            let dist = (centre - d.endpoint_a).cross(ab).abs() / ab.norm();
            let chord = 2.0 * (1.0 - dist * dist).sqrt();
            prop_assert!((ab.norm() - chord).abs() < 1e-6);
        }
    }

    #[test]
    fn sensor_map_round_trip(cx in -1.0..1.0f64, cy in -1.0..1.0f64) {
        let spec = SensorFrameSpec::default();
        for m in default_mounts(&spec, 1.0) {
            let c = Point2D::new(cx, cy);
            prop_assert!(robot_to_sensor(sensor_to_robot(c, &m), &m).distance(c) < 1e-15);
        }
    }
}

/// `u = -(g'g)^-1 g' (f + K sat(s / phi))` with an explicit 2x2 inverse.
fn normal_equations(e: &ErrorState, r: f64, w_ref: f64, gains: &Gains) -> (f64, f64) {
    let (e1, e2) = (e.e1, e.e2);
    let g = [
        [-1.0, e2 + r - e1],
        [-1.0, e2 + r + e1],
        [1.0, -(e2 + r + e1 + 1.0)],
    ];
    let s = [e1 + e2, e1 - e2, -e1 + e2 + e.e3];
    let k = [gains.k1, gains.k2, gains.k3];
    let sat = |x: f64| (x / gains.phi).clamp(-1.0, 1.0);
    let f = [0.0, 0.0, w_ref];
    let rhs: Vec<f64> = (0..3).map(|i| -(f[i] + k[i] * sat(s[i]))).collect();
    let mut gtg = [[0.0; 2]; 2];
    let mut gtr = [0.0; 2];
    for i in 0..3 {
        for a in 0..2 {
            gtr[a] += g[i][a] * rhs[i];
            for b in 0..2 {
                gtg[a][b] += g[i][a] * g[i][b];
            }
        }
    }
    let det = gtg[0][0] * gtg[1][1] - gtg[0][1] * gtg[1][0];
    (
        (gtg[1][1] * gtr[0] - gtg[0][1] * gtr[1]) / det,
        (-gtg[1][0] * gtr[0] + gtg[0][0] * gtr[1]) / det,
    )
}

#[test]
fn control_at_reference_error_matches_normal_equations() {
    let e = ErrorState::new(0.1, -0.05, 0.2);
    let gains = Gains::new(0.01, 0.5, 1.0);
    let u = control(&e, &RobotParams::default(), 1.0, &gains).unwrap();
    let (v, w) = normal_equations(&e, 1.0, 1.0, &gains);
    assert!((u.v - v).abs() < 1e-9, "v {} vs {v}", u.v);
    assert!((u.w - w).abs() < 1e-9, "w {} vs {w}", u.w);
}

/// Visible arc found by walking the circle in fine steps.
fn rasterised_arc(
    path: &Circle,
    pose: &Pose2D,
    m: &circtrack::sensor::SensorMount,
    spec: &SensorFrameSpec,
) -> Option<(Point2D, Point2D, Point2D)> {
    let n = 2_000_000usize;
    let img = |k: usize| {
        let a = k as f64 * TAU / n as f64;
        robot_to_sensor(inverse_transform(path.point_at(a), pose), m)
    };
    let inside: Vec<bool> = (0..n).map(|k| spec.contains(img(k))).collect();
    let first_out = inside.iter().position(|&b| !b)?;
    // runs of inside samples, walking once around from an outside sample
    let mut runs = Vec::new();
    let mut k = 0;
    while k < n {
        let i = (first_out + k) % n;
        if inside[i] {
            let start = k;
            while k < n && inside[(first_out + k) % n] {
                k += 1;
            }
            runs.push((first_out + start, k - start));
        } else {
            k += 1;
        }
    }
    let centre = spec.center();
    runs.into_iter()
        .map(|(s, len)| (img(s % n), img((s + len - 1) % n), img((s + len / 2) % n)))
        .min_by(|a, b| a.2.distance(centre).total_cmp(&b.2.distance(centre)))
}

#[test]
fn detection_matches_rasterised_oracle_at_start_pose() {
    let spec = SensorFrameSpec::default();
    let path = Circle::new(Point2D::new(2.0, 2.0), 1.0);
    let pose = Pose2D::new(1.8, 0.8, 1f64.to_radians());
    for m in default_mounts(&spec, 1.0) {
        let d = detect_line(&path, &pose, &m, &spec, 0);
        let (p, q, c) = rasterised_arc(&path, &pose, &m, &spec).expect("line visible");
        assert!(d.valid);
        let (a, b) = if (p.y, p.x) <= (q.y, q.x) {
            (p, q)
        } else {
            (q, p)
        };
        assert!(
            d.endpoint_a.distance(a) < 1e-4,
            "camera {} A {:?} vs {a:?}",
            m.index,
            d.endpoint_a
        );
        assert!(
            d.endpoint_b.distance(b) < 1e-4,
            "camera {} B {:?} vs {b:?}",
            m.index,
            d.endpoint_b
        );
        assert!(
            d.midpoint_c.distance(c) < 1e-4,
            "camera {} C {:?} vs {c:?}",
            m.index,
            d.midpoint_c
        );
    }
}
