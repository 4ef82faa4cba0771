use vpbias::sim::{build_trajectory, Segment, Trajectory, TrajectorySpec};
use vpbias::Vec3;

fn mixed_path() -> TrajectorySpec {
    TrajectorySpec {
        segments: vec![
            Segment::straight(20.0, 5.0),
            Segment::turn(15.0, 5.0, 0.2),
            Segment::straight(10.0, 8.0),
            Segment::turn(12.5, 3.0, -0.15),
            Segment::turn(0.5, 4.0, 0.3),
            Segment::straight(30.0, 0.0),
        ],
        initial_heading: 0.7,
        imu_rate: 100.0,
        aid_rate: 10.0,
    }
}

/// Composite Simpson over [a, b].
fn simpson(f: impl Fn(f64) -> Vec3, a: f64, b: f64, n: usize) -> Vec3 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + i as f64 * h) * w;
    }
    acc * (h / 3.0)
}

#[test]
fn integrated_acceleration_reproduces_velocity() {
    let traj = Trajectory::new(&mixed_path()).unwrap();
    let bp = traj.breakpoints();
    for pair in bp.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        // Acceleration jumps at breakpoints; sample each piece strictly inside.
        let eps = 1e-12 * b.max(1.0);
        let dv = simpson(|t| traj.kinematics(t.clamp(a + eps, b - eps)).acceleration, a, b, 2000);
        let expected = traj.kinematics(b).velocity - traj.kinematics(a + eps).velocity;
        assert!((dv - expected).norm() <= 1e-6, "[{a}, {b}]: {} vs {}", dv, expected);
    }
}

#[test]
fn velocity_is_continuous_at_joints() {
    let traj = Trajectory::new(&mixed_path()).unwrap();
    for &(_, end) in &traj.segment_bounds() {
        let before = traj.kinematics(end).velocity;
        let after = traj.kinematics(end + 1e-9).velocity;
        assert!((before - after).norm() < 1e-6, "t={end}");
    }
}

#[test]
fn sampled_truth_matches_analytic_kinematics() {
    let spec = mixed_path();
    let traj = Trajectory::new(&spec).unwrap();
    let truth = build_trajectory(&spec, 9.81).unwrap();
    assert_eq!(truth.len(), (traj.duration() * spec.imu_rate).round() as usize + 1);
    for s in truth.iter().step_by(37) {
        let k = traj.kinematics(s.t);
        assert!((s.velocity - k.velocity).norm() < 1e-12);
        let f_n = s.f_n_true();
        let expected = k.acceleration - Vec3::new(0.0, 0.0, 9.81);
        assert!((f_n - expected).norm() < 1e-9, "t={}", s.t);
    }
}

#[test]
fn trapezoid_position_tracks_velocity_integral() {
    let spec = TrajectorySpec {
        segments: vec![Segment::turn(2.0 * std::f64::consts::PI / 0.2, 5.0, 0.2)],
        initial_heading: 0.0,
        imu_rate: 100.0,
        aid_rate: 10.0,
    };
    let truth = build_trajectory(&spec, 9.81).unwrap();
    let radius = 5.0 / 0.2;
    for s in truth.iter().step_by(101) {
        let a = 0.2 * s.t;
        let expected = Vec3::new(radius * a.sin(), radius * (1.0 - a.cos()), 0.0);
        assert!((s.position - expected).norm() < 1e-4, "t={}: {}", s.t, s.position);
    }
}
