use vpbias::ahrs::CourseSample;
use vpbias::errormodel::{integrate_error_ode, steady_state_torque, torque_from_tilt, ErrorState};
use vpbias::geom::{dcm_from_euler, euler_from_dcm, ortho_error};
use vpbias::sim::{build_trajectory, exact_aid, synth_imu, Segment, SensorErrorSpec, TrajectorySpec, TruthSample};
use vpbias::{AhrsConfig, AhrsState, AidSample, ImuSample, Vec3};

const G: f64 = 9.81;
const DT: f64 = 0.01;

/// Runs the platform over truth with exact aid and course at `aid_every`
/// IMU steps, returning the torque after every step.
fn run_exact(
    truth: &[TruthSample],
    imu: &[ImuSample],
    c0: vpbias::Mat3,
    aid_every: usize,
    cfg: &AhrsConfig,
) -> (AhrsState, Vec<Vec3>) {
    let mut state = AhrsState::new(c0, truth[0].t).unwrap();
    let mut us = Vec::with_capacity(imu.len());
    let mut aid: Option<AidSample> = None;
    let mut course: Option<CourseSample> = None;
    for i in 1..imu.len() {
        if i % aid_every == 0 {
            let s = &truth[i];
            aid = Some(AidSample::at(s.t, s.f_n_true()));
            course = Some(CourseSample { t: s.t, course: s.velocity.y.atan2(s.velocity.x) });
        }
        state = state.step(&imu[i], aid.as_ref(), course.as_ref(), cfg).unwrap();
        us.push(state.u);
    }
    (state, us)
}

fn path(segments: Vec<Segment>, aid_rate: f64) -> TrajectorySpec {
    TrajectorySpec { segments, initial_heading: 0.3, imu_rate: 100.0, aid_rate }
}

#[test]
fn dcm_stays_orthonormal_for_a_million_steps() {
    let cfg = AhrsConfig::with_time_constant(4.0, G);
    let mut state = AhrsState::new(dcm_from_euler(0.05, -0.03, 1.0), 0.0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 1..=1_000_000u32 {
        let t = i as f64 * DT;
        let omega_b = Vec3::new(0.3 * (0.7 * t).sin(), 0.2 * (1.3 * t).cos(), 0.25 * (0.05 * t).sin());
        let imu = ImuSample { t, omega_b, f_b: Vec3::new(0.1, -0.2, -G) };
        let aid = (i % 10 == 0).then(|| AidSample::at(t, Vec3::new(0.0, 0.0, -G)));
        state = state.step(&imu, aid.as_ref(), None, &cfg).unwrap();
        worst = worst.max(ortho_error(&state.c));
    }
    assert!(worst <= 1e-9, "{worst}");
}

#[test]
fn tilt_decays_with_the_attitude_time_constant() {
    let tau = 4.0;
    let cfg = AhrsConfig::with_time_constant(tau, G);
    let theta0 = 5f64.to_radians();
    let mut state = AhrsState::new(dcm_from_euler(theta0, 0.0, 0.0), 0.0).unwrap();
    let aid = |t: f64| AidSample::at(t, Vec3::new(0.0, 0.0, -G));
    let mut crossing = None;
    for i in 1..=4000 {
        let t = i as f64 * DT;
        let imu = ImuSample { t, omega_b: Vec3::zeros(), f_b: Vec3::new(0.0, 0.0, -G) };
        state = state.step(&imu, Some(&aid(t)), None, &cfg).unwrap();
        let (roll, _, _) = euler_from_dcm(&state.c).unwrap();
        if crossing.is_none() && roll.abs() <= theta0 / std::f64::consts::E {
            crossing = Some(t);
        }
    }
    let measured = crossing.expect("tilt never decayed to 1/e");
    assert!((measured - tau).abs() <= 0.1 * tau, "measured {measured}");
}

#[test]
fn straight_torque_equals_gyro_bias() {
    let cfg = AhrsConfig::with_time_constant(4.0, G);
    let spec = path(vec![Segment::straight(120.0, 5.0)], 10.0);
    let truth = build_trajectory(&spec, G).unwrap();
    let b_g = Vec3::new(0.1f64.to_radians(), -0.1f64.to_radians(), 0.0);
    let err = SensorErrorSpec { b_g, b_a: Vec3::new(0.2, -0.2, 0.0), ..SensorErrorSpec::perfect() };
    let imu = synth_imu(&truth, &err, spec.imu_rate).unwrap();
    let (_, us) = run_exact(&truth, &imu, truth[0].attitude, 10, &cfg);
    let tail = &us[us.len() - 4000..];
    let mean = tail.iter().fold(Vec3::zeros(), |a, u| a + u) / tail.len() as f64;
    assert!((mean.xy() - b_g.xy()).norm() <= 0.01 * b_g.norm(), "{mean} vs {b_g}");
}

#[test]
fn steady_torque_matches_error_model_while_turning() {
    let cfg = AhrsConfig::with_time_constant(4.0, G);
    let w = 0.2;
    let spec = path(vec![Segment::turn(100.0, 5.0, w)], 10.0);
    let truth = build_trajectory(&spec, G).unwrap();
    let err = SensorErrorSpec {
        b_g: Vec3::new(0.1f64.to_radians(), -0.1f64.to_radians(), 0.0),
        b_a: Vec3::new(0.2, -0.2, 0.0),
        ..SensorErrorSpec::perfect()
    };
    let imu = synth_imu(&truth, &err, spec.imu_rate).unwrap();
    let (_, us) = run_exact(&truth, &imu, truth[0].attitude, 10, &cfg);
    let tail = &us[us.len() - 3000..];
    let mean = tail.iter().fold(Vec3::zeros(), |a, u| a + u) / tail.len() as f64;
    let oracle = steady_state_torque(&Vec3::new(0.0, 0.0, w), &err.b_g, &err.b_a, &cfg).unwrap();
    let rel = (mean.xy() - oracle.xy()).norm() / oracle.xy().norm();
    assert!(rel <= 0.01, "{mean} vs {oracle}: {rel}");
}

#[test]
fn perfect_sensors_give_zero_torque_over_straights_and_turns() {
    let cfg = AhrsConfig::with_time_constant(4.0, G);
    let spec = path(
        vec![
            Segment::straight(30.0, 5.0),
            Segment::turn(30.0, 5.0, 0.2),
            Segment::straight(20.0, 7.0),
            Segment::turn(20.0, 7.0, -0.1),
            Segment::straight(10.0, 7.0),
        ],
        10.0,
    );
    let truth = build_trajectory(&spec, G).unwrap();
    let imu = synth_imu(&truth, &SensorErrorSpec::perfect(), spec.imu_rate).unwrap();
    let aids = exact_aid(&truth, spec.imu_rate, spec.aid_rate).unwrap();
    assert_eq!(aids.len(), truth.len().div_ceil(10));
    let (_, us) = run_exact(&truth, &imu, truth[0].attitude, 10, &cfg);
    let worst = us.iter().map(|u| u.norm()).fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn nonlinear_loop_follows_linear_error_model() {
    let cfg = AhrsConfig::with_time_constant(4.0, G);
    let w = 0.2;
    let spec = path(vec![Segment::turn(300.0, 5.0, w)], 100.0);
    let truth = build_trajectory(&spec, G).unwrap();
    let err = SensorErrorSpec {
        b_g: Vec3::new(0.1f64.to_radians(), -0.1f64.to_radians(), 0.0),
        b_a: Vec3::new(0.2, -0.2, 0.0),
        ..SensorErrorSpec::perfect()
    };
    let imu = synth_imu(&truth, &err, spec.imu_rate).unwrap();
    let (_, us) = run_exact(&truth, &imu, truth[0].attitude, 1, &cfg);
    let ode = integrate_error_ode(
        ErrorState { theta_b: Vec3::zeros(), t: 0.0 },
        |_| Vec3::new(0.0, 0.0, w),
        &err.b_g,
        &err.b_a,
        &cfg,
        300.0,
        DT,
    )
    .unwrap();
    let lin: Vec<Vec3> = ode.iter().map(|s| torque_from_tilt(&s.theta_b, &err.b_a, &cfg)).collect();
    let scale = lin.iter().map(|u| u.xy().norm()).fold(0.0, f64::max);
    // us[i] is the torque after step i + 1; the ODE sample at the same epoch is lin[i + 1].
    let worst = us.iter().zip(&lin[1..]).map(|(u, l)| (u.xy() - l.xy()).norm()).fold(0.0, f64::max);
    assert!(worst <= 0.02 * scale, "worst {worst} scale {scale}");
}
