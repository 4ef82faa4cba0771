//! Flat-Earth land vehicle truth and sensor synthesis.
//!
//! The vehicle drives level (roll = pitch = 0) along straight segments and
//! constant-rate turn arcs. Speed changes between segments are blended
//! linearly over the first second of the new segment. Yaw rate changes step
//! at segment boundaries; a sample at time `t` reports the rate over the
//! interval ending at `t`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::ahrs::{AidSample, ImuSample};
use crate::geom::{self, Mat3, Vec3};

/// Time over which a speed change between segments is blended, s.
pub const SPEED_BLEND: f64 = 1.0;

/// Largest installation angle accepted per axis, rad.
pub const MAX_MISALIGNMENT: f64 = 0.35;

const IMU_STREAM: u64 = 1;
const AID_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid trajectory: {0}")]
    Trajectory(String),
    #[error("invalid sensor error spec: {0}")]
    Sensor(String),
    #[error("need at least 2 velocity samples, got {0}")]
    TooFewSamples(usize),
    #[error("timestamps not increasing at sample {0}")]
    NonMonotonic(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentKind {
    Straight,
    /// Constant yaw rate, rad/s (positive turns right, toward East from North).
    Turn { yaw_rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    /// s
    pub duration: f64,
    /// m/s
    pub speed: f64,
}

impl Segment {
    pub fn straight(duration: f64, speed: f64) -> Self {
        Self { kind: SegmentKind::Straight, duration, speed }
    }

    pub fn turn(duration: f64, speed: f64, yaw_rate: f64) -> Self {
        Self { kind: SegmentKind::Turn { yaw_rate }, duration, speed }
    }

    pub fn yaw_rate(&self) -> f64 {
        match self.kind {
            SegmentKind::Straight => 0.0,
            SegmentKind::Turn { yaw_rate } => yaw_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub segments: Vec<Segment>,
    /// rad
    pub initial_heading: f64,
    /// Hz
    pub imu_rate: f64,
    /// Hz
    pub aid_rate: f64,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.segments.is_empty() {
            return Err(SimError::Trajectory("no segments".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration.is_finite() && s.duration > 0.0) {
                return Err(SimError::Trajectory(format!("segment {i}: duration must be > 0")));
            }
            if !(s.speed.is_finite() && s.speed >= 0.0) {
                return Err(SimError::Trajectory(format!("segment {i}: speed must be >= 0")));
            }
            if !s.yaw_rate().is_finite() {
                return Err(SimError::Trajectory(format!("segment {i}: yaw rate not finite")));
            }
        }
        if !self.initial_heading.is_finite() {
            return Err(SimError::Trajectory("initial heading not finite".into()));
        }
        if !(self.aid_rate.is_finite() && self.aid_rate > 0.0 && self.imu_rate >= self.aid_rate) {
            return Err(SimError::Trajectory(format!(
                "need 0 < aid_rate <= imu_rate, got {} and {}",
                self.aid_rate, self.imu_rate
            )));
        }
        let ratio = self.imu_rate / self.aid_rate;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(SimError::Trajectory(format!(
                "imu_rate / aid_rate must be an integer, got {ratio}"
            )));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Number of IMU samples per aid sample.
    pub fn decimation(&self) -> usize {
        (self.imu_rate / self.aid_rate).round() as usize
    }
}

/// Analytic kinematics of the vehicle at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub heading: f64,
    pub yaw_rate: f64,
    pub speed: f64,
    pub speed_rate: f64,
    /// NED velocity, m/s.
    pub velocity: Vec3,
    /// NED kinematic acceleration, m/s².
    pub acceleration: Vec3,
    /// Index of the segment the instant belongs to.
    pub segment: usize,
}

#[derive(Debug, Clone, Copy)]
struct CompiledSegment {
    start: f64,
    end: f64,
    heading0: f64,
    speed0: f64,
    blend: f64,
    seg: Segment,
}

/// A validated trajectory that can be evaluated at any time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    spec: TrajectorySpec,
    compiled: Vec<CompiledSegment>,
}

impl Trajectory {
    pub fn new(spec: &TrajectorySpec) -> Result<Self, SimError> {
        spec.validate()?;
        let mut compiled = Vec::with_capacity(spec.segments.len());
        let mut start = 0.0;
        let mut heading = spec.initial_heading;
        let mut speed = spec.segments[0].speed;
        for seg in &spec.segments {
            let blend = if seg.speed != speed { SPEED_BLEND.min(seg.duration) } else { 0.0 };
            compiled.push(CompiledSegment {
                start,
                end: start + seg.duration,
                heading0: heading,
                speed0: speed,
                blend,
                seg: *seg,
            });
            start += seg.duration;
            heading += seg.yaw_rate() * seg.duration;
            speed = seg.speed;
        }
        Ok(Self { spec: spec.clone(), compiled })
    }

    pub fn spec(&self) -> &TrajectorySpec {
        &self.spec
    }

    pub fn duration(&self) -> f64 {
        self.compiled.last().map_or(0.0, |c| c.end)
    }

    /// `(start, end)` of every segment.
    pub fn segment_bounds(&self) -> Vec<(f64, f64)> {
        self.compiled.iter().map(|c| (c.start, c.end)).collect()
    }

    /// Times at which the acceleration is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        for c in &self.compiled {
            if c.blend > 0.0 && c.blend < c.seg.duration {
                out.push(c.start + c.blend);
            }
            out.push(c.end);
        }
        out
    }

    fn segment_index(&self, t: f64) -> usize {
        // Segments own (start, end]; t = 0 belongs to the first.
        let idx = self.compiled.partition_point(|c| c.end < t);
        idx.min(self.compiled.len() - 1)
    }

    pub fn kinematics(&self, t: f64) -> Kinematics {
        let idx = self.segment_index(t);
        let c = &self.compiled[idx];
        let tau = t - c.start;
        let (speed, speed_rate) = if c.blend > 0.0 && tau < c.blend {
            let rate = (c.seg.speed - c.speed0) / c.blend;
            (c.speed0 + rate * tau, rate)
        } else {
            (c.seg.speed, 0.0)
        };
        let yaw_rate = c.seg.yaw_rate();
        let heading = c.heading0 + yaw_rate * tau;
        let (sh, ch) = heading.sin_cos();
        Kinematics {
            heading,
            yaw_rate,
            speed,
            speed_rate,
            velocity: Vec3::new(speed * ch, speed * sh, 0.0),
            acceleration: Vec3::new(speed_rate * ch - speed * yaw_rate * sh, speed_rate * sh + speed * yaw_rate * ch, 0.0),
            segment: idx,
        }
    }

    /// Time spent in turn segments during `[0, t]`.
    pub fn turn_time_until(&self, t: f64) -> f64 {
        self.compiled
            .iter()
            .filter(|c| matches!(c.seg.kind, SegmentKind::Turn { .. }))
            .map(|c| (t.min(c.end) - c.start).max(0.0))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub t: f64,
    /// NED position, m.
    pub position: Vec3,
    /// NED velocity, m/s.
    pub velocity: Vec3,
    /// Vehicle body-to-NED DCM.
    pub attitude: Mat3,
    pub omega_b_true: Vec3,
    pub f_b_true: Vec3,
}

impl TruthSample {
    /// Navigation-frame specific force.
    pub fn f_n_true(&self) -> Vec3 {
        self.attitude * self.f_b_true
    }
}

/// Samples the trajectory at the IMU rate.
pub fn build_trajectory(spec: &TrajectorySpec, g: f64) -> Result<Vec<TruthSample>, SimError> {
    let traj = Trajectory::new(spec)?;
    let n = (traj.duration() * spec.imu_rate).round() as usize;
    let mut out: Vec<TruthSample> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = i as f64 / spec.imu_rate;
        let k = traj.kinematics(t);
        let position = match out.last() {
            Some(prev) => prev.position + (prev.velocity + k.velocity) * (0.5 * (t - prev.t)),
            None => Vec3::zeros(),
        };
        out.push(TruthSample {
            t,
            position,
            velocity: k.velocity,
            attitude: geom::dcm_from_euler(0.0, 0.0, k.heading),
            omega_b_true: Vec3::new(0.0, 0.0, k.yaw_rate),
            f_b_true: Vec3::new(k.speed_rate, k.speed * k.yaw_rate, -g),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorErrorSpec {
    /// Gyro bias in the sensor frame, rad/s.
    pub b_g: Vec3,
    /// Accelerometer bias in the sensor frame, m/s².
    pub b_a: Vec3,
    /// rad/s/√Hz
    pub gyro_noise_density: f64,
    /// m/s²/√Hz
    pub accel_noise_density: f64,
    /// Installation angles (roll, pitch, heading) of the sensor relative to
    /// the vehicle body, rad.
    pub misalignment: (f64, f64, f64),
    /// Per-axis velocity noise std of the aid, m/s.
    pub aid_vel_noise: f64,
    pub seed: u64,
}

impl Default for SensorErrorSpec {
    fn default() -> Self {
        Self::perfect()
    }
}

impl SensorErrorSpec {
    /// No errors of any kind.
    pub fn perfect() -> Self {
        Self {
            b_g: Vec3::zeros(),
            b_a: Vec3::zeros(),
            gyro_noise_density: 0.0,
            accel_noise_density: 0.0,
            misalignment: (0.0, 0.0, 0.0),
            aid_vel_noise: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(SimError::Sensor(format!("{name} must be >= 0, got {v}")))
            }
        };
        nonneg("gyro_noise_density", self.gyro_noise_density)?;
        nonneg("accel_noise_density", self.accel_noise_density)?;
        nonneg("aid_vel_noise", self.aid_vel_noise)?;
        let (r, p, h) = self.misalignment;
        for (name, v) in [("roll", r), ("pitch", p), ("heading", h)] {
            if !(v.is_finite() && v.abs() <= MAX_MISALIGNMENT) {
                return Err(SimError::Sensor(format!("misalignment {name} {v} rad exceeds {MAX_MISALIGNMENT}")));
            }
        }
        if self.b_g.iter().chain(self.b_a.iter()).any(|x| !x.is_finite()) {
            return Err(SimError::Sensor("biases must be finite".into()));
        }
        Ok(())
    }

    /// Sensor-to-body DCM of the installation.
    pub fn mounting(&self) -> Mat3 {
        let (r, p, h) = self.misalignment;
        geom::dcm_from_euler(r, p, h)
    }

    /// Attitude of the sensor frame for a truth sample.
    pub fn sensor_attitude(&self, truth: &TruthSample) -> Mat3 {
        truth.attitude * self.mounting()
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gaussian3(rng: &mut ChaCha8Rng, std: f64) -> Vec3 {
    let mut draw = || -> f64 { StandardNormal.sample(rng) };
    let v = Vec3::new(draw(), draw(), draw());
    v * std
}

/// IMU readings in the (possibly misaligned) sensor frame.
pub fn synth_imu(truth: &[TruthSample], err: &SensorErrorSpec, imu_rate: f64) -> Result<Vec<ImuSample>, SimError> {
    err.validate()?;
    let m_t = err.mounting().transpose();
    let gyro_std = err.gyro_noise_density * imu_rate.sqrt();
    let accel_std = err.accel_noise_density * imu_rate.sqrt();
    let mut rng = rng(err.seed, IMU_STREAM);
    Ok(truth
        .iter()
        .map(|s| {
            let mut omega_b = m_t * s.omega_b_true + err.b_g;
            let mut f_b = m_t * s.f_b_true + err.b_a;
            if gyro_std > 0.0 {
                omega_b += gaussian3(&mut rng, gyro_std);
            }
            if accel_std > 0.0 {
                f_b += gaussian3(&mut rng, accel_std);
            }
            ImuSample { t: s.t, omega_b, f_b }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySample {
    pub t: f64,
    /// NED velocity, m/s.
    pub v: Vec3,
}

fn decimation(imu_rate: f64, aid_rate: f64) -> Result<usize, SimError> {
    if !(aid_rate > 0.0 && aid_rate <= imu_rate) {
        return Err(SimError::Trajectory(format!("need 0 < aid_rate <= imu_rate, got {aid_rate}")));
    }
    let ratio = imu_rate / aid_rate;
    if (ratio - ratio.round()).abs() > 1e-9 {
        return Err(SimError::Trajectory(format!("imu_rate / aid_rate must be an integer, got {ratio}")));
    }
    Ok(ratio.round() as usize)
}

/// Decimated truth velocity plus white noise.
pub fn synth_aid(
    truth: &[TruthSample],
    err: &SensorErrorSpec,
    imu_rate: f64,
    aid_rate: f64,
) -> Result<Vec<VelocitySample>, SimError> {
    err.validate()?;
    let step = decimation(imu_rate, aid_rate)?;
    let mut rng = rng(err.seed, AID_STREAM);
    Ok(truth
        .iter()
        .step_by(step)
        .map(|s| {
            let mut v = s.velocity;
            if err.aid_vel_noise > 0.0 {
                v += gaussian3(&mut rng, err.aid_vel_noise);
            }
            VelocitySample { t: s.t, v }
        })
        .collect())
}

/// Exact navigation-frame specific force at the aid rate.
pub fn exact_aid(truth: &[TruthSample], imu_rate: f64, aid_rate: f64) -> Result<Vec<AidSample>, SimError> {
    let step = decimation(imu_rate, aid_rate)?;
    Ok(truth
        .iter()
        .step_by(step)
        .map(|s| AidSample::at(s.t, s.f_n_true()))
        .collect())
}

/// Specific force from differentiated velocity.
///
/// Output `k` is derived from inputs `k` and `k+1` and becomes available at
/// input `k+1`'s time. Its timestamp is the epoch the value represents: the
/// midpoint of the difference interval, moved back by the DC group delay of
/// the optional first-order smoother (`smoothing_tau = 0` disables it).
/// `span` is the difference interval: unsmoothed, the value is exactly the
/// mean specific force over it.
pub fn differentiate_velocity(vel: &[VelocitySample], g: f64, smoothing_tau: f64) -> Result<Vec<AidSample>, SimError> {
    if vel.len() < 2 {
        return Err(SimError::TooFewSamples(vel.len()));
    }
    let gravity = Vec3::new(0.0, 0.0, g);
    let mut out = Vec::with_capacity(vel.len() - 1);
    let mut smoothed: Option<Vec3> = None;
    for (i, pair) in vel.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.t - a.t;
        if !(dt > 0.0) {
            return Err(SimError::NonMonotonic(i + 1));
        }
        let raw = (b.v - a.v) / dt - gravity;
        let (f, delay) = if smoothing_tau > 0.0 {
            let alpha = -(-dt / smoothing_tau).exp_m1();
            let y = match smoothed {
                Some(y) => y + (raw - y) * alpha,
                None => raw,
            };
            smoothed = Some(y);
            (y, dt * (1.0 - alpha) / alpha)
        } else {
            (raw, 0.0)
        };
        out.push(AidSample { t: 0.5 * (a.t + b.t) - delay, f_ext: f, span: dt });
    }
    Ok(out)
}

/// Course over ground, if the horizontal speed exceeds `min_speed`.
pub fn course_from_velocity(v: &Vec3, min_speed: f64) -> Option<f64> {
    let speed = v.x.hypot(v.y);
    (speed > min_speed).then(|| v.y.atan2(v.x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const G: f64 = 9.81;

    fn spec(segments: Vec<Segment>) -> TrajectorySpec {
        TrajectorySpec { segments, initial_heading: 0.0, imu_rate: 100.0, aid_rate: 10.0 }
    }

    #[test]
    fn straight_segment_is_unaccelerated() {
        let truth = build_trajectory(&spec(vec![Segment::straight(10.0, 5.0)]), G).unwrap();
        assert_eq!(truth.len(), 1001);
        for s in &truth {
            assert_eq!(s.f_b_true, Vec3::new(0.0, 0.0, -G));
            assert_eq!(s.velocity.z, 0.0);
            assert_relative_eq!(s.velocity, Vec3::new(5.0, 0.0, 0.0));
        }
        assert_relative_eq!(truth.last().unwrap().position.x, 50.0, max_relative = 1e-12);
    }

    #[test]
    fn turn_has_centripetal_force() {
        let truth = build_trajectory(&spec(vec![Segment::turn(10.0, 5.0, 0.2)]), G).unwrap();
        for s in truth.iter().skip(1) {
            let horiz = s.f_b_true.xy();
            assert_relative_eq!(horiz.norm(), 1.0, max_relative = 1e-12);
            // Entirely lateral in the body frame.
            assert_eq!(s.f_b_true.x, 0.0);
            assert_eq!(s.omega_b_true, Vec3::new(0.0, 0.0, 0.2));
        }
    }

    #[test]
    fn standing_vehicle() {
        let truth =
            build_trajectory(&spec(vec![Segment::straight(5.0, 0.0), Segment::turn(5.0, 0.0, 0.3)]), G).unwrap();
        for s in &truth {
            assert_eq!(s.f_b_true, Vec3::new(0.0, 0.0, -G));
            let expected = if s.t > 5.0 { 0.3 } else { 0.0 };
            assert_eq!(s.omega_b_true.z, expected);
        }
    }

    #[test]
    fn speed_change_is_blended() {
        let traj = Trajectory::new(&spec(vec![Segment::straight(5.0, 2.0), Segment::straight(5.0, 4.0)])).unwrap();
        let k = traj.kinematics(5.5);
        assert_relative_eq!(k.speed, 3.0, max_relative = 1e-12);
        assert_relative_eq!(k.speed_rate, 2.0);
        assert_eq!(traj.kinematics(6.5).speed, 4.0);
        assert_eq!(traj.breakpoints(), vec![0.0, 5.0, 6.0, 10.0]);
    }

    #[test]
    fn heading_integrates_yaw_rate() {
        let traj = Trajectory::new(&spec(vec![
            Segment::straight(10.0, 5.0),
            Segment::turn(10.0, 5.0, 0.1),
            Segment::straight(10.0, 5.0),
        ]))
        .unwrap();
        assert_relative_eq!(traj.kinematics(30.0).heading, 1.0, max_relative = 1e-12);
        assert_relative_eq!(traj.turn_time_until(15.0), 5.0);
        assert_relative_eq!(traj.turn_time_until(100.0), 10.0);
        // Boundary sample reports the rate of the interval it closes.
        assert_eq!(traj.kinematics(10.0).yaw_rate, 0.0);
        assert_eq!(traj.kinematics(20.0).yaw_rate, 0.1);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(Trajectory::new(&spec(vec![])).is_err());
        assert!(Trajectory::new(&spec(vec![Segment::straight(0.0, 1.0)])).is_err());
        assert!(Trajectory::new(&spec(vec![Segment::straight(1.0, -1.0)])).is_err());
        let mut s = spec(vec![Segment::straight(1.0, 1.0)]);
        s.aid_rate = 200.0;
        assert!(s.validate().is_err());
        s.aid_rate = 30.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn perfect_sensors_reproduce_truth() {
        let s = spec(vec![Segment::straight(5.0, 5.0), Segment::turn(5.0, 5.0, -0.2)]);
        let truth = build_trajectory(&s, G).unwrap();
        let imu = synth_imu(&truth, &SensorErrorSpec::perfect(), s.imu_rate).unwrap();
        for (a, b) in truth.iter().zip(&imu) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.omega_b_true, b.omega_b);
            assert_eq!(a.f_b_true, b.f_b);
        }
    }

    #[test]
    fn bias_only_is_added_exactly() {
        let s = spec(vec![Segment::straight(2.0, 5.0)]);
        let truth = build_trajectory(&s, G).unwrap();
        let err = SensorErrorSpec { b_g: Vec3::new(1.745e-3, 0.0, 0.0), ..SensorErrorSpec::perfect() };
        let imu = synth_imu(&truth, &err, s.imu_rate).unwrap();
        for (a, b) in truth.iter().zip(&imu) {
            assert_eq!(b.omega_b, a.omega_b_true + err.b_g);
        }
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let s = spec(vec![Segment::turn(3.0, 5.0, 0.2)]);
        let truth = build_trajectory(&s, G).unwrap();
        let err = SensorErrorSpec {
            gyro_noise_density: 0.002,
            accel_noise_density: 0.02,
            aid_vel_noise: 0.02,
            seed: 7,
            ..SensorErrorSpec::perfect()
        };
        assert_eq!(synth_imu(&truth, &err, 100.0).unwrap(), synth_imu(&truth, &err, 100.0).unwrap());
        assert_eq!(synth_aid(&truth, &err, 100.0, 10.0).unwrap(), synth_aid(&truth, &err, 100.0, 10.0).unwrap());
        let other = SensorErrorSpec { seed: 8, ..err };
        assert_ne!(synth_imu(&truth, &err, 100.0).unwrap(), synth_imu(&truth, &other, 100.0).unwrap());
    }

    #[test]
    fn noise_has_requested_std() {
        let s = spec(vec![Segment::straight(100.0, 0.0)]);
        let truth = build_trajectory(&s, G).unwrap();
        let err = SensorErrorSpec { gyro_noise_density: 0.002, seed: 3, ..SensorErrorSpec::perfect() };
        let imu = synth_imu(&truth, &err, 100.0).unwrap();
        let var = imu.iter().map(|s| s.omega_b.x * s.omega_b.x).sum::<f64>() / imu.len() as f64;
        // std = density · √rate = 0.02 rad/s
        assert!((var.sqrt() - 0.02).abs() < 0.02 * 0.03, "{}", var.sqrt());
    }

    #[test]
    fn misalignment_rotates_readings() {
        let s = spec(vec![Segment::turn(1.0, 5.0, 0.2)]);
        let truth = build_trajectory(&s, G).unwrap();
        let err = SensorErrorSpec { misalignment: (0.1745, 0.0, 0.0), ..SensorErrorSpec::perfect() };
        let imu = synth_imu(&truth, &err, 100.0).unwrap();
        let last = imu.last().unwrap();
        assert_relative_eq!(last.omega_b.norm(), 0.2, max_relative = 1e-12);
        assert_relative_eq!(last.omega_b.z, 0.2 * 0.1745f64.cos(), max_relative = 1e-12);
        let bad = SensorErrorSpec { misalignment: (0.5, 0.0, 0.0), ..SensorErrorSpec::perfect() };
        assert!(synth_imu(&truth, &bad, 100.0).is_err());
    }

    #[test]
    fn aid_decimation() {
        let s = spec(vec![Segment::straight(2.0, 5.0)]);
        let truth = build_trajectory(&s, G).unwrap();
        let aid = synth_aid(&truth, &SensorErrorSpec::perfect(), 100.0, 10.0).unwrap();
        assert_eq!(aid.len(), 21);
        for (k, a) in aid.iter().enumerate() {
            assert_eq!(a.t, truth[10 * k].t);
            assert_eq!(a.v, Vec3::new(5.0, 0.0, 0.0));
        }
        assert_eq!(synth_aid(&truth, &SensorErrorSpec::perfect(), 100.0, 100.0).unwrap().len(), truth.len());
    }

    #[test]
    fn differentiate_constant_velocity() {
        let vel: Vec<_> = (0..10).map(|i| VelocitySample { t: i as f64 * 0.1, v: Vec3::new(5.0, 1.0, 0.0) }).collect();
        let aid = differentiate_velocity(&vel, G, 0.2).unwrap();
        assert_eq!(aid.len(), 9);
        for a in &aid {
            assert_relative_eq!(a.f_ext, Vec3::new(0.0, 0.0, -G));
        }
    }

    #[test]
    fn differentiate_ramp() {
        let vel: Vec<_> = (0..=20)
            .map(|i| {
                let t = i as f64 * 0.1;
                VelocitySample { t, v: Vec3::new(t.clamp(0.0, 1.0), 0.0, 0.0) }
            })
            .collect();
        let aid = differentiate_velocity(&vel, G, 0.0).unwrap();
        for a in aid.iter().filter(|a| a.t < 1.0) {
            assert_relative_eq!(a.f_ext, Vec3::new(1.0, 0.0, -G), max_relative = 1e-9);
            // Midpoint of the difference interval.
            assert!(((a.t * 100.0).round() as i64) % 10 == 5);
        }
    }

    #[test]
    fn differentiate_timestamps_include_smoother_delay() {
        let vel: Vec<_> = (0..50).map(|i| VelocitySample { t: i as f64 * 0.1, v: Vec3::new(i as f64 * 0.1, 0.0, 0.0) }).collect();
        let tau = 0.2;
        let aid = differentiate_velocity(&vel, G, tau).unwrap();
        let alpha = 1.0 - (-0.1f64 / tau).exp();
        let delay = 0.1 * (1.0 - alpha) / alpha;
        assert_relative_eq!(aid[3].t, 0.35 - delay, max_relative = 1e-12);
    }

    #[test]
    fn differentiate_errors() {
        let one = [VelocitySample { t: 0.0, v: Vec3::zeros() }];
        assert_eq!(differentiate_velocity(&one, G, 0.2), Err(SimError::TooFewSamples(1)));
        let back = [
            VelocitySample { t: 1.0, v: Vec3::zeros() },
            VelocitySample { t: 0.5, v: Vec3::zeros() },
        ];
        assert_eq!(differentiate_velocity(&back, G, 0.2), Err(SimError::NonMonotonic(1)));
    }

    #[test]
    fn course_requires_motion() {
        assert_eq!(course_from_velocity(&Vec3::new(0.1, 0.1, 0.0), 1.0), None);
        assert_relative_eq!(course_from_velocity(&Vec3::new(0.0, 3.0, 0.0), 1.0).unwrap(), std::f64::consts::FRAC_PI_2);
    }
}
