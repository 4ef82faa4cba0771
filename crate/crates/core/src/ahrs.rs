//! Virtual-platform strapdown mechanization with acceleration-aided torquing.
//!
//! The DCM `c` maps body vectors onto a computed locally level NED
//! "platform". It evolves as `Ċ = C·[ω_b×] − [ω_p×]·C`, where `ω_p` is the
//! rate at which the platform is torqued. The torquing rate is formed from the
//! mismatch between the projected accelerometer force `f_p = C·f_b` and the
//! navigation-frame specific force reported by an external aid.
//!
//! Aid samples carry the time at which they are valid, which may lag the IMU
//! stream (differentiated GNSS velocity is both delayed and smoothed). The
//! state keeps a short history of `(t, C, f_b)` so each aid is compared with
//! the platform force at its own epoch. The resulting correction is held in
//! the body frame until the next aid sample; the body-frame torque `u` is
//! what the bias estimator consumes.

use std::collections::VecDeque;

use thiserror::Error;

use crate::geom::{self, GeomError, Mat3, Vec3};

/// Longest integration step accepted by [`AhrsState::step`].
pub const MAX_STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AhrsError {
    #[error("invalid AHRS configuration: {0}")]
    Config(String),
    #[error("non-monotonic timestamp: {t} after {prev}")]
    NonMonotonic { prev: f64, t: f64 },
    #[error("integration step {0} s outside (0, {MAX_STEP}]")]
    Step(f64),
    #[error("aid sample at {aid} s is newer than the IMU sample at {imu} s")]
    AidFromFuture { aid: f64, imu: f64 },
    #[error("attitude update failed: {0}")]
    Geom(#[from] GeomError),
}

/// One gyro/accelerometer triad reading in the sensor (body) frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    /// Angular rate, rad/s.
    pub omega_b: Vec3,
    /// Specific force, m/s².
    pub f_b: Vec3,
}

/// Navigation-frame specific force supplied by the aid, valid at `t`.
///
/// A nonzero `span` marks the value as the mean over `[t − span/2, t + span/2]`,
/// as a velocity difference is; the platform force is then averaged over the
/// same interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AidSample {
    pub t: f64,
    pub f_ext: Vec3,
    pub span: f64,
}

impl AidSample {
    /// Instantaneous value at `t`.
    pub fn at(t: f64, f_ext: Vec3) -> Self {
        Self { t, f_ext, span: 0.0 }
    }
}

/// Course over ground (rad, from North toward East) valid at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CourseSample {
    pub t: f64,
    pub course: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AhrsConfig {
    /// Attitude correction time constant `1/(k·g)`, seconds.
    pub tau_att: f64,
    /// Local gravity magnitude, m/s².
    pub g: f64,
    /// Heading slaving gain, 1/s. Zero disables slaving.
    pub heading_gain: f64,
    /// Aid samples older than this switch the platform to open-loop, seconds.
    pub max_aid_age: f64,
}

impl Default for AhrsConfig {
    fn default() -> Self {
        Self {
            tau_att: 4.0,
            g: 9.81,
            heading_gain: 1.0,
            max_aid_age: 0.5,
        }
    }
}

impl AhrsConfig {
    pub fn with_time_constant(tau_att: f64, g: f64) -> Self {
        Self {
            tau_att,
            g,
            ..Self::default()
        }
    }

    /// Correction gain `k`, in (rad/s)/(m/s²).
    pub fn k(&self) -> f64 {
        1.0 / (self.tau_att * self.g)
    }

    /// `k·g`, the attitude loop bandwidth in 1/s.
    pub fn kg(&self) -> f64 {
        1.0 / self.tau_att
    }

    /// Platform-frame gain vector `k_p = −k·ĝ`, with ĝ pointing Down.
    pub fn k_p(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.k())
    }

    pub fn validate(&self) -> Result<(), AhrsError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.tau_att) {
            return Err(AhrsError::Config(format!("tau_att must be > 0, got {}", self.tau_att)));
        }
        if !positive(self.g) {
            return Err(AhrsError::Config(format!("g must be > 0, got {}", self.g)));
        }
        if !(self.heading_gain.is_finite() && self.heading_gain >= 0.0) {
            return Err(AhrsError::Config(format!(
                "heading_gain must be >= 0, got {}",
                self.heading_gain
            )));
        }
        if !positive(self.max_aid_age) {
            return Err(AhrsError::Config(format!(
                "max_aid_age must be > 0, got {}",
                self.max_aid_age
            )));
        }
        Ok(())
    }
}

/// Accelerometer force projected onto the platform.
pub fn project_force(c: &Mat3, f_b: &Vec3) -> Vec3 {
    c * f_b
}

/// Platform torquing rate `ω_p = −[k_p×](f_ext − f_p)`.
///
/// `k_p` is vertical, so the result is always horizontal.
pub fn correction_rate(f_ext: &Vec3, f_p: &Vec3, cfg: &AhrsConfig) -> Vec3 {
    -(cfg.k_p().cross(&(f_ext - f_p)))
}

/// Vertical platform rate that slaves the computed heading to the course.
pub fn heading_slave_rate(c: &Mat3, course_aid: f64, cfg: &AhrsConfig) -> Vec3 {
    if cfg.heading_gain == 0.0 {
        return Vec3::zeros();
    }
    let err = geom::wrap_angle(geom::heading_of(c) - course_aid);
    Vec3::new(0.0, 0.0, cfg.heading_gain * err)
}

/// Attitude whose roll and pitch level the given specific force, with the
/// supplied heading.
pub fn level_attitude(f_b: &Vec3, heading: f64) -> Mat3 {
    let roll = (-f_b.y).atan2(-f_b.z);
    let pitch = f_b.x.atan2((f_b.y * f_b.y + f_b.z * f_b.z).sqrt());
    geom::dcm_from_euler(roll, pitch, heading)
}

#[derive(Debug, Clone, Copy)]
struct Snapshot {
    t: f64,
    c: Mat3,
    f_b: Vec3,
}

#[derive(Debug, Clone)]
pub struct AhrsState {
    /// Body-to-platform DCM.
    pub c: Mat3,
    /// Body-frame torque `Cᵀ·ω_p` from the acceleration correction, rad/s.
    pub u: Vec3,
    pub t: f64,
    /// True when no usable aid is held; the platform then propagates on the
    /// gyros alone and `u` keeps its last value.
    pub stale: bool,
    /// True when this step consumed a new aid sample.
    pub aid_consumed: bool,
    heading_rate: f64,
    last_aid: Option<f64>,
    last_course: Option<f64>,
    history: VecDeque<Snapshot>,
}

impl AhrsState {
    pub fn new(c: Mat3, t: f64) -> Result<Self, AhrsError> {
        let c = geom::orthonormalize(&c)?;
        Ok(Self {
            c,
            u: Vec3::zeros(),
            t,
            stale: true,
            aid_consumed: false,
            heading_rate: 0.0,
            last_aid: None,
            last_course: None,
            history: VecDeque::new(),
        })
    }

    /// Platform rate applied during the next propagation.
    pub fn platform_rate(&self, c: &Mat3) -> Vec3 {
        let mut w = Vec3::new(0.0, 0.0, self.heading_rate);
        if !self.stale {
            w += c * self.u;
        }
        w
    }

    /// `exp(−[ω_p×]·dt)·C·exp([ω_b×]·dt)`: exact for rates held over the step.
    fn propagate(c: &Mat3, omega_b: &Vec3, omega_p: &Vec3, dt: f64) -> Mat3 {
        geom::rotation(&(omega_p * -dt)) * c * geom::rotation(&(omega_b * dt))
    }

    /// Platform force and DCM at an earlier epoch, from the history buffer.
    fn recall(&self, t: f64) -> Option<(Vec3, Mat3)> {
        let newest = self.history.back()?;
        if t >= newest.t {
            return Some((newest.c * newest.f_b, newest.c));
        }
        let idx = self.history.partition_point(|s| s.t <= t);
        if idx == 0 {
            return None;
        }
        let a = &self.history[idx - 1];
        let b = &self.history[idx];
        let w = (t - a.t) / (b.t - a.t);
        let f_p = (a.c * a.f_b) * (1.0 - w) + (b.c * b.f_b) * w;
        let c = if w < 0.5 { a.c } else { b.c };
        Some((f_p, c))
    }

    /// Mean platform force over `[lo, hi]` (trapezoid on the history) and the
    /// DCM at the interval midpoint.
    fn recall_mean(&self, lo: f64, hi: f64) -> Option<(Vec3, Mat3)> {
        let (f_lo, _) = self.recall(lo)?;
        let (f_hi, _) = self.recall(hi)?;
        if self.history.front()?.t > lo {
            return None;
        }
        let (_, c) = self.recall(0.5 * (lo + hi))?;
        let mut sum = Vec3::zeros();
        let (mut prev_t, mut prev_f) = (lo, f_lo);
        for s in self.history.iter().filter(|s| s.t > lo && s.t < hi) {
            let f = s.c * s.f_b;
            sum += (prev_f + f) * (0.5 * (s.t - prev_t));
            (prev_t, prev_f) = (s.t, f);
        }
        let end = hi.min(self.history.back()?.t).max(prev_t);
        sum += (prev_f + f_hi) * (0.5 * (end - prev_t));
        Some((sum / (end - lo), c))
    }

    /// Advances the platform to `imu.t`.
    ///
    /// The rates held from earlier aid samples drive this step's
    /// propagation; `aid` and `course`, when given, set the rates for the
    /// following steps. The heading-slaving rate never enters `u`.
    pub fn step(
        mut self,
        imu: &ImuSample,
        aid: Option<&AidSample>,
        course: Option<&CourseSample>,
        cfg: &AhrsConfig,
    ) -> Result<Self, AhrsError> {
        let dt = imu.t - self.t;
        if dt.is_nan() || dt <= 0.0 {
            return Err(AhrsError::NonMonotonic { prev: self.t, t: imu.t });
        }
        if dt > MAX_STEP {
            return Err(AhrsError::Step(dt));
        }

        // Platform rate taken at the half-step attitude.
        let c_mid = Self::propagate(&self.c, &imu.omega_b, &self.platform_rate(&self.c), 0.5 * dt);
        let omega_p = self.platform_rate(&c_mid);
        self.c = geom::orthonormalize(&Self::propagate(&self.c, &imu.omega_b, &omega_p, dt))?;
        self.t = imu.t;

        self.history.push_back(Snapshot {
            t: imu.t,
            c: self.c,
            f_b: imu.f_b,
        });
        let horizon = imu.t - cfg.max_aid_age - MAX_STEP;
        while self.history.len() > 2 && self.history[1].t < horizon {
            self.history.pop_front();
        }

        self.aid_consumed = false;
        if let Some(aid) = aid {
            if aid.t > imu.t + 1e-9 {
                return Err(AhrsError::AidFromFuture { aid: aid.t, imu: imu.t });
            }
            let newer = self.last_aid.is_none_or(|last| aid.t > last);
            if newer {
                let recalled = if aid.span > 0.0 {
                    self.recall_mean(aid.t - 0.5 * aid.span, aid.t + 0.5 * aid.span)
                } else {
                    self.recall(aid.t)
                };
                if let Some((f_p, c_then)) = recalled {
                    let w_p = correction_rate(&aid.f_ext, &f_p, cfg);
                    self.u = c_then.transpose() * w_p;
                    self.last_aid = Some(aid.t);
                    self.aid_consumed = true;
                }
            }
        }
        self.stale = self.last_aid.is_none_or(|t| imu.t - t > cfg.max_aid_age);

        if let Some(course) = course {
            if course.t > imu.t + 1e-9 {
                return Err(AhrsError::AidFromFuture { aid: course.t, imu: imu.t });
            }
            if self.last_course.is_none_or(|last| course.t > last) {
                if let Some((_, c_then)) = self.recall(course.t) {
                    self.heading_rate = heading_slave_rate(&c_then, course.course, cfg).z;
                    self.last_course = Some(course.t);
                }
            }
        }
        if self.last_course.is_none_or(|t| imu.t - t > cfg.max_aid_age) {
            self.heading_rate = 0.0;
        }

        Ok(self)
    }

    /// `(roll, pitch, heading)` of the current platform.
    pub fn euler(&self) -> Result<(f64, f64, f64), GeomError> {
        geom::euler_from_dcm(&self.c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    const G: f64 = 9.81;

    fn cfg() -> AhrsConfig {
        AhrsConfig::with_time_constant(4.0, G)
    }

    #[test]
    fn time_constant_relation() {
        let c = cfg();
        assert_relative_eq!(c.tau_att, 1.0 / (c.k() * c.g), epsilon = 1e-15);
        assert!(AhrsConfig::with_time_constant(-1.0, G).validate().is_err());
        assert!(AhrsConfig { heading_gain: -0.1, ..cfg() }.validate().is_err());
    }

    #[test]
    fn project_force_cases() {
        let f = Vec3::new(0.0, 0.0, -G);
        assert_eq!(project_force(&Mat3::identity(), &f), f);

        let c = geom::dcm_from_euler(0.0, 0.0, FRAC_PI_2);
        let f_b = Vec3::new(1.0, 0.0, -G);
        let f_p = project_force(&c, &f_b);
        // Body x points East at heading 90°.
        assert_relative_eq!(f_p, Vec3::new(0.0, 1.0, -G), epsilon = 1e-15);
        assert!((f_p.norm() - f_b.norm()).abs() <= 1e-9 * f_b.norm());

        assert_eq!(project_force(&c, &Vec3::zeros()), Vec3::zeros());
    }

    #[test]
    fn correction_rate_cases() {
        let cfg = AhrsConfig::with_time_constant(1.0 / 0.25, G);
        let f = Vec3::new(0.3, -0.2, -G);
        assert_eq!(correction_rate(&f, &f, &cfg), Vec3::zeros());

        let w = correction_rate(&Vec3::new(0.1, 0.0, 0.0), &Vec3::zeros(), &cfg);
        let k = 0.25 / G;
        // −(0,0,−k)×(0.1,0,0) = (0, 0.1·k, 0)
        assert_relative_eq!(w, Vec3::new(0.0, 0.1 * k, 0.0), epsilon = 1e-18);
        assert!((w.y - 0.0025484).abs() < 1e-7);

        let w = correction_rate(&Vec3::new(0.0, 0.0, 5.0), &Vec3::zeros(), &cfg);
        assert_eq!(w, Vec3::zeros());
    }

    #[test]
    fn correction_rate_is_horizontal() {
        let cfg = cfg();
        for d in [Vec3::new(1.0, 2.0, 3.0), Vec3::new(-0.5, 0.1, -7.0)] {
            assert_eq!(correction_rate(&d, &Vec3::zeros(), &cfg).z, 0.0);
        }
    }

    #[test]
    fn heading_slave_cases() {
        let cfg = AhrsConfig { heading_gain: 1.0, ..cfg() };
        let c = geom::dcm_from_euler(0.0, 0.0, 0.7);
        assert_relative_eq!(heading_slave_rate(&c, 0.7, &cfg), Vec3::zeros(), epsilon = 1e-15);

        let w = heading_slave_rate(&c, 0.6, &cfg);
        assert_relative_eq!(w.z, 0.1, epsilon = 1e-12);

        let off = AhrsConfig { heading_gain: 0.0, ..cfg };
        assert_eq!(heading_slave_rate(&c, 0.0, &off), Vec3::zeros());
    }

    #[test]
    fn heading_slaving_reduces_error() {
        let cfg = AhrsConfig { heading_gain: 1.0, ..cfg() };
        let mut state = AhrsState::new(geom::dcm_from_euler(0.0, 0.0, 0.1), 0.0).unwrap();
        let imu = |t| ImuSample { t, omega_b: Vec3::zeros(), f_b: Vec3::new(0.0, 0.0, -G) };
        let mut errors = vec![];
        for i in 1..=3 {
            let t = i as f64 * 0.01;
            let course = CourseSample { t, course: 0.0 };
            state = state.step(&imu(t), None, Some(&course), &cfg).unwrap();
            errors.push(geom::heading_of(&state.c).abs());
        }
        assert!(errors[2] < errors[1] && errors[1] <= errors[0], "{errors:?}");
    }

    #[test]
    fn perfect_sensor_equilibrium() {
        let cfg = cfg();
        let f = Vec3::new(0.0, 0.0, -G);
        let mut state = AhrsState::new(Mat3::identity(), 0.0).unwrap();
        for i in 1..=1000 {
            let t = i as f64 * 0.01;
            let imu = ImuSample { t, omega_b: Vec3::zeros(), f_b: f };
            let aid = AidSample::at(t, f);
            state = state.step(&imu, Some(&aid), None, &cfg).unwrap();
            assert_eq!(state.u, Vec3::zeros());
        }
        assert_relative_eq!(state.c, Mat3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn no_aid_propagates_open_loop() {
        let cfg = cfg();
        let f = Vec3::new(0.0, 0.0, -G);
        let mut state = AhrsState::new(Mat3::identity(), 0.0).unwrap();
        // One aided step with a mismatch sets a nonzero torque.
        let imu = ImuSample { t: 0.01, omega_b: Vec3::zeros(), f_b: f };
        let aid = AidSample::at(0.01, Vec3::new(0.1, 0.0, -G));
        state = state.step(&imu, Some(&aid), None, &cfg).unwrap();
        let u = state.u;
        assert!(u.norm() > 0.0 && !state.stale);

        // Long enough without aid to go stale.
        let w = Vec3::new(0.0, 0.0, 0.1);
        let mut t = 0.01;
        while !state.stale {
            t += 0.01;
            state = state.step(&ImuSample { t, omega_b: w, f_b: f }, None, None, &cfg).unwrap();
            assert_eq!(state.u, u);
        }
        // Now the platform follows the gyros only.
        let c0 = state.c;
        let t1 = t + 0.01;
        state = state.step(&ImuSample { t: t1, omega_b: w, f_b: f }, None, None, &cfg).unwrap();
        let expected = c0 * geom::dcm_from_euler(0.0, 0.0, 0.1 * 0.01);
        assert_relative_eq!(state.c, expected, epsilon = 1e-9);
        assert!(state.stale);
        assert_eq!(state.u, u);
    }

    #[test]
    fn rejects_bad_timestamps() {
        let cfg = cfg();
        let state = AhrsState::new(Mat3::identity(), 1.0).unwrap();
        let imu = ImuSample { t: 1.0, omega_b: Vec3::zeros(), f_b: Vec3::zeros() };
        assert!(matches!(
            state.clone().step(&imu, None, None, &cfg),
            Err(AhrsError::NonMonotonic { .. })
        ));
        let imu = ImuSample { t: 1.5, ..imu };
        assert!(matches!(state.step(&imu, None, None, &cfg), Err(AhrsError::Step(_))));
    }

    #[test]
    fn delayed_aid_uses_matching_epoch() {
        // A stale-but-valid aid sample is compared with the platform force
        // recorded at its own epoch, not the latest one.
        let cfg = cfg();
        let mut state = AhrsState::new(Mat3::identity(), 0.0).unwrap();
        let mut t = 0.0;
        for i in 1..=30 {
            t = i as f64 * 0.01;
            let fx = if i == 10 { 1.0 } else { 0.0 };
            let imu = ImuSample { t, omega_b: Vec3::zeros(), f_b: Vec3::new(fx, 0.0, -G) };
            state = state.step(&imu, None, None, &cfg).unwrap();
        }
        let aid = AidSample::at(0.1, Vec3::new(1.0, 0.0, -G));
        let imu = ImuSample { t: t + 0.01, omega_b: Vec3::zeros(), f_b: Vec3::new(0.0, 0.0, -G) };
        state = state.step(&imu, Some(&aid), None, &cfg).unwrap();
        assert!(state.aid_consumed);
        assert!(state.u.norm() < 1e-12, "{:?}", state.u);
    }

    #[test]
    fn leveling_recovers_tilt() {
        let c = geom::dcm_from_euler(0.05, -0.03, 1.0);
        let f_b = c.transpose() * Vec3::new(0.0, 0.0, -G);
        let lvl = level_attitude(&f_b, 1.0);
        assert_relative_eq!(lvl, c, epsilon = 1e-12);
    }
}
