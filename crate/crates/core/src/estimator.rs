//! Two-stage bias estimation from the platform torque.
//!
//! In steady state the torque `u` applied to the virtual platform balances the
//! sensor biases. On straight motion it equals the gyro bias; while turning at
//! body rate `ω_z` (gyro bias already removed) the horizontal accelerometer
//! bias follows from
//!
//! ```text
//! b_a = g · | 1/ω_z  −τ     0 | · u
//!           | τ      1/ω_z  0 |
//!           | 0      0      0 |
//! ```
//!
//! with `τ` the attitude correction time constant. Each raw observation is
//! smoothed by its own first-order low-pass filter, and the motion regime
//! decides which of the two filters runs.

use thiserror::Error;

use crate::ahrs::ImuSample;
use crate::geom::Vec3;

/// Clamp on the gyro bias estimate norm, rad/s.
pub const MAX_GYRO_BIAS: f64 = 0.1;
/// Clamp on the accelerometer bias estimate norm, m/s².
pub const MAX_ACCEL_BIAS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("invalid estimator configuration: {0}")]
    Config(String),
    #[error("turn rate {omega_zb} rad/s below threshold {threshold} rad/s")]
    TurnRateTooLow { omega_zb: f64, threshold: f64 },
}

/// How estimates relate to the AHRS input stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Estimates are subtracted from the sensor data before the AHRS sees it,
    /// so `u` measures the residual bias.
    Feedback,
    /// The AHRS runs on raw data; estimates are an output only.
    BlackBox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    Straight,
    /// Turning at the given smoothed body z rate.
    Turning(f64),
    Excluded,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Straight => "straight",
            Regime::Turning(_) => "turning",
            Regime::Excluded => "excluded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Confidence {
    Nominal,
    Low,
}

/// Per-axis confidence of the gyro bias estimate. The vertical channel is
/// dominated by heading slaving, which is not part of `u`, so its estimate
/// is reported but not trusted.
pub const GYRO_AXIS_CONFIDENCE: [Confidence; 3] = [Confidence::Nominal, Confidence::Nominal, Confidence::Low];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Gyro bias filter time constant, s.
    pub tau_g: f64,
    /// Accelerometer bias filter time constant, s.
    pub tau_a: f64,
    /// Attitude correction time constant of the AHRS, s.
    pub tau_att: f64,
    /// Gravity magnitude, m/s².
    pub g: f64,
    /// Minimum |ω_z| for the turning regime, rad/s.
    pub turn_threshold: f64,
    /// Maximum ‖ω‖ for the straight regime, rad/s.
    pub straight_threshold: f64,
    /// Time a regime condition must hold before it is entered, s.
    pub dwell: f64,
    /// Time constant of the gyro smoother used for classification, s.
    pub smoothing_tau: f64,
    pub mode: Mode,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            tau_g: 40.0,
            tau_a: 40.0,
            tau_att: 4.0,
            g: 9.81,
            turn_threshold: 0.05,
            straight_threshold: 0.02,
            dwell: 2.0,
            smoothing_tau: 0.5,
            mode: Mode::Feedback,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(EstimatorError::Config(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("tau_g", self.tau_g)?;
        positive("tau_a", self.tau_a)?;
        positive("tau_att", self.tau_att)?;
        positive("g", self.g)?;
        positive("straight_threshold", self.straight_threshold)?;
        positive("smoothing_tau", self.smoothing_tau)?;
        if !(self.straight_threshold < self.turn_threshold) || !self.turn_threshold.is_finite() {
            return Err(EstimatorError::Config(format!(
                "need straight_threshold < turn_threshold, got {} and {}",
                self.straight_threshold, self.turn_threshold
            )));
        }
        if !(self.dwell.is_finite() && self.dwell >= 0.0) {
            return Err(EstimatorError::Config(format!("dwell must be >= 0, got {}", self.dwell)));
        }
        Ok(())
    }
}

/// Regime implied by a smoothed rate at one instant, ignoring dwell.
pub fn classify_regime(omega_b_smoothed: &Vec3, cfg: &EstimatorConfig) -> Regime {
    if omega_b_smoothed.norm() < cfg.straight_threshold {
        Regime::Straight
    } else if omega_b_smoothed.z.abs() >= cfg.turn_threshold {
        Regime::Turning(omega_b_smoothed.z)
    } else {
        Regime::Excluded
    }
}

/// Smooths the compensated gyro signal and applies the dwell requirement.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RegimeClassifier {
    smoothed: Option<Vec3>,
    straight_for: f64,
    turning_for: f64,
}

impl RegimeClassifier {
    pub fn smoothed(&self) -> Option<Vec3> {
        self.smoothed
    }

    pub fn update(&mut self, omega_b: &Vec3, dt: f64, cfg: &EstimatorConfig) -> Regime {
        let s = match self.smoothed {
            Some(y) => lowpass_step(&y, omega_b, cfg.smoothing_tau, dt),
            None => *omega_b,
        };
        self.smoothed = Some(s);
        match classify_regime(&s, cfg) {
            Regime::Straight => {
                self.straight_for += dt;
                self.turning_for = 0.0;
            }
            Regime::Turning(_) => {
                self.turning_for += dt;
                self.straight_for = 0.0;
            }
            Regime::Excluded => {
                self.straight_for = 0.0;
                self.turning_for = 0.0;
            }
        }
        // Small slack so a dwell that is a multiple of dt is met on time.
        let held = |d: f64| d + 1e-9 >= cfg.dwell;
        if self.straight_for > 0.0 && held(self.straight_for) {
            Regime::Straight
        } else if self.turning_for > 0.0 && held(self.turning_for) {
            Regime::Turning(s.z)
        } else {
            Regime::Excluded
        }
    }
}

/// Raw gyro bias observation on straight motion: the torque itself.
pub fn gyro_bias_observation(u: &Vec3) -> Vec3 {
    *u
}

/// Raw horizontal accelerometer bias observation while turning at `omega_zb`.
pub fn accel_bias_observation(u: &Vec3, omega_zb: f64, cfg: &EstimatorConfig) -> Result<Vec3, EstimatorError> {
    if !(omega_zb.abs() >= cfg.turn_threshold) {
        return Err(EstimatorError::TurnRateTooLow {
            omega_zb,
            threshold: cfg.turn_threshold,
        });
    }
    let inv_w = 1.0 / omega_zb;
    let tau = cfg.tau_att;
    Ok(Vec3::new(
        cfg.g * (inv_w * u.x - tau * u.y),
        cfg.g * (tau * u.x + inv_w * u.y),
        0.0,
    ))
}

/// Exact discretization of `ẏ = (x − y)/τ` over `dt` for a held input.
pub fn lowpass_step(y: &Vec3, x: &Vec3, tau_f: f64, dt: f64) -> Vec3 {
    let alpha = -(-dt / tau_f).exp_m1();
    y + (x - y) * alpha
}

fn clamp_norm(v: Vec3, max: f64) -> Vec3 {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasEstimate {
    /// Gyro bias, rad/s.
    pub b_g_hat: Vec3,
    /// Accelerometer bias, m/s². The vertical component is always zero.
    pub b_a_hat: Vec3,
    pub t: f64,
    /// False when the last update was skipped because `u` was stale.
    pub fresh: bool,
}

impl BiasEstimate {
    pub fn zero(t: f64) -> Self {
        Self {
            b_g_hat: Vec3::zeros(),
            b_a_hat: Vec3::zeros(),
            t,
            fresh: true,
        }
    }

    /// Advances the filter selected by `regime` by `dt`.
    ///
    /// In feedback mode the torque reflects what is left after compensation,
    /// so the filter target is the current estimate plus the observation.
    pub fn update(
        &self,
        u: &Vec3,
        u_stale: bool,
        regime: Regime,
        cfg: &EstimatorConfig,
        dt: f64,
    ) -> Result<BiasEstimate, EstimatorError> {
        let mut next = *self;
        next.t = self.t + dt;
        if u_stale {
            next.fresh = false;
            return Ok(next);
        }
        next.fresh = true;
        let offset = |current: Vec3| match cfg.mode {
            Mode::Feedback => current,
            Mode::BlackBox => Vec3::zeros(),
        };
        match regime {
            Regime::Straight => {
                let target = offset(self.b_g_hat) + gyro_bias_observation(u);
                next.b_g_hat = clamp_norm(lowpass_step(&self.b_g_hat, &target, cfg.tau_g, dt), MAX_GYRO_BIAS);
            }
            Regime::Turning(omega_zb) => {
                let target = offset(self.b_a_hat) + accel_bias_observation(u, omega_zb, cfg)?;
                let mut b = lowpass_step(&self.b_a_hat, &target, cfg.tau_a, dt);
                b.z = 0.0;
                next.b_a_hat = clamp_norm(b, MAX_ACCEL_BIAS);
            }
            Regime::Excluded => {}
        }
        Ok(next)
    }
}

/// Removes the current bias estimates from a raw IMU sample.
pub fn compensate(imu: &ImuSample, est: &BiasEstimate) -> ImuSample {
    ImuSample {
        t: imu.t,
        omega_b: imu.omega_b - est.b_g_hat,
        f_b: imu.f_b - est.b_a_hat,
    }
}
