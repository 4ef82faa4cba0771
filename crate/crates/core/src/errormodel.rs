//! Linearized tilt-error model of the corrected platform.
//!
//! With level attitude, zero heading error and `f_D = −g`, the body-frame
//! tilt error obeys
//!
//! ```text
//! θ̇ + ([ω_b×] + kg·I)·θ = b_g − [k_p×]·b_a
//! ```
//!
//! and the torque balances it as `u = b_g − θ̇ − [ω_b×]·θ`. These functions
//! give the transient, the steady state and the torque it implies, for
//! checking the full nonlinear loop.

use thiserror::Error;

use crate::ahrs::AhrsConfig;
use crate::geom::{self, GeomError, Mat3, Vec3};

/// Tilt magnitude beyond which the linearization is not trusted, rad.
pub const SMALL_ANGLE_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ErrorModelError {
    #[error("tilt error left the small-angle regime at t = {t} s (|θ| = {norm} rad)")]
    SmallAngle { t: f64, norm: f64 },
    #[error("invalid integration span: {0}")]
    Span(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorState {
    /// Body-frame tilt error, rad.
    pub theta_b: Vec3,
    pub t: f64,
}

fn system_matrix(omega_b: &Vec3, cfg: &AhrsConfig) -> Mat3 {
    geom::skew(omega_b) + Mat3::identity() * cfg.kg()
}

fn forcing(b_g: &Vec3, b_a: &Vec3, cfg: &AhrsConfig) -> Vec3 {
    b_g - cfg.k_p().cross(b_a)
}

/// Time derivative of the tilt error.
pub fn tilt_rate(theta_b: &Vec3, omega_b: &Vec3, b_g: &Vec3, b_a: &Vec3, cfg: &AhrsConfig) -> Vec3 {
    forcing(b_g, b_a, cfg) - system_matrix(omega_b, cfg) * theta_b
}

/// Torque implied by a tilt state: `u = kg·θ + [k_p×]·b_a`.
pub fn torque_from_tilt(theta_b: &Vec3, b_a: &Vec3, cfg: &AhrsConfig) -> Vec3 {
    theta_b * cfg.kg() + cfg.k_p().cross(b_a)
}

/// Integrates the tilt error with the midpoint rule, returning every sample
/// from `t0` to `t0 + duration`.
pub fn integrate_error_ode<F>(
    theta0: ErrorState,
    omega_b: F,
    b_g: &Vec3,
    b_a: &Vec3,
    cfg: &AhrsConfig,
    duration: f64,
    dt: f64,
) -> Result<Vec<ErrorState>, ErrorModelError>
where
    F: Fn(f64) -> Vec3,
{
    if !(dt > 0.0 && duration >= 0.0 && dt.is_finite() && duration.is_finite()) {
        return Err(ErrorModelError::Span(format!("duration {duration}, dt {dt}")));
    }
    let steps = (duration / dt).round() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = theta0;
    out.push(s);
    for i in 0..steps {
        let t = theta0.t + i as f64 * dt;
        let k1 = tilt_rate(&s.theta_b, &omega_b(t), b_g, b_a, cfg);
        let mid = s.theta_b + k1 * (0.5 * dt);
        let k2 = tilt_rate(&mid, &omega_b(t + 0.5 * dt), b_g, b_a, cfg);
        s = ErrorState {
            theta_b: s.theta_b + k2 * dt,
            t: theta0.t + (i + 1) as f64 * dt,
        };
        let norm = s.theta_b.norm();
        if !(norm < SMALL_ANGLE_LIMIT) {
            return Err(ErrorModelError::SmallAngle { t: s.t, norm });
        }
        out.push(s);
    }
    Ok(out)
}

/// Equilibrium tilt `([ω_b×] + kg·I)⁻¹ (b_g − [k_p×] b_a)`.
pub fn steady_state_tilt(omega_b: &Vec3, b_g: &Vec3, b_a: &Vec3, cfg: &AhrsConfig) -> Result<Vec3, ErrorModelError> {
    Ok(geom::solve3(&system_matrix(omega_b, cfg), &forcing(b_g, b_a, cfg))?)
}

/// Equilibrium torque `b_g − [ω_b×]·θ_ss`.
pub fn steady_state_torque(omega_b: &Vec3, b_g: &Vec3, b_a: &Vec3, cfg: &AhrsConfig) -> Result<Vec3, ErrorModelError> {
    let theta = steady_state_tilt(omega_b, b_g, b_a, cfg)?;
    Ok(b_g - omega_b.cross(&theta))
}

/// Torque produced by an accelerometer bias alone while turning about the
/// body z axis: `[ω×]([ω×] + kg·I)⁻¹[k_p×]·b_a`.
pub fn eq13_forward(omega_zb: f64, b_a: &Vec3, cfg: &AhrsConfig) -> Result<Vec3, ErrorModelError> {
    let w = Vec3::new(0.0, 0.0, omega_zb);
    let kb = cfg.k_p().cross(b_a);
    let x = geom::solve3(&system_matrix(&w, cfg), &kb)?;
    Ok(w.cross(&x))
}
