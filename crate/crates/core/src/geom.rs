//! Fixed-size 3D kernel: vectors, matrices, DCM maintenance and a 3x3 solver.
//!
//! `Vec3` and `Mat3` are plain `nalgebra` types. A `Mat3` used as a direction
//! cosine matrix maps body-frame vectors into the (NED) platform frame.
//! Euler angles follow the aerospace Z-Y-X (heading, pitch, roll) sequence.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Closest a pitch angle may get to ±π/2 before Euler extraction refuses.
pub const GIMBAL_LOCK_MARGIN: f64 = 1e-6;

/// Largest `‖CᵀC − I‖_F` accepted by [`orthonormalize`].
pub const MAX_ORTHO_DEVIATION: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not a proper rotation (determinant {0:.3e})")]
    Reflection(f64),
    #[error("matrix too far from orthonormal (deviation {0:.3e})")]
    NotNearOrthonormal(f64),
    #[error("pitch {0:.9} rad too close to gimbal lock")]
    GimbalLock(f64),
    #[error("system matrix is singular or near-singular (determinant {0:.3e})")]
    Singular(f64),
}

/// Cross-product matrix: `skew(v) * w == v.cross(&w)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation matrix `exp([v×])` for a rotation vector `v`, rad.
pub fn rotation(v: &Vec3) -> Mat3 {
    nalgebra::Rotation3::new(*v).into_inner()
}

/// Largest absolute entry of `CᵀC − I`.
pub fn ortho_error(c: &Mat3) -> f64 {
    (c.transpose() * c - Mat3::identity()).abs().max()
}

/// Projects a nearly orthonormal matrix onto the closest rotation (polar
/// factor `U Vᵀ` of the SVD).
pub fn orthonormalize(c: &Mat3) -> Result<Mat3, GeomError> {
    if c.iter().any(|x| !x.is_finite()) {
        return Err(GeomError::NonFinite);
    }
    let det = c.determinant();
    if det <= 0.0 {
        return Err(GeomError::Reflection(det));
    }
    let deviation = (c.transpose() * c - Mat3::identity()).norm();
    if deviation > MAX_ORTHO_DEVIATION {
        return Err(GeomError::NotNearOrthonormal(deviation));
    }
    let svd = c.svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => Ok(u * v_t),
        _ => Err(GeomError::NonFinite),
    }
}

/// Rotation about a single frame axis by `angle` (body to reference).
fn rot_x(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Body-to-NED DCM from Z-Y-X Euler angles.
pub fn dcm_from_euler(roll: f64, pitch: f64, heading: f64) -> Mat3 {
    rot_z(heading) * rot_y(pitch) * rot_x(roll)
}

/// Z-Y-X Euler angles `(roll, pitch, heading)` of a body-to-NED DCM.
/// Heading is wrapped to `(-π, π]`.
pub fn euler_from_dcm(c: &Mat3) -> Result<(f64, f64, f64), GeomError> {
    if c.iter().any(|x| !x.is_finite()) {
        return Err(GeomError::NonFinite);
    }
    let pitch = (-c[(2, 0)]).clamp(-1.0, 1.0).asin();
    if pitch.abs() >= FRAC_PI_2 - GIMBAL_LOCK_MARGIN {
        return Err(GeomError::GimbalLock(pitch));
    }
    let roll = c[(2, 1)].atan2(c[(2, 2)]);
    let heading = c[(1, 0)].atan2(c[(0, 0)]);
    Ok((roll, pitch, heading))
}

/// Heading of a DCM without the gimbal-lock check; well defined whenever the
/// body x axis is not vertical.
pub fn heading_of(c: &Mat3) -> f64 {
    c[(1, 0)].atan2(c[(0, 0)])
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// Refuses systems with `|det A| <= 1e-12 · ‖A‖_F³`.
pub fn solve3(a: &Mat3, b: &Vec3) -> Result<Vec3, GeomError> {
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(GeomError::NonFinite);
    }
    let det = a.determinant();
    let scale = a.norm();
    if scale == 0.0 || det.abs() <= 1e-12 * scale.powi(3) {
        return Err(GeomError::Singular(det));
    }
    a.lu().solve(b).ok_or(GeomError::Singular(det))
}
