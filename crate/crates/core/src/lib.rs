//! Strapdown AHRS on a virtual platform, with gyro and accelerometer bias
//! estimation from the residual platform torque.
//!
//! - [`geom`]: 3x3 kernel and DCM utilities.
//! - [`ahrs`]: platform mechanization and acceleration-aided torquing.
//! - [`estimator`]: motion regimes and the two bias filters.
//! - [`errormodel`]: linear tilt-error model used as an oracle.
//! - [`sim`]: flat-Earth vehicle truth and sensor synthesis.

pub mod ahrs;
pub mod errormodel;
pub mod estimator;
pub mod geom;
pub mod sim;

pub use ahrs::{AhrsConfig, AhrsError, AhrsState, AidSample, CourseSample, ImuSample};
pub use estimator::{BiasEstimate, EstimatorConfig, EstimatorError, Mode, Regime, RegimeClassifier};
pub use geom::{Mat3, Vec3};
