//! Linear error-model predictions for a configuration, and their comparison
//! with the torque measured by a closed-loop run.

use serde::Serialize;
use vpbias::errormodel::{self, ErrorModelError};
use vpbias::estimator::{accel_bias_observation, EstimatorError};
use vpbias::sim::{SimError, Trajectory};
use vpbias::{Mode, Vec3};

use crate::config::RunConfig;
use crate::pipeline::EstRecord;

/// Time after a segment joint before the torque counts as steady, in
/// attitude time constants.
pub const SETTLE_TIME_CONSTANTS: f64 = 6.0;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("error model: {0}")]
    Model(#[from] ErrorModelError),
    #[error("estimator: {0}")]
    Estimator(#[from] EstimatorError),
    #[error("sim: {0}")]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePrediction {
    /// Vehicle yaw rate, rad/s.
    pub yaw_rate: f64,
    /// Steady tilt in the sensor frame, rad.
    pub tilt: [f64; 3],
    /// Steady torque in the sensor frame, rad/s.
    pub torque: [f64; 3],
    /// Torque from the accelerometer bias alone about a pure body z rate.
    pub accel_torque: Option<[f64; 3]>,
    /// Horizontal accelerometer bias recovered from `accel_torque`.
    pub recovered_b_a: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub tau_att: f64,
    pub k: f64,
    pub kg: f64,
    pub b_g: [f64; 3],
    pub b_a: [f64; 3],
    pub rates: Vec<RatePrediction>,
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Distinct yaw rates of the path, zero first.
pub fn path_rates(cfg: &RunConfig) -> Vec<f64> {
    let mut rates = vec![0.0];
    for s in &cfg.traj.segments {
        let w = s.yaw_rate();
        if !rates.contains(&w) {
            rates.push(w);
        }
    }
    rates
}

/// Vehicle yaw rate seen in the sensor frame.
fn sensor_rate(cfg: &RunConfig, yaw_rate: f64) -> Vec3 {
    cfg.sensor.mounting().transpose() * Vec3::new(0.0, 0.0, yaw_rate)
}

pub fn predict(cfg: &RunConfig) -> Result<OracleReport, OracleError> {
    let (b_g, b_a) = (cfg.sensor.b_g, cfg.sensor.b_a);
    let mut rates = Vec::new();
    for w in path_rates(cfg) {
        let omega = sensor_rate(cfg, w);
        let tilt = errormodel::steady_state_tilt(&omega, &b_g, &b_a, &cfg.ahrs)?;
        let torque = errormodel::steady_state_torque(&omega, &b_g, &b_a, &cfg.ahrs)?;
        let (accel_torque, recovered_b_a) = if w.abs() >= cfg.est.turn_threshold {
            let u = errormodel::eq13_forward(w, &b_a, &cfg.ahrs)?;
            let b = accel_bias_observation(&u, w, &cfg.est)?;
            (Some(arr(&u)), Some([b.x, b.y]))
        } else {
            (None, None)
        };
        rates.push(RatePrediction { yaw_rate: w, tilt: arr(&tilt), torque: arr(&torque), accel_torque, recovered_b_a });
    }
    Ok(OracleReport {
        tau_att: cfg.ahrs.tau_att,
        k: cfg.ahrs.k(),
        kg: cfg.ahrs.kg(),
        b_g: arr(&b_g),
        b_a: arr(&b_a),
        rates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyComparison {
    pub yaw_rate: f64,
    pub samples: usize,
    /// Mean closed-loop torque over settled samples, rad/s.
    pub measured: [f64; 3],
    /// Mean prediction for the bias left after compensation, rad/s.
    pub predicted: [f64; 3],
    /// Horizontal |measured − predicted| / |predicted|; `None` for a zero
    /// prediction. The vertical channel belongs to the heading loop.
    pub relative_error: Option<f64>,
}

/// Compares the settled closed-loop torque per path yaw rate with the
/// steady-state prediction for the residual (uncompensated) biases.
pub fn compare(records: &[EstRecord], cfg: &RunConfig) -> Result<Vec<SteadyComparison>, OracleError> {
    let traj = Trajectory::new(&cfg.traj)?;
    let bounds = traj.segment_bounds();
    let settle = SETTLE_TIME_CONSTANTS * cfg.ahrs.tau_att;
    let t0 = records.first().map_or(0.0, |r| r.t);
    let mut out = Vec::new();
    for w in path_rates(cfg) {
        let omega = sensor_rate(cfg, w);
        let (mut meas, mut pred, mut n) = (Vec3::zeros(), Vec3::zeros(), 0usize);
        for r in records {
            let k = traj.kinematics(r.t - t0);
            if k.yaw_rate != w || r.stale || r.t - t0 - bounds[k.segment].0 < settle {
                continue;
            }
            let (rg, ra) = match cfg.est.mode {
                Mode::Feedback => (cfg.sensor.b_g - r.b_g_hat, cfg.sensor.b_a - r.b_a_hat),
                Mode::BlackBox => (cfg.sensor.b_g, cfg.sensor.b_a),
            };
            meas += r.u;
            pred += errormodel::steady_state_torque(&omega, &rg, &ra, &cfg.ahrs)?;
            n += 1;
        }
        if n == 0 {
            continue;
        }
        let (meas, pred) = (meas / n as f64, pred / n as f64);
        let (mh, ph) = (meas.xy(), pred.xy());
        let relative_error = (ph.norm() > 0.0).then(|| (mh - ph).norm() / ph.norm());
        out.push(SteadyComparison { yaw_rate: w, samples: n, measured: arr(&meas), predicted: arr(&pred), relative_error });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_prediction_is_gyro_bias() {
        let cfg = RunConfig::default();
        let rep = predict(&cfg).unwrap();
        assert_eq!(rep.rates[0].yaw_rate, 0.0);
        for i in 0..3 {
            assert!((rep.rates[0].torque[i] - cfg.sensor.b_g[i]).abs() < 1e-15);
        }
        assert!(rep.rates[0].recovered_b_a.is_none());
    }

    #[test]
    fn turn_prediction_recovers_accel_bias() {
        let cfg = RunConfig::default();
        let rep = predict(&cfg).unwrap();
        let turns: Vec<_> = rep.rates.iter().filter(|r| r.yaw_rate != 0.0).collect();
        assert_eq!(turns.len(), 2);
        for r in turns {
            let b = r.recovered_b_a.unwrap();
            assert!((b[0] - cfg.sensor.b_a.x).abs() < 1e-12 && (b[1] - cfg.sensor.b_a.y).abs() < 1e-12);
        }
    }
}
