//! Accuracy and convergence statistics of an estimate series.

use serde::Serialize;
use thiserror::Error;
use vpbias::Vec3;

/// Settling band, as a fraction of the total change of a channel.
pub const SETTLING_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("series spans {span} s, shorter than the {window} s window")]
    TooShort { span: f64, window: f64 },
    #[error("invalid window {0}")]
    Window(f64),
}

/// One estimator output sample as seen by the metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstPoint {
    pub t: f64,
    pub b_g_hat: Vec3,
    pub b_a_hat: Vec3,
    /// Largest of |roll error| and |pitch error|, rad.
    pub tilt_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelMetrics {
    pub truth: f64,
    /// Mean of the estimate over the steady window.
    pub final_mean: f64,
    /// RMS of (estimate − truth) over the steady window.
    pub rms_error: f64,
    /// Seconds from the start of the series; `None` when it never settles.
    pub convergence_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub window: f64,
    /// x, y, z gyro channels, rad/s.
    pub gyro: [ChannelMetrics; 3],
    /// x, y accelerometer channels, m/s².
    pub accel: [ChannelMetrics; 2],
    pub max_tilt_error: f64,
}

impl RunMetrics {
    pub fn converged(&self) -> bool {
        self.gyro[..2].iter().chain(&self.accel).all(|c| c.convergence_time.is_some())
    }
}

/// Evaluates one scalar channel.
///
/// The convergence time is the first instant after which the estimate stays
/// within [`SETTLING_FRACTION`] of its total change (initial value to the
/// window mean) around the window mean.
pub fn channel_metrics(t: &[f64], values: &[f64], truth: f64, window: f64) -> Result<ChannelMetrics, MetricsError> {
    if !(window > 0.0) {
        return Err(MetricsError::Window(window));
    }
    let (t0, t_end) = match (t.first(), t.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(MetricsError::TooShort { span: 0.0, window }),
    };
    if t_end - t0 <= window {
        return Err(MetricsError::TooShort { span: t_end - t0, window });
    }
    let start = t.partition_point(|&x| x < t_end - window);
    let tail = &values[start..];
    let n = tail.len() as f64;
    let final_mean = tail.iter().sum::<f64>() / n;
    let rms_error = (tail.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / n).sqrt();

    // Slack for the rounding of the mean itself.
    let band = SETTLING_FRACTION * (final_mean - values[0]).abs() + n * f64::EPSILON * final_mean.abs();
    let last_outside = values.iter().rposition(|v| (v - final_mean).abs() > band);
    let convergence_time = match last_outside {
        None => Some(0.0),
        Some(i) if i + 1 < values.len() => Some(t[i + 1] - t0),
        Some(_) => None,
    };
    Ok(ChannelMetrics { truth, final_mean, rms_error, convergence_time })
}

pub fn compute_metrics(series: &[EstPoint], b_g: &Vec3, b_a: &Vec3, window: f64) -> Result<RunMetrics, MetricsError> {
    let t: Vec<f64> = series.iter().map(|p| p.t).collect();
    let gyro_channel = |axis: usize| {
        let v: Vec<f64> = series.iter().map(|p| p.b_g_hat[axis]).collect();
        channel_metrics(&t, &v, b_g[axis], window)
    };
    let accel_channel = |axis: usize| {
        let v: Vec<f64> = series.iter().map(|p| p.b_a_hat[axis]).collect();
        channel_metrics(&t, &v, b_a[axis], window)
    };
    Ok(RunMetrics {
        window,
        gyro: [gyro_channel(0)?, gyro_channel(1)?, gyro_channel(2)?],
        accel: [accel_channel(0)?, accel_channel(1)?],
        max_tilt_error: series.iter().map(|p| p.tilt_error).fold(0.0, f64::max),
    })
}
