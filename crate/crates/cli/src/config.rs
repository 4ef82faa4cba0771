//! Flat `section.key = value unit` run configuration.
//!
//! ```text
//! # attitude loop
//! ahrs.tau_att = 4 s
//! est.tau_g = 40 s
//! sensor.bg_x = 0.1 deg/s
//! traj.segment = straight 300 s 5 m/s
//! traj.segment = turn 30 s 5 m/s 0.2 rad/s
//! ```
//!
//! Dimensional values carry a unit; angles and rates may be given in degrees
//! and are stored in radians. Every key not listed in [`KEYS`] is rejected.
//! The `traj` section is mandatory. A path is given either as explicit
//! `traj.segment` lines or through the pattern keys (`traj.lead_in`,
//! `traj.straight`, `traj.turn`, ...), never both.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;
use vpbias::estimator::Mode;
use vpbias::sim::{Segment, SegmentKind, SensorErrorSpec, TrajectorySpec};
use vpbias::{AhrsConfig, EstimatorConfig, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("{key}: {msg}")]
    Range { key: String, msg: String },
    #[error("missing required section `{0}`")]
    MissingSection(&'static str),
}

/// Options of the velocity aid preprocessing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AidConfig {
    /// First-order smoother applied to differentiated velocity, s; 0 keeps
    /// each value an exact interval mean.
    pub smoothing_tau: f64,
    /// Below this horizontal speed the course is not used, m/s.
    pub min_speed: f64,
}

impl Default for AidConfig {
    fn default() -> Self {
        Self { smoothing_tau: 0.0, min_speed: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ahrs: AhrsConfig,
    /// `tau_att` and `g` always mirror `ahrs`.
    pub est: EstimatorConfig,
    pub traj: TrajectorySpec,
    pub sensor: SensorErrorSpec,
    pub aid: AidConfig,
    pub out_dir: PathBuf,
    /// Length of the steady window used by the metrics, s.
    pub window: f64,
    /// Rate of the rows written to est.csv, Hz.
    pub output_rate: f64,
}

/// Pattern parameters used when no explicit segments are given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPattern {
    pub lead_in: f64,
    pub straight: f64,
    pub turn: f64,
    pub turn_rate: f64,
    pub speed: f64,
    pub turns: usize,
    pub alternate: bool,
}

impl Default for PathPattern {
    fn default() -> Self {
        Self {
            lead_in: 120.0,
            straight: 60.0,
            turn: 30.0,
            turn_rate: 0.2,
            speed: 5.0,
            turns: 10,
            alternate: true,
        }
    }
}

impl PathPattern {
    /// Lead-in straight, then `turns` repetitions of (turn, straight).
    pub fn segments(&self) -> Vec<Segment> {
        let mut out = Vec::with_capacity(1 + 2 * self.turns);
        if self.lead_in > 0.0 {
            out.push(Segment::straight(self.lead_in, self.speed));
        }
        for i in 0..self.turns {
            let sign = if self.alternate && i % 2 == 1 { -1.0 } else { 1.0 };
            out.push(Segment::turn(self.turn, self.speed, sign * self.turn_rate));
            if self.straight > 0.0 {
                out.push(Segment::straight(self.straight, self.speed));
            }
        }
        out
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let ahrs = AhrsConfig::default();
        let deg = std::f64::consts::PI / 180.0;
        Self {
            ahrs,
            est: EstimatorConfig {
                tau_att: ahrs.tau_att,
                g: ahrs.g,
                ..EstimatorConfig::default()
            },
            traj: TrajectorySpec {
                segments: PathPattern::default().segments(),
                initial_heading: 0.0,
                imu_rate: 100.0,
                aid_rate: 10.0,
            },
            sensor: SensorErrorSpec {
                b_g: Vec3::new(0.1 * deg, -0.1 * deg, 0.0),
                b_a: Vec3::new(0.2, -0.2, 0.0),
                gyro_noise_density: 0.002,
                accel_noise_density: 0.02,
                misalignment: (0.0, 0.0, 0.0),
                aid_vel_noise: 0.02,
                seed: 1,
            },
            aid: AidConfig::default(),
            out_dir: PathBuf::from("out"),
            window: 200.0,
            output_rate: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Time,
    Frequency,
    Angle,
    Rate,
    Accel,
    Speed,
    Gain,
    GyroNoise,
    AccelNoise,
    Count,
    Bool,
    Mode,
    Path,
    Segment,
}

/// Every accepted key with its value kind.
pub const KEYS: &[&str] = &[
    "ahrs.tau_att",
    "ahrs.g",
    "ahrs.heading_gain",
    "ahrs.max_aid_age",
    "est.tau_g",
    "est.tau_a",
    "est.turn_threshold",
    "est.straight_threshold",
    "est.dwell",
    "est.smoothing_tau",
    "traj.initial_heading",
    "traj.imu_rate",
    "traj.aid_rate",
    "traj.segment",
    "traj.lead_in",
    "traj.straight",
    "traj.turn",
    "traj.turn_rate",
    "traj.speed",
    "traj.turns",
    "traj.alternate",
    "sensor.bg_x",
    "sensor.bg_y",
    "sensor.bg_z",
    "sensor.ba_x",
    "sensor.ba_y",
    "sensor.ba_z",
    "sensor.gyro_noise",
    "sensor.accel_noise",
    "sensor.misalign_roll",
    "sensor.misalign_pitch",
    "sensor.misalign_heading",
    "sensor.aid_vel_noise",
    "sensor.seed",
    "aid.smoothing_tau",
    "aid.min_speed",
    "run.mode",
    "run.out_dir",
    "run.window",
    "run.output_rate",
];

fn kind_of(key: &str) -> Option<Kind> {
    use Kind::*;
    let kind = match key {
        "ahrs.tau_att" | "ahrs.max_aid_age" | "est.tau_g" | "est.tau_a" | "est.dwell" | "est.smoothing_tau" => Time,
        "traj.lead_in" | "traj.straight" | "traj.turn" | "aid.smoothing_tau" | "run.window" => Time,
        "ahrs.g" | "sensor.ba_x" | "sensor.ba_y" | "sensor.ba_z" => Accel,
        "ahrs.heading_gain" => Gain,
        "est.turn_threshold" | "est.straight_threshold" | "traj.turn_rate" => Rate,
        "sensor.bg_x" | "sensor.bg_y" | "sensor.bg_z" => Rate,
        "traj.initial_heading" | "sensor.misalign_roll" | "sensor.misalign_pitch" | "sensor.misalign_heading" => Angle,
        "traj.imu_rate" | "traj.aid_rate" | "run.output_rate" => Frequency,
        "traj.speed" | "sensor.aid_vel_noise" | "aid.min_speed" => Speed,
        "sensor.gyro_noise" => GyroNoise,
        "sensor.accel_noise" => AccelNoise,
        "traj.turns" | "sensor.seed" => Count,
        "traj.alternate" => Bool,
        "run.mode" => Mode,
        "run.out_dir" => Path,
        "traj.segment" => Segment,
        _ => return None,
    };
    Some(kind)
}

fn unit_scale(kind: Kind, unit: &str) -> Option<f64> {
    let deg = std::f64::consts::PI / 180.0;
    let scale = match (kind, unit) {
        (Kind::Time, "s") => 1.0,
        (Kind::Frequency, "Hz") => 1.0,
        (Kind::Angle, "rad") => 1.0,
        (Kind::Angle, "deg") => deg,
        (Kind::Rate, "rad/s") => 1.0,
        (Kind::Rate, "deg/s") => deg,
        (Kind::Accel, "m/s2" | "m/s^2") => 1.0,
        (Kind::Speed, "m/s") => 1.0,
        (Kind::Gain, "1/s") => 1.0,
        (Kind::GyroNoise, "rad/s/rtHz") => 1.0,
        (Kind::GyroNoise, "deg/s/rtHz") => deg,
        (Kind::AccelNoise, "m/s2/rtHz" | "m/s^2/rtHz") => 1.0,
        _ => return None,
    };
    Some(scale)
}

fn quantity(kind: Kind, text: &str, line: usize) -> Result<f64, ConfigError> {
    let syntax = |msg: String| ConfigError::Syntax { line, msg };
    let mut parts = text.split_whitespace();
    let (num, unit) = match (parts.next(), parts.next(), parts.next()) {
        (Some(n), Some(u), None) => (n, u),
        _ => return Err(syntax(format!("expected `<number> <unit>`, got `{text}`"))),
    };
    let value: f64 = num.parse().map_err(|_| syntax(format!("bad number `{num}`")))?;
    if !value.is_finite() {
        return Err(syntax(format!("non-finite number `{num}`")));
    }
    let scale = unit_scale(kind, unit).ok_or_else(|| syntax(format!("unit `{unit}` not valid here")))?;
    Ok(value * scale)
}

fn segment(text: &str, line: usize) -> Result<Segment, ConfigError> {
    let syntax = |msg: String| ConfigError::Syntax { line, msg };
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let q = |kind, i: usize| quantity(kind, &format!("{} {}", tokens[i], tokens[i + 1]), line);
    match tokens.first().copied() {
        Some("straight") if tokens.len() == 5 => Ok(Segment::straight(q(Kind::Time, 1)?, q(Kind::Speed, 3)?)),
        Some("turn") if tokens.len() == 7 => Ok(Segment::turn(q(Kind::Time, 1)?, q(Kind::Speed, 3)?, q(Kind::Rate, 5)?)),
        _ => Err(syntax(format!(
            "segment must be `straight <T> s <V> m/s` or `turn <T> s <V> m/s <W> rad/s`, got `{text}`"
        ))),
    }
}

fn range(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Range { key: key.to_string(), msg: msg.into() }
}

/// Parses and validates a configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut pattern = PathPattern::default();
    let mut segments: Vec<Segment> = Vec::new();
    let mut pattern_keys = false;
    let mut seen: HashSet<String> = HashSet::new();
    let mut sections: HashSet<String> = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            msg: format!("expected `section.key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let kind = kind_of(key).ok_or_else(|| ConfigError::UnknownKey { line, key: key.to_string() })?;
        if kind != Kind::Segment && !seen.insert(key.to_string()) {
            return Err(ConfigError::Duplicate { line, key: key.to_string() });
        }
        if let Some((section, _)) = key.split_once('.') {
            sections.insert(section.to_string());
        }

        let num = |k: Kind| quantity(k, value, line);
        let syntax = |msg: String| ConfigError::Syntax { line, msg };
        match key {
            "ahrs.tau_att" => cfg.ahrs.tau_att = num(kind)?,
            "ahrs.g" => cfg.ahrs.g = num(kind)?,
            "ahrs.heading_gain" => cfg.ahrs.heading_gain = num(kind)?,
            "ahrs.max_aid_age" => cfg.ahrs.max_aid_age = num(kind)?,
            "est.tau_g" => cfg.est.tau_g = num(kind)?,
            "est.tau_a" => cfg.est.tau_a = num(kind)?,
            "est.turn_threshold" => cfg.est.turn_threshold = num(kind)?,
            "est.straight_threshold" => cfg.est.straight_threshold = num(kind)?,
            "est.dwell" => cfg.est.dwell = num(kind)?,
            "est.smoothing_tau" => cfg.est.smoothing_tau = num(kind)?,
            "traj.initial_heading" => cfg.traj.initial_heading = num(kind)?,
            "traj.imu_rate" => cfg.traj.imu_rate = num(kind)?,
            "traj.aid_rate" => cfg.traj.aid_rate = num(kind)?,
            "traj.segment" => segments.push(segment(value, line)?),
            "traj.lead_in" | "traj.straight" | "traj.turn" | "traj.turn_rate" | "traj.speed" | "traj.turns"
            | "traj.alternate" => {
                pattern_keys = true;
                match key {
                    "traj.lead_in" => pattern.lead_in = num(kind)?,
                    "traj.straight" => pattern.straight = num(kind)?,
                    "traj.turn" => pattern.turn = num(kind)?,
                    "traj.turn_rate" => pattern.turn_rate = num(kind)?,
                    "traj.speed" => pattern.speed = num(kind)?,
                    "traj.turns" => {
                        pattern.turns = value.parse().map_err(|_| syntax(format!("bad count `{value}`")))?
                    }
                    _ => {
                        pattern.alternate = value.parse().map_err(|_| syntax(format!("expected true/false, got `{value}`")))?
                    }
                }
            }
            "sensor.bg_x" => cfg.sensor.b_g.x = num(kind)?,
            "sensor.bg_y" => cfg.sensor.b_g.y = num(kind)?,
            "sensor.bg_z" => cfg.sensor.b_g.z = num(kind)?,
            "sensor.ba_x" => cfg.sensor.b_a.x = num(kind)?,
            "sensor.ba_y" => cfg.sensor.b_a.y = num(kind)?,
            "sensor.ba_z" => cfg.sensor.b_a.z = num(kind)?,
            "sensor.gyro_noise" => cfg.sensor.gyro_noise_density = num(kind)?,
            "sensor.accel_noise" => cfg.sensor.accel_noise_density = num(kind)?,
            "sensor.misalign_roll" => cfg.sensor.misalignment.0 = num(kind)?,
            "sensor.misalign_pitch" => cfg.sensor.misalignment.1 = num(kind)?,
            "sensor.misalign_heading" => cfg.sensor.misalignment.2 = num(kind)?,
            "sensor.aid_vel_noise" => cfg.sensor.aid_vel_noise = num(kind)?,
            "sensor.seed" => cfg.sensor.seed = value.parse().map_err(|_| syntax(format!("bad seed `{value}`")))?,
            "aid.smoothing_tau" => cfg.aid.smoothing_tau = num(kind)?,
            "aid.min_speed" => cfg.aid.min_speed = num(kind)?,
            "run.mode" => {
                cfg.est.mode = parse_mode(value).ok_or_else(|| syntax(format!("mode must be feedback or blackbox, got `{value}`")))?
            }
            "run.out_dir" => cfg.out_dir = PathBuf::from(value),
            "run.window" => cfg.window = num(kind)?,
            "run.output_rate" => cfg.output_rate = num(kind)?,
            _ => unreachable!("key table and match out of sync: {key}"),
        }
    }

    if !sections.contains("traj") {
        return Err(ConfigError::MissingSection("traj"));
    }
    if pattern_keys && !segments.is_empty() {
        return Err(range("traj.segment", "explicit segments cannot be combined with pattern keys"));
    }
    if !segments.is_empty() {
        cfg.traj.segments = segments;
    } else {
        cfg.traj.segments = pattern.segments();
    }
    cfg.est.tau_att = cfg.ahrs.tau_att;
    cfg.est.g = cfg.ahrs.g;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_mode(text: &str) -> Option<Mode> {
    match text {
        "feedback" => Some(Mode::Feedback),
        "blackbox" => Some(Mode::BlackBox),
        _ => None,
    }
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Feedback => "feedback",
        Mode::BlackBox => "blackbox",
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.ahrs.validate().map_err(|e| range("ahrs", e.to_string()))?;
        if self.est.tau_att != self.ahrs.tau_att || self.est.g != self.ahrs.g {
            return Err(range("est", "tau_att and g must match the ahrs section"));
        }
        self.est.validate().map_err(|e| range("est", e.to_string()))?;
        self.traj.validate().map_err(|e| range("traj", e.to_string()))?;
        self.sensor.validate().map_err(|e| range("sensor", e.to_string()))?;
        if !(self.aid.smoothing_tau.is_finite() && self.aid.smoothing_tau >= 0.0) {
            return Err(range("aid.smoothing_tau", "must be >= 0"));
        }
        if !(self.aid.min_speed.is_finite() && self.aid.min_speed >= 0.0) {
            return Err(range("aid.min_speed", "must be >= 0"));
        }
        if !(self.window.is_finite() && self.window > 0.0) {
            return Err(range("run.window", "must be > 0"));
        }
        if self.window >= self.traj.duration() {
            return Err(range("run.window", "must be shorter than the path"));
        }
        if !(self.output_rate > 0.0 && self.output_rate <= self.traj.imu_rate) {
            return Err(range("run.output_rate", "must be in (0, imu_rate]"));
        }
        let ratio = self.traj.imu_rate / self.output_rate;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(range("run.output_rate", "imu_rate / output_rate must be an integer"));
        }
        Ok(())
    }

    /// Full configuration in the input syntax, SI units, every value explicit.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("ahrs.tau_att", format!("{} s", self.ahrs.tau_att));
        kv("ahrs.g", format!("{} m/s2", self.ahrs.g));
        kv("ahrs.heading_gain", format!("{} 1/s", self.ahrs.heading_gain));
        kv("ahrs.max_aid_age", format!("{} s", self.ahrs.max_aid_age));
        kv("est.tau_g", format!("{} s", self.est.tau_g));
        kv("est.tau_a", format!("{} s", self.est.tau_a));
        kv("est.turn_threshold", format!("{} rad/s", self.est.turn_threshold));
        kv("est.straight_threshold", format!("{} rad/s", self.est.straight_threshold));
        kv("est.dwell", format!("{} s", self.est.dwell));
        kv("est.smoothing_tau", format!("{} s", self.est.smoothing_tau));
        kv("traj.initial_heading", format!("{} rad", self.traj.initial_heading));
        kv("traj.imu_rate", format!("{} Hz", self.traj.imu_rate));
        kv("traj.aid_rate", format!("{} Hz", self.traj.aid_rate));
        for seg in &self.traj.segments {
            let v = match seg.kind {
                SegmentKind::Straight => format!("straight {} s {} m/s", seg.duration, seg.speed),
                SegmentKind::Turn { yaw_rate } => {
                    format!("turn {} s {} m/s {} rad/s", seg.duration, seg.speed, yaw_rate)
                }
            };
            kv("traj.segment", v);
        }
        let b = &self.sensor;
        kv("sensor.bg_x", format!("{} rad/s", b.b_g.x));
        kv("sensor.bg_y", format!("{} rad/s", b.b_g.y));
        kv("sensor.bg_z", format!("{} rad/s", b.b_g.z));
        kv("sensor.ba_x", format!("{} m/s2", b.b_a.x));
        kv("sensor.ba_y", format!("{} m/s2", b.b_a.y));
        kv("sensor.ba_z", format!("{} m/s2", b.b_a.z));
        kv("sensor.gyro_noise", format!("{} rad/s/rtHz", b.gyro_noise_density));
        kv("sensor.accel_noise", format!("{} m/s2/rtHz", b.accel_noise_density));
        kv("sensor.misalign_roll", format!("{} rad", b.misalignment.0));
        kv("sensor.misalign_pitch", format!("{} rad", b.misalignment.1));
        kv("sensor.misalign_heading", format!("{} rad", b.misalignment.2));
        kv("sensor.aid_vel_noise", format!("{} m/s", b.aid_vel_noise));
        kv("sensor.seed", b.seed.to_string());
        kv("aid.smoothing_tau", format!("{} s", self.aid.smoothing_tau));
        kv("aid.min_speed", format!("{} m/s", self.aid.min_speed));
        kv("run.mode", mode_name(self.est.mode).to_string());
        kv("run.out_dir", self.out_dir.display().to_string());
        kv("run.window", format!("{} s", self.window));
        kv("run.output_rate", format!("{} Hz", self.output_rate));
        s
    }
}
