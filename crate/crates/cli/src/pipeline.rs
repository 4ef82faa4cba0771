//! Simulation, closed-loop estimation and evaluation.

use std::path::Path;

use thiserror::Error;
use vpbias::ahrs::{level_attitude, AhrsError};
use vpbias::estimator::compensate;
use vpbias::geom::{self, GeomError};
use vpbias::sim::{self, SimError, Trajectory, TruthSample, VelocitySample};
use vpbias::{AhrsState, AidSample, BiasEstimate, CourseSample, EstimatorError, ImuSample, Mode, Regime, RegimeClassifier, Vec3};

use crate::config::RunConfig;
use crate::csvio;
use crate::metrics::{compute_metrics, EstPoint, MetricsError, RunMetrics};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("sim: {0}")]
    Sim(#[from] SimError),
    #[error("ahrs at t={t}: {source}")]
    Ahrs { t: f64, source: AhrsError },
    #[error("estimator at t={t}: {source}")]
    Estimator { t: f64, source: EstimatorError },
    #[error("geometry: {0}")]
    Geom(#[from] GeomError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("input: {0}")]
    Input(String),
}

/// Samples averaged to level the initial platform.
pub const LEVELING_SAMPLES: usize = 50;

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub truth: Vec<TruthSample>,
    pub imu: Vec<ImuSample>,
    pub vel: Vec<VelocitySample>,
}

pub fn simulate(cfg: &RunConfig) -> Result<SimOutput, PipelineError> {
    cfg.validate()?;
    let truth = sim::build_trajectory(&cfg.traj, cfg.ahrs.g)?;
    let imu = sim::synth_imu(&truth, &cfg.sensor, cfg.traj.imu_rate)?;
    let vel = sim::synth_aid(&truth, &cfg.sensor, cfg.traj.imu_rate, cfg.traj.aid_rate)?;
    Ok(SimOutput { truth, imu, vel })
}

/// Aid and course samples, each paired with the time it becomes available.
#[derive(Debug, Clone, Default)]
pub struct AidStream {
    pub aid: Vec<(f64, AidSample)>,
    pub course: Vec<(f64, CourseSample)>,
}

impl AidStream {
    /// Differentiated velocity (available one velocity sample later) and
    /// course over ground (available immediately).
    pub fn from_velocity(vel: &[VelocitySample], cfg: &RunConfig) -> Result<Self, PipelineError> {
        let aid = sim::differentiate_velocity(vel, cfg.ahrs.g, cfg.aid.smoothing_tau)?;
        let aid = aid.into_iter().zip(&vel[1..]).map(|(a, v)| (v.t, a)).collect();
        let course = vel
            .iter()
            .filter_map(|v| {
                sim::course_from_velocity(&v.v, cfg.aid.min_speed).map(|c| (v.t, CourseSample { t: v.t, course: c }))
            })
            .collect();
        Ok(Self { aid, course })
    }

    /// Exact specific force and course from truth, no latency.
    pub fn exact(truth: &[TruthSample], cfg: &RunConfig) -> Result<Self, PipelineError> {
        let aid = sim::exact_aid(truth, cfg.traj.imu_rate, cfg.traj.aid_rate)?;
        let step = cfg.traj.decimation();
        let course = truth
            .iter()
            .step_by(step)
            .filter_map(|s| {
                sim::course_from_velocity(&s.velocity, cfg.aid.min_speed).map(|c| (s.t, CourseSample { t: s.t, course: c }))
            })
            .collect();
        Ok(Self { aid: aid.into_iter().map(|a| (a.t, a)).collect(), course })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstRecord {
    pub t: f64,
    pub regime: Regime,
    pub u: Vec3,
    pub stale: bool,
    pub b_g_hat: Vec3,
    pub b_a_hat: Vec3,
    pub roll: f64,
    pub pitch: f64,
    pub heading: f64,
}

/// Initial platform: leveled on the mean specific force, heading from the
/// first course sample or `fallback_heading`.
pub fn initial_attitude(imu: &[ImuSample], aids: &AidStream, fallback_heading: f64) -> Result<vpbias::Mat3, PipelineError> {
    let n = imu.len().min(LEVELING_SAMPLES);
    if n == 0 {
        return Err(PipelineError::Input("no IMU samples".into()));
    }
    let mean = imu[..n].iter().fold(Vec3::zeros(), |acc, s| acc + s.f_b) / n as f64;
    let heading = aids.course.first().map_or(fallback_heading, |(_, c)| c.course);
    Ok(level_attitude(&mean, heading))
}

/// Runs the platform, classifier and bias filters over `imu`.
///
/// One record per IMU sample. The first record is the initial state.
pub fn estimate(imu: &[ImuSample], aids: &AidStream, cfg: &RunConfig) -> Result<Vec<EstRecord>, PipelineError> {
    let first = imu.first().ok_or_else(|| PipelineError::Input("no IMU samples".into()))?;
    let c0 = initial_attitude(imu, aids, cfg.traj.initial_heading)?;
    let mut ahrs = AhrsState::new(c0, first.t).map_err(|source| PipelineError::Ahrs { t: first.t, source })?;
    let mut est = BiasEstimate::zero(first.t);
    let mut classifier = RegimeClassifier::default();
    let mut records = Vec::with_capacity(imu.len());
    let record = |ahrs: &AhrsState, est: &BiasEstimate, regime| -> Result<EstRecord, PipelineError> {
        let (roll, pitch, heading) = ahrs.euler()?;
        Ok(EstRecord {
            t: ahrs.t,
            regime,
            u: ahrs.u,
            stale: ahrs.stale,
            b_g_hat: est.b_g_hat,
            b_a_hat: est.b_a_hat,
            roll,
            pitch,
            heading,
        })
    };
    records.push(record(&ahrs, &est, Regime::Excluded)?);

    let (mut ai, mut ci) = (0usize, 0usize);
    for pair in imu.windows(2) {
        let (prev, raw) = (&pair[0], &pair[1]);
        let dt = raw.t - prev.t;
        let compensated = compensate(raw, &est);
        let input = match cfg.est.mode {
            Mode::Feedback => compensated,
            Mode::BlackBox => *raw,
        };

        // Latest sample already available at this IMU epoch.
        let horizon = raw.t + 1e-9;
        while ai < aids.aid.len() && aids.aid[ai].0 <= horizon {
            ai += 1;
        }
        while ci < aids.course.len() && aids.course[ci].0 <= horizon {
            ci += 1;
        }
        let aid = ai.checked_sub(1).map(|i| &aids.aid[i].1);
        let course = ci.checked_sub(1).map(|i| &aids.course[i].1);

        ahrs = ahrs
            .step(&input, aid, course, &cfg.ahrs)
            .map_err(|source| PipelineError::Ahrs { t: raw.t, source })?;
        let regime = classifier.update(&compensated.omega_b, dt, &cfg.est);
        est = est
            .update(&ahrs.u, ahrs.stale, regime, &cfg.est, dt)
            .map_err(|source| PipelineError::Estimator { t: raw.t, source })?;
        records.push(record(&ahrs, &est, regime)?);
    }
    Ok(records)
}

/// Attitude the platform should track: the sensor frame in NED.
pub fn tilt_errors(records: &[EstRecord], truth: &[TruthSample], cfg: &RunConfig) -> Result<Vec<f64>, PipelineError> {
    if records.len() != truth.len() {
        return Err(PipelineError::Input(format!(
            "{} estimate records for {} truth samples",
            records.len(),
            truth.len()
        )));
    }
    records
        .iter()
        .zip(truth)
        .map(|(r, s)| {
            let (roll, pitch, _) = geom::euler_from_dcm(&cfg.sensor.sensor_attitude(s))?;
            Ok(geom::wrap_angle(r.roll - roll).abs().max(geom::wrap_angle(r.pitch - pitch).abs()))
        })
        .collect()
}

/// Everything produced by one simulated run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub sim: SimOutput,
    pub records: Vec<EstRecord>,
    pub metrics: RunMetrics,
    /// Accelerometer convergence counted in accumulated turn time, s.
    pub accel_convergence_turn_time: [Option<f64>; 2],
}

pub fn run(cfg: &RunConfig) -> Result<RunResult, PipelineError> {
    let sim = simulate(cfg)?;
    let aids = AidStream::from_velocity(&sim.vel, cfg)?;
    let records = estimate(&sim.imu, &aids, cfg)?;
    let tilt = tilt_errors(&records, &sim.truth, cfg)?;
    let series: Vec<EstPoint> = records
        .iter()
        .zip(&tilt)
        .map(|(r, &e)| EstPoint { t: r.t, b_g_hat: r.b_g_hat, b_a_hat: r.b_a_hat, tilt_error: e })
        .collect();
    let metrics = compute_metrics(&series, &cfg.sensor.b_g, &cfg.sensor.b_a, cfg.window)?;
    let traj = Trajectory::new(&cfg.traj)?;
    let t0 = records[0].t;
    let accel_convergence_turn_time = [0, 1].map(|i| {
        metrics.accel[i].convergence_time.map(|tc| traj.turn_time_until(t0 + tc))
    });
    Ok(RunResult { sim, records, metrics, accel_convergence_turn_time })
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Csv(#[from] crate::csvio::CsvIoError),
    #[error(transparent)]
    Oracle(#[from] crate::oracle::OracleError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Contents of metrics.json.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Report {
    pub mode: &'static str,
    pub seed: u64,
    pub duration: f64,
    pub metrics: RunMetrics,
    pub accel_convergence_turn_time: [Option<f64>; 2],
    pub oracle: crate::oracle::OracleReport,
    pub steady_torque: Vec<crate::oracle::SteadyComparison>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    std::fs::write(path, bytes).map_err(|source| OutputError::Io { path: path.display().to_string(), source })
}

fn ensure_dir(dir: &Path) -> Result<(), OutputError> {
    std::fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.display().to_string(), source })
}

/// Every `imu_rate / output_rate`-th record, starting with the first.
pub fn decimate_records(records: &[EstRecord], cfg: &RunConfig) -> Vec<EstRecord> {
    let step = (cfg.traj.imu_rate / cfg.output_rate).round() as usize;
    records.iter().step_by(step.max(1)).copied().collect()
}

/// Writes config.txt, imu.csv, aid.csv and truth.csv.
pub fn write_simulation(sim: &SimOutput, cfg: &RunConfig, dir: &Path) -> Result<(), OutputError> {
    ensure_dir(dir)?;
    write_file(&dir.join("config.txt"), cfg.to_text().as_bytes())?;
    csvio::write_imu(csvio::create(&dir.join("imu.csv"))?, &sim.imu)?;
    csvio::write_aid(csvio::create(&dir.join("aid.csv"))?, &sim.vel)?;
    csvio::write_truth(csvio::create(&dir.join("truth.csv"))?, &sim.truth, &cfg.sensor)?;
    Ok(())
}

pub fn write_estimates(records: &[EstRecord], cfg: &RunConfig, dir: &Path) -> Result<(), OutputError> {
    ensure_dir(dir)?;
    csvio::write_est(csvio::create(&dir.join("est.csv"))?, &decimate_records(records, cfg))?;
    Ok(())
}

/// End-to-end run writing all artifacts plus metrics.json into `dir`.
pub fn run_to_dir(cfg: &RunConfig, dir: &Path) -> Result<Report, OutputError> {
    let result = run(cfg)?;
    write_simulation(&result.sim, cfg, dir)?;
    write_estimates(&result.records, cfg, dir)?;
    let report = Report {
        mode: crate::config::mode_name(cfg.est.mode),
        seed: cfg.sensor.seed,
        duration: cfg.traj.duration(),
        metrics: result.metrics.clone(),
        accel_convergence_turn_time: result.accel_convergence_turn_time,
        oracle: crate::oracle::predict(cfg)?,
        steady_torque: crate::oracle::compare(&result.records, cfg)?,
    };
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    write_file(&dir.join("metrics.json"), &json)?;
    Ok(report)
}
