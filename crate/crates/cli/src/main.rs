use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vpbias_cli::config::{self, RunConfig};
use vpbias_cli::csvio;
use vpbias_cli::pipeline::{self, AidStream};

#[derive(Parser)]
#[command(name = "vpbias", version, about = "Virtual-platform AHRS bias estimation: simulate, estimate, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write truth.csv, imu.csv, aid.csv and config.txt.
    Simulate(Common),
    /// Run the estimator over imu.csv and aid.csv and write est.csv.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// IMU samples (default: <out-dir>/imu.csv).
        #[arg(long)]
        imu: Option<PathBuf>,
        /// Velocity aid samples (default: <out-dir>/aid.csv).
        #[arg(long)]
        aid: Option<PathBuf>,
    },
    /// Simulate, estimate and write all CSVs plus metrics.json.
    Run(Common),
    /// Print the steady-state error-model predictions as JSON.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// feedback or blackbox.
    #[arg(long, value_parser = ["feedback", "blackbox"])]
    mode: Option<String>,
}

struct Failure {
    kind: &'static str,
    msg: String,
}

fn fail(kind: &'static str) -> impl Fn(String) -> Failure {
    move |msg| Failure { kind, msg }
}

impl Common {
    fn load(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| fail("io")(format!("{}: {e}", path.display())))?;
                config::parse_config(&text).map_err(|e| fail("config")(e.to_string()))?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.sensor.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = dir.clone();
        }
        if let Some(mode) = &self.mode {
            cfg.est.mode = config::parse_mode(mode).ok_or_else(|| fail("config")(format!("bad mode `{mode}`")))?;
        }
        cfg.validate().map_err(|e| fail("config")(e.to_string()))?;
        Ok(cfg)
    }
}

fn execute(cmd: Command) -> Result<String, Failure> {
    match cmd {
        Command::Simulate(common) => {
            let cfg = common.load()?;
            let sim = pipeline::simulate(&cfg).map_err(|e| fail("simulate")(e.to_string()))?;
            pipeline::write_simulation(&sim, &cfg, &cfg.out_dir).map_err(|e| fail("output")(e.to_string()))?;
            Ok(format!("wrote {} IMU and {} aid samples to {}", sim.imu.len(), sim.vel.len(), cfg.out_dir.display()))
        }
        Command::Estimate { common, imu, aid } => {
            let cfg = common.load()?;
            let imu_path = imu.unwrap_or_else(|| cfg.out_dir.join("imu.csv"));
            let aid_path = aid.unwrap_or_else(|| cfg.out_dir.join("aid.csv"));
            let read = |p: &Path| csvio::open(p).map_err(|e| fail("input")(e.to_string()));
            let imu = csvio::read_imu(read(&imu_path)?).map_err(|e| fail("input")(format!("{}: {e}", imu_path.display())))?;
            let vel = csvio::read_aid(read(&aid_path)?).map_err(|e| fail("input")(format!("{}: {e}", aid_path.display())))?;
            let aids = AidStream::from_velocity(&vel, &cfg).map_err(|e| fail("input")(e.to_string()))?;
            let records = pipeline::estimate(&imu, &aids, &cfg).map_err(|e| fail("estimate")(e.to_string()))?;
            pipeline::write_estimates(&records, &cfg, &cfg.out_dir).map_err(|e| fail("output")(e.to_string()))?;
            Ok(format!("wrote {}", cfg.out_dir.join("est.csv").display()))
        }
        Command::Run(common) => {
            let cfg = common.load()?;
            let report = pipeline::run_to_dir(&cfg, &cfg.out_dir).map_err(|e| fail("run")(e.to_string()))?;
            serde_json::to_string(&report.metrics).map_err(|e| fail("output")(e.to_string()))
        }
        Command::Oracle(common) => {
            let cfg = common.load()?;
            let report = vpbias_cli::oracle::predict(&cfg).map_err(|e| fail("oracle")(e.to_string()))?;
            serde_json::to_string_pretty(&report).map_err(|e| fail("output")(e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure { kind, msg }) => {
            let msg = msg.replace(['\n', '\r'], " ");
            eprintln!("error: {kind}: {msg}");
            ExitCode::from(match kind {
                "config" => 2,
                "io" | "input" => 3,
                _ => 1,
            })
        }
    }
}
