//! CSV files at the tool boundary. SI units, shortest round-trip decimals.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;
use vpbias::geom::{self, GeomError};
use vpbias::sim::{SensorErrorSpec, TruthSample, VelocitySample};
use vpbias::{ImuSample, Vec3};

use crate::pipeline::EstRecord;

pub const IMU_HEADER: [&str; 7] = ["t", "wx", "wy", "wz", "fx", "fy", "fz"];
pub const AID_HEADER: [&str; 4] = ["t", "vn", "ve", "vd"];
pub const TRUTH_HEADER: [&str; 11] = ["t", "roll", "pitch", "heading", "wzb", "bg_x", "bg_y", "bg_z", "ba_x", "ba_y", "ba_z"];
pub const EST_HEADER: [&str; 14] = [
    "t", "regime", "ux", "uy", "uz", "bg_x", "bg_y", "bg_z", "ba_x", "ba_y", "ba_z", "roll", "pitch", "heading",
];

#[derive(Debug, Error)]
pub enum CsvIoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("header {found:?}, expected {expected:?}")]
    Header { found: Vec<String>, expected: Vec<String> },
    #[error("geometry: {0}")]
    Geom(#[from] GeomError),
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), CsvIoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| CsvIoError::Io { path: "<writer>".into(), source })?;
    Ok(())
}

fn vec3(v: &Vec3) -> [String; 3] {
    [fmt(v.x), fmt(v.y), fmt(v.z)]
}

pub fn write_imu<W: Write>(out: W, imu: &[ImuSample]) -> Result<(), CsvIoError> {
    write_rows(
        out,
        &IMU_HEADER,
        imu.iter().map(|s| {
            let mut r = vec![fmt(s.t)];
            r.extend(vec3(&s.omega_b));
            r.extend(vec3(&s.f_b));
            r
        }),
    )
}

pub fn write_aid<W: Write>(out: W, vel: &[VelocitySample]) -> Result<(), CsvIoError> {
    write_rows(
        out,
        &AID_HEADER,
        vel.iter().map(|s| {
            let mut r = vec![fmt(s.t)];
            r.extend(vec3(&s.v));
            r
        }),
    )
}

/// Truth of the sensor frame: its attitude, its z-axis rate and the injected biases.
pub fn write_truth<W: Write>(out: W, truth: &[TruthSample], err: &SensorErrorSpec) -> Result<(), CsvIoError> {
    let m_t = err.mounting().transpose();
    let mut rows = Vec::with_capacity(truth.len());
    for s in truth {
        let (roll, pitch, heading) = geom::euler_from_dcm(&err.sensor_attitude(s))?;
        let mut r = vec![fmt(s.t), fmt(roll), fmt(pitch), fmt(heading), fmt((m_t * s.omega_b_true).z)];
        r.extend(vec3(&err.b_g));
        r.extend(vec3(&err.b_a));
        rows.push(r);
    }
    write_rows(out, &TRUTH_HEADER, rows.into_iter())
}

pub fn write_est<W: Write>(out: W, records: &[EstRecord]) -> Result<(), CsvIoError> {
    write_rows(
        out,
        &EST_HEADER,
        records.iter().map(|e| {
            let mut r = vec![fmt(e.t), e.regime.label().to_string()];
            r.extend(vec3(&e.u));
            r.extend(vec3(&e.b_g_hat));
            r.extend(vec3(&e.b_a_hat));
            r.extend([fmt(e.roll), fmt(e.pitch), fmt(e.heading)]);
            r
        }),
    )
}

fn read_numeric<R: Read, const N: usize>(input: R, header: &[&str; N]) -> Result<Vec<[f64; N]>, CsvIoError> {
    let mut rd = csv::Reader::from_reader(input);
    let found: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if found != header.iter().map(|s| s.to_string()).collect::<Vec<_>>() {
        return Err(CsvIoError::Header { found, expected: header.iter().map(|s| s.to_string()).collect() });
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != N {
            return Err(CsvIoError::Row { row, msg: format!("{} fields, expected {N}", rec.len()) });
        }
        let mut vals = [0.0; N];
        for (v, field) in vals.iter_mut().zip(rec.iter()) {
            *v = field
                .trim()
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| CsvIoError::Row { row, msg: format!("bad number `{field}`") })?;
        }
        out.push(vals);
    }
    Ok(out)
}

pub fn read_imu<R: Read>(input: R) -> Result<Vec<ImuSample>, CsvIoError> {
    Ok(read_numeric(input, &IMU_HEADER)?
        .into_iter()
        .map(|r| ImuSample { t: r[0], omega_b: Vec3::new(r[1], r[2], r[3]), f_b: Vec3::new(r[4], r[5], r[6]) })
        .collect())
}

pub fn read_aid<R: Read>(input: R) -> Result<Vec<VelocitySample>, CsvIoError> {
    Ok(read_numeric(input, &AID_HEADER)?
        .into_iter()
        .map(|r| VelocitySample { t: r[0], v: Vec3::new(r[1], r[2], r[3]) })
        .collect())
}

pub fn create(path: &Path) -> Result<File, CsvIoError> {
    File::create(path).map_err(|source| CsvIoError::Io { path: path.display().to_string(), source })
}

pub fn open(path: &Path) -> Result<File, CsvIoError> {
    File::open(path).map_err(|source| CsvIoError::Io { path: path.display().to_string(), source })
}
