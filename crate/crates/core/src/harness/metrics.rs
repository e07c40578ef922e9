//! Output SINR, run-averaged metric series and their CSV form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array_model::Scenario;
use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, CVector};

/// `p0|w̃^H a0|² / (w̃^H R_in w̃)` in dB, with `R_in` the ideal
/// interference-plus-noise covariance at `index`.
pub fn sinr_of(w_tilde: &CVector, scenario: &Scenario, index: usize) -> f64 {
    10.0 * sinr_linear(w_tilde, scenario, index).log10()
}

pub fn sinr_linear(w_tilde: &CVector, scenario: &Scenario, index: usize) -> f64 {
    let signal = scenario.sources[0].power * w_tilde.dotc(scenario.desired_steering()).norm_sqr();
    let mut denom = scenario.noise_power * norm_sqr(w_tilde);
    for k in scenario.active_interferers(index) {
        denom += scenario.sources[k].power * w_tilde.dotc(scenario.steering(k)).norm_sqr();
    }
    signal / denom
}

/// Run-averaged curves of one algorithm, indexed by snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub algorithm: String,
    /// Run average of the linear SINR, in dB.
    pub mean_sinr_db: Vec<f64>,
    pub mean_mse: Vec<f64>,
    /// Cumulative fraction of updating snapshots up to and including each index.
    pub update_rate: Vec<f64>,
}

impl MetricSeries {
    pub fn len(&self) -> usize {
        self.mean_sinr_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_sinr_db.is_empty()
    }

    /// Mean of the MSE curve over `from..`.
    pub fn mean_mse_from(&self, from: usize) -> f64 {
        let tail = &self.mean_mse[from..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }

    pub fn final_update_rate(&self) -> f64 {
        self.update_rate.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub snapshot: usize,
    pub algorithm: String,
    pub mean_sinr_db: f64,
    pub mean_mse: f64,
    pub update_rate: f64,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

const HEADER: [&str; 5] = ["snapshot", "algorithm", "mean_sinr_db", "mean_mse", "update_rate"];

/// One row per (snapshot, algorithm), snapshot-major.
pub fn write_csv_to<W: std::io::Write>(series: &[MetricSeries], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    let n = series.iter().map(MetricSeries::len).max().unwrap_or(0);
    for i in 0..n {
        for s in series.iter().filter(|s| i < s.len()) {
            w.serialize(CsvRow {
                snapshot: i,
                algorithm: s.algorithm.clone(),
                mean_sinr_db: s.mean_sinr_db[i],
                mean_mse: s.mean_mse[i],
                update_rate: s.update_rate[i],
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(series: &[MetricSeries], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
    write_csv_to(series, std::io::BufWriter::new(file)).map_err(|e| io_error(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    r.deserialize()
        .collect::<csv::Result<Vec<CsvRow>>>()
        .map_err(|e| io_error(path, e))
}
