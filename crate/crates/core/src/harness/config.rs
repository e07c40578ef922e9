//! Experiment configuration, read from TOML.

use serde::{Deserialize, Serialize};

use crate::analysis::ExcessForm;
use crate::array_model::{ArrayGeometry, ScenarioDescription, SourceRequest};
use crate::error::{Error, Result};
use crate::gsc::BlockingKind;
use crate::sm_adaptive::BoundScheme;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub array: ArrayConfig,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub run: RunConfig,
    pub algorithms: Vec<AlgorithmConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub elements: usize,
    pub spacing_ratio: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            elements: 16,
            spacing_ratio: 0.5,
        }
    }
}

/// One source; powers are in dB relative to the desired user.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Omitted: drawn at random for every run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doa_deg: Option<f64>,
    #[serde(default)]
    pub power_db: f64,
    #[serde(default)]
    pub onset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Desired-user SNR; the desired power is fixed at 1.
    pub snr_db: f64,
    /// Explicit source list, desired user first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<Vec<SourceConfig>>,
    /// Alternative to `sources`: this many equal-power users at random DOAs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_source_count: Option<usize>,
    #[serde(default = "default_min_separation")]
    pub min_separation_deg: f64,
    pub snapshots: usize,
    /// Interferers that switch on later in the run.
    #[serde(default)]
    pub nonstationary: Vec<SourceConfig>,
}

fn default_min_separation() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_runs() -> usize {
    1000
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            runs: default_runs(),
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmKind {
    SmCmGsc,
    SmCmDfp,
    CmGsc,
    MvGsc,
    Mvdr,
}

impl AlgorithmKind {
    pub fn is_set_membership(self) -> bool {
        matches!(self, AlgorithmKind::SmCmGsc | AlgorithmKind::SmCmDfp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BoundConfig {
    Fixed {
        gamma: f64,
    },
    Pdb {
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    Pidb {
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_psi")]
        psi: f64,
    },
}

fn default_rho() -> f64 {
    BoundScheme::DEFAULT_RHO
}

fn default_lambda() -> f64 {
    BoundScheme::DEFAULT_LAMBDA
}

fn default_psi() -> f64 {
    BoundScheme::DEFAULT_PSI
}

impl BoundConfig {
    pub fn scheme(&self) -> BoundScheme {
        match *self {
            BoundConfig::Fixed { gamma } => BoundScheme::fixed(gamma),
            BoundConfig::Pdb { rho, lambda } => BoundScheme::pdb(rho, lambda),
            BoundConfig::Pidb { rho, lambda, psi } => BoundScheme::pidb(rho, lambda, psi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    /// Label used in the output; unique within a config.
    pub name: String,
    pub algorithm: AlgorithmKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundConfig>,
    /// Step size of the fixed-step baselines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(default)]
    pub blocking: BlockingKind,
    #[serde(default = "default_v")]
    pub v: f64,
}

fn default_v() -> f64 {
    1.0
}

pub const DEFAULT_STEP_SIZE: f64 = 0.005;

impl AlgorithmConfig {
    pub fn step_size(&self) -> f64 {
        self.step_size.unwrap_or(DEFAULT_STEP_SIZE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub excess_form: ExcessForm,
    /// SNRs for `analyze`; empty means the scenario SNR only.
    #[serde(default)]
    pub snr_sweep_db: Vec<f64>,
    #[serde(default = "default_m4_samples")]
    pub m4_samples: usize,
    #[serde(default = "default_calibration")]
    pub calibration_snapshots: usize,
    /// Trailing fraction of the run treated as steady state.
    #[serde(default = "default_steady_fraction")]
    pub steady_fraction: f64,
}

fn default_m4_samples() -> usize {
    10_000
}

fn default_calibration() -> usize {
    2000
}

fn default_steady_fraction() -> f64 {
    0.2
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            excess_form: ExcessForm::default(),
            snr_sweep_db: Vec::new(),
            m4_samples: default_m4_samples(),
            calibration_snapshots: default_calibration(),
            steady_fraction: default_steady_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_csv")]
    pub csv_path: String,
    #[serde(default = "default_analysis_csv")]
    pub analysis_path: String,
}

fn default_csv() -> String {
    "results.csv".into()
}

fn default_analysis_csv() -> String {
    "analysis.csv".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            csv_path: default_csv(),
            analysis_path: default_analysis_csv(),
        }
    }
}

/// Parse and validate a TOML document. Schema errors carry the field path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::InvalidConfig(format!("{}: {}", e.path(), e.inner().message())))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn to_toml(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::InvalidConfig(e.to_string()))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("{path}: {msg}"))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.array.elements < 2 {
            return Err(invalid("array.elements", "at least 2 elements required"));
        }
        if !(self.array.spacing_ratio > 0.0) {
            return Err(invalid("array.spacing_ratio", "must be positive"));
        }
        let s = &self.scenario;
        if !s.snr_db.is_finite() {
            return Err(invalid("scenario.snr_db", "must be finite"));
        }
        if s.snapshots == 0 {
            return Err(invalid("scenario.snapshots", "must be at least 1"));
        }
        match (&s.sources, s.random_source_count) {
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "scenario",
                    "give either `sources` or `random_source_count`, not both",
                ))
            }
            (None, None) => {
                return Err(invalid("scenario", "one of `sources` or `random_source_count` is required"))
            }
            (Some(list), None) => {
                if list.is_empty() {
                    return Err(invalid("scenario.sources", "empty source list"));
                }
                if list[0].onset != 0 {
                    return Err(invalid("scenario.sources[0].onset", "desired user must start at 0"));
                }
            }
            (None, Some(0)) => return Err(invalid("scenario.random_source_count", "must be at least 1")),
            (None, Some(_)) => {}
        }
        for (i, src) in self.source_list().iter().enumerate() {
            if let Some(d) = src.doa_deg {
                if !(d > 0.0 && d < 180.0) {
                    return Err(invalid(&format!("scenario source {i}"), format!("doa_deg {d} outside (0, 180)")));
                }
            }
        }
        if self.source_list().len() > self.array.elements {
            return Err(invalid(
                "scenario",
                format!(
                    "{} sources exceed {} array elements",
                    self.source_list().len(),
                    self.array.elements
                ),
            ));
        }
        if self.run.runs == 0 {
            return Err(invalid("run.runs", "must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(invalid("algorithms", "at least one algorithm required"));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            let path = format!("algorithms[{i}]");
            if self.algorithms[..i].iter().any(|b| b.name == a.name) {
                return Err(invalid(&format!("{path}.name"), format!("duplicate name `{}`", a.name)));
            }
            match (a.algorithm.is_set_membership(), a.bound) {
                (true, None) => return Err(invalid(&format!("{path}.bound"), "required for set-membership algorithms")),
                (true, Some(b)) => b
                    .scheme()
                    .validate()
                    .map_err(|e| invalid(&format!("{path}.bound"), e))?,
                (false, Some(_)) => {
                    return Err(invalid(&format!("{path}.bound"), "only set-membership algorithms take a bound"))
                }
                (false, None) => {}
            }
            if let Some(mu) = a.step_size {
                if !(mu > 0.0) {
                    return Err(invalid(&format!("{path}.step_size"), "must be positive"));
                }
            }
            if a.v == 0.0 || !a.v.is_finite() {
                return Err(invalid(&format!("{path}.v"), "must be finite and nonzero"));
            }
        }
        let an = &self.analysis;
        if !(an.steady_fraction > 0.0 && an.steady_fraction <= 1.0) {
            return Err(invalid("analysis.steady_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Every source in order: the base list (desired first) then the late arrivals.
    pub fn source_list(&self) -> Vec<SourceConfig> {
        let s = &self.scenario;
        let mut list = match (&s.sources, s.random_source_count) {
            (Some(l), _) => l.clone(),
            (None, Some(q)) => vec![SourceConfig::default(); q],
            (None, None) => Vec::new(),
        };
        list.extend(s.nonstationary.iter().copied());
        list
    }

    pub fn noise_power(&self) -> f64 {
        db_to_linear(-self.scenario.snr_db)
    }

    /// The scenario description for an SNR (the desired power stays at 1).
    pub fn describe(&self, snr_db: f64) -> Result<ScenarioDescription> {
        let geometry = ArrayGeometry::new(self.array.elements, self.array.spacing_ratio)?;
        let sources = self
            .source_list()
            .iter()
            .enumerate()
            .map(|(k, s)| SourceRequest {
                doa: s.doa_deg.map(f64::to_radians),
                power: if k == 0 { 1.0 } else { db_to_linear(s.power_db) },
                onset: s.onset,
            })
            .collect();
        Ok(ScenarioDescription {
            geometry,
            sources,
            noise_power: db_to_linear(-snr_db),
            min_separation: self.scenario.min_separation_deg.to_radians(),
        })
    }

    /// First snapshot of the steady-state window.
    pub fn steady_start(&self) -> usize {
        let n = self.scenario.snapshots;
        let len = ((n as f64) * self.analysis.steady_fraction).ceil() as usize;
        n - len.clamp(1, n)
    }
}
