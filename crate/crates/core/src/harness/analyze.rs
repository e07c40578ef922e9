//! Analytical steady-state MSE per run, averaged and set beside the simulated steady state.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{AlgorithmConfig, AlgorithmKind, ExperimentConfig};
use super::runner::{auxiliary_rng, run_experiment_at, run_rng};
use crate::analysis::{
    aux_weights_from_effective, br_norm_moments, gamma_mean_pdb, gamma_mean_pidb, nu_inf, predict, residual_powers,
    xi_min, MsePrediction, PredictionInputs,
};
use crate::array_model::build_scenario;
use crate::baselines::scaled_wiener;
use crate::error::{Error, Result};
use crate::gsc::BlockingMatrix;
use crate::linalg::norm_sqr;
use crate::sm_adaptive::BoundKind;

/// One (scheme, SNR) comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRow {
    pub scheme: String,
    pub snr_db: f64,
    pub q: usize,
    pub xi_min: f64,
    pub xi_ex_pred: f64,
    pub xi_total_pred: f64,
    pub xi_total_sim: f64,
    pub p_update_pred: f64,
    pub update_rate_sim: f64,
    /// Runs whose prediction was out of domain; excluded from the predicted means.
    pub undefined_runs: usize,
    pub runs: usize,
}

#[derive(Serialize)]
struct AnalysisCsvRow<'a> {
    scheme: &'a str,
    snr_db: f64,
    q: usize,
    xi_min: f64,
    xi_ex_pred: f64,
    xi_total_pred: f64,
    xi_total_sim: f64,
    p_update_pred: f64,
    update_rate_sim: f64,
}

/// Prediction inputs of run `run`, from the scaled Wiener approximation of the
/// CM optimum with every source active.
pub fn prediction_inputs(cfg: &ExperimentConfig, alg: &AlgorithmConfig, snr_db: f64, run: usize) -> Result<PredictionInputs> {
    let mut rng = run_rng(cfg.run.master_seed, run);
    let scenario = build_scenario(&cfg.describe(snr_db)?, &mut rng)?;
    let mut aux = auxiliary_rng(cfg.run.master_seed, run);
    let idx = scenario.sources.iter().map(|s| s.onset).max().unwrap_or(0);
    let calibration: Vec<_> = (0..cfg.analysis.calibration_snapshots)
        .map(|_| scenario.emit_snapshot(idx, &mut aux).received)
        .collect();
    let a0 = scenario.desired_steering();
    let w_opt = scaled_wiener(&scenario.ideal_covariance(idx), a0, &calibration)?;
    let (sigma_i2, sigma_v2) = residual_powers(&w_opt, &scenario);
    let blocking = BlockingMatrix::new(alg.blocking, a0)?;
    let (m2_br, m4_br) = br_norm_moments(&blocking, &scenario, cfg.analysis.m4_samples, &mut aux);
    let w_opt_norm2 = norm_sqr(&w_opt);
    let sigma_n = scenario.noise_power.sqrt();
    let scheme = alg
        .bound
        .ok_or_else(|| Error::InvalidConfig(format!("{}: no bound to analyze", alg.name)))?
        .scheme();
    let gamma_mean = match scheme.kind {
        BoundKind::Fixed => scheme.gamma_fixed,
        BoundKind::Pdb => gamma_mean_pdb(scheme.lambda, sigma_n, w_opt_norm2.sqrt()),
        BoundKind::Pidb => {
            let w = aux_weights_from_effective(&w_opt, alg.v, &blocking);
            let nu = nu_inf(&w, &blocking, &scenario);
            gamma_mean_pidb(scheme.psi, nu, scheme.lambda, sigma_n, w_opt_norm2.sqrt())
        }
    };
    Ok(PredictionInputs {
        sigma_i2,
        sigma_v2,
        m2_br,
        m4_br,
        gamma_mean,
        w_opt_norm2,
        xi_min: xi_min(&w_opt, &scenario),
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Predictions versus simulation for every SM-CM-GSC algorithm at every
/// configured SNR (the scenario SNR when no sweep is given).
pub fn run_analysis(cfg: &ExperimentConfig) -> Result<Vec<AnalysisRow>> {
    cfg.validate()?;
    let snrs = if cfg.analysis.snr_sweep_db.is_empty() {
        vec![cfg.scenario.snr_db]
    } else {
        cfg.analysis.snr_sweep_db.clone()
    };
    let q = cfg.source_list().len();
    let steady = cfg.steady_start();
    let window = (cfg.scenario.snapshots - steady) as f64;
    let runs = cfg.run.runs;
    let mut rows = Vec::new();
    for &snr in &snrs {
        let sim = run_experiment_at(cfg, snr)?;
        for (k, alg) in cfg.algorithms.iter().enumerate() {
            if alg.algorithm != AlgorithmKind::SmCmGsc {
                continue;
            }
            let per_run = (0..runs)
                .into_par_iter()
                .map(|run| {
                    let inputs = prediction_inputs(cfg, alg, snr, run)?;
                    Ok((inputs, predict(&inputs, cfg.analysis.excess_form)))
                })
                .collect::<Result<Vec<(PredictionInputs, Result<MsePrediction>)>>>()?;
            let defined: Vec<&MsePrediction> = per_run.iter().filter_map(|(_, p)| p.as_ref().ok()).collect();
            let xi_min = mean(per_run.iter().map(|(i, _)| i.xi_min));
            let xi_ex_pred = mean(defined.iter().map(|p| p.xi_ex));
            let steady_updates: u64 = sim.runs.iter().map(|r| r.algorithms[k].steady_updates).sum();
            rows.push(AnalysisRow {
                scheme: alg.name.clone(),
                snr_db: snr,
                q,
                xi_min,
                xi_ex_pred,
                xi_total_pred: mean(defined.iter().map(|p| p.xi_total)),
                xi_total_sim: sim.series[k].mean_mse_from(steady),
                p_update_pred: mean(per_run.iter().filter_map(|(i, _)| {
                    crate::analysis::update_probability(i.gamma_mean, i.sigma_v2.sqrt()).ok()
                })),
                update_rate_sim: steady_updates as f64 / (runs as f64 * window),
                undefined_runs: per_run.len() - defined.len(),
                runs,
            });
        }
    }
    Ok(rows)
}

pub fn write_analysis_csv_to<W: std::io::Write>(rows: &[AnalysisRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "scheme",
            "snr_db",
            "q",
            "xi_min",
            "xi_ex_pred",
            "xi_total_pred",
            "xi_total_sim",
            "p_update_pred",
            "update_rate_sim",
        ])?;
    }
    for r in rows {
        w.serialize(AnalysisCsvRow {
            scheme: &r.scheme,
            snr_db: r.snr_db,
            q: r.q,
            xi_min: r.xi_min,
            xi_ex_pred: r.xi_ex_pred,
            xi_total_pred: r.xi_total_pred,
            xi_total_sim: r.xi_total_sim,
            p_update_pred: r.p_update_pred,
            update_rate_sim: r.update_rate_sim,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_analysis_csv(rows: &[AnalysisRow], path: &Path) -> Result<()> {
    let io = |e: &dyn std::fmt::Display| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let file = std::fs::File::create(path).map_err(|e| io(&e))?;
    write_analysis_csv_to(rows, std::io::BufWriter::new(file)).map_err(|e| io(&e))
}
