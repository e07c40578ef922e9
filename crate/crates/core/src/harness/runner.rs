//! Seeded Monte Carlo runs of every configured beamformer on shared snapshot streams.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{AlgorithmConfig, AlgorithmKind, ExperimentConfig};
use super::metrics::{sinr_linear, MetricSeries};
use crate::array_model::{build_scenario, Scenario};
use crate::baselines::{cm_gsc_sg_update, mv_gsc_sg_update, mvdr_weights, sm_cm_dfp_update, DfpState};
use crate::error::{Error, Result};
use crate::gsc::{BlockingKind, BlockingMatrix, GscState};
use crate::linalg::{norm_sqr, CVector};
use crate::sm_adaptive::{BoundTracker, SmCmGsc};

/// Runs reduced together; fixed so results do not depend on the worker count.
const CHUNK: usize = 32;

/// Random stream of run `run`: scenario draw followed by its snapshots.
pub fn run_rng(master_seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run as u64);
    rng
}

/// Stream for auxiliary per-run draws (calibration blocks, moment estimates),
/// disjoint from every simulation stream.
pub fn auxiliary_rng(master_seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((1u64 << 32) | run as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Outcome {
    y: Complex64,
    updated: bool,
    /// Weights moved (SINR must be recomputed).
    changed: bool,
    mu: f64,
    gamma: f64,
    undefined: bool,
}

enum Engine {
    Sm(SmCmGsc),
    Dfp {
        state: DfpState,
        bound: BoundTracker,
        noise: f64,
    },
    Cm {
        state: GscState,
        mu: f64,
    },
    Mv {
        state: GscState,
        mu: f64,
    },
    Mvdr {
        w: CVector,
    },
}

impl Engine {
    fn new(cfg: &AlgorithmConfig, scenario: &Scenario, blocking: &[Arc<BlockingMatrix>; 2]) -> Result<Self> {
        let a0 = scenario.desired_steering().clone();
        let b = match cfg.blocking {
            BlockingKind::Css => blocking[0].clone(),
            BlockingKind::Nullspace => blocking[1].clone(),
        };
        let scheme = cfg.bound.map(|b| b.scheme());
        Ok(match cfg.algorithm {
            AlgorithmKind::SmCmGsc => {
                let state = GscState::with_unit_start(cfg.v, a0, b)?;
                Engine::Sm(SmCmGsc::new(state, scheme.expect("validated"), scenario.noise_power)?)
            }
            AlgorithmKind::SmCmDfp => Engine::Dfp {
                state: DfpState::quiescent(cfg.v, a0),
                bound: BoundTracker::new(scheme.expect("validated"))?,
                noise: scenario.noise_power,
            },
            AlgorithmKind::CmGsc => Engine::Cm {
                state: GscState::with_unit_start(cfg.v, a0, b)?,
                mu: cfg.step_size(),
            },
            AlgorithmKind::MvGsc => Engine::Mv {
                state: GscState::with_unit_start(cfg.v, a0, b)?,
                mu: cfg.step_size(),
            },
            AlgorithmKind::Mvdr => Engine::Mvdr {
                w: mvdr_weights(&scenario.ideal_covariance(0), scenario.desired_steering())?,
            },
        })
    }

    fn weights(&self) -> &CVector {
        match self {
            Engine::Sm(e) => e.state().effective_weights(),
            Engine::Dfp { state, .. } => &state.w,
            Engine::Cm { state, .. } | Engine::Mv { state, .. } => state.effective_weights(),
            Engine::Mvdr { w } => w,
        }
    }

    fn step(&mut self, r: &CVector, scenario: &Scenario, index: usize) -> Result<Outcome> {
        Ok(match self {
            Engine::Sm(e) => {
                let s = e.step(r)?;
                Outcome {
                    y: s.record.y_prior,
                    updated: s.record.updated,
                    changed: s.record.updated,
                    mu: s.record.mu,
                    gamma: s.gamma,
                    undefined: s.undefined_projection,
                }
            }
            Engine::Dfp { state, bound, noise } => {
                let gamma = bound.state().gamma;
                let w_norm2 = norm_sqr(&state.w);
                let (rec, undefined) = match sm_cm_dfp_update(state, r, gamma) {
                    Ok(rec) => (rec, false),
                    Err(Error::UndefinedProjection) => {
                        let y = state.w.dotc(r);
                        let rec = crate::sm_adaptive::SmUpdateRecord {
                            updated: false,
                            mu: 0.0,
                            y_prior: y,
                            y_posterior: y,
                        };
                        (rec, true)
                    }
                    Err(e) => return Err(e),
                };
                let aux = state.a0.dotc(r) * state.v - rec.y_prior;
                bound.advance(w_norm2, aux, *noise);
                Outcome {
                    y: rec.y_prior,
                    updated: rec.updated,
                    changed: rec.updated,
                    mu: rec.mu,
                    gamma,
                    undefined,
                }
            }
            Engine::Cm { state, mu } => Outcome {
                y: cm_gsc_sg_update(state, r, *mu),
                updated: true,
                changed: true,
                mu: *mu,
                gamma: 0.0,
                undefined: false,
            },
            Engine::Mv { state, mu } => Outcome {
                y: mv_gsc_sg_update(state, r, *mu),
                updated: true,
                changed: true,
                mu: *mu,
                gamma: 0.0,
                undefined: false,
            },
            Engine::Mvdr { w } => {
                let changed = index > 0 && !scenario.same_activity(index - 1, index);
                if changed {
                    *w = mvdr_weights(&scenario.ideal_covariance(index), scenario.desired_steering())?;
                }
                Outcome {
                    y: w.dotc(r),
                    updated: false,
                    changed,
                    mu: 0.0,
                    gamma: 0.0,
                    undefined: false,
                }
            }
        })
    }
}

/// Multiplications charged per snapshot, in units of `m`: the output
/// inner product, the error / bound evaluation, and one more per weight update.
fn charged_multiplications(kind: AlgorithmKind, m: usize, updated: bool) -> u64 {
    let m = m as u64;
    match kind {
        AlgorithmKind::SmCmGsc | AlgorithmKind::SmCmDfp => 2 * m + if updated { m } else { 0 },
        AlgorithmKind::CmGsc | AlgorithmKind::MvGsc => 3 * m,
        AlgorithmKind::Mvdr => m,
    }
}

/// Per-run, per-algorithm diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlgorithmRunStats {
    pub updates: u64,
    pub multiplications: u64,
    /// Hash of every snapshot the algorithm consumed.
    pub stream_checksum: u64,
    pub undefined_projections: u64,
    /// Updates, step-size sum and bound sum over the steady-state window.
    pub steady_updates: u64,
    pub steady_mu_sum: f64,
    pub steady_gamma_sum: f64,
    pub final_sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub doas_deg: Vec<f64>,
    /// Indexed like the configured algorithms.
    pub algorithms: Vec<AlgorithmRunStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub series: Vec<MetricSeries>,
    pub runs: Vec<RunRecord>,
}

impl ExperimentResult {
    pub fn series(&self, name: &str) -> Option<&MetricSeries> {
        self.series.iter().find(|s| s.algorithm == name)
    }

    pub fn algorithm_index(&self, name: &str) -> Option<usize> {
        self.series.iter().position(|s| s.algorithm == name)
    }
}

struct RunOutput {
    sinr: Vec<Vec<f64>>,
    mse: Vec<Vec<f64>>,
    updated: Vec<Vec<bool>>,
    record: RunRecord,
}

fn fold_checksum(h: u64, r: &CVector) -> u64 {
    r.iter().fold(h, |h, z| {
        let h = (h ^ z.re.to_bits()).wrapping_mul(0x0000_0100_0000_01b3);
        (h ^ z.im.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Simulate one run at `snr_db` with every configured algorithm on the same snapshots.
fn simulate_run(cfg: &ExperimentConfig, snr_db: f64, run: usize) -> Result<RunOutput> {
    let mut rng = run_rng(cfg.run.master_seed, run);
    let scenario = build_scenario(&cfg.describe(snr_db)?, &mut rng)?;
    let a0 = scenario.desired_steering();
    let blocking = [
        Arc::new(BlockingMatrix::css(a0)?),
        Arc::new(BlockingMatrix::nullspace(a0)?),
    ];
    let mut engines = cfg
        .algorithms
        .iter()
        .map(|a| Engine::new(a, &scenario, &blocking))
        .collect::<Result<Vec<_>>>()?;
    let n = cfg.scenario.snapshots;
    let na = engines.len();
    let m = scenario.elements();
    let steady = cfg.steady_start();
    let mut sinr = vec![Vec::with_capacity(n); na];
    let mut mse = vec![Vec::with_capacity(n); na];
    let mut updated = vec![Vec::with_capacity(n); na];
    let mut stats = vec![AlgorithmRunStats::default(); na];
    let mut current: Vec<f64> = engines.iter().map(|e| sinr_linear(e.weights(), &scenario, 0)).collect();
    for i in 0..n {
        let snap = scenario.emit_snapshot(i, &mut rng);
        let activity_changed = i > 0 && !scenario.same_activity(i - 1, i);
        for (k, engine) in engines.iter_mut().enumerate() {
            // SINR (linear) of the weights that produce this snapshot's output.
            if activity_changed {
                current[k] = sinr_linear(engine.weights(), &scenario, i);
            }
            let out = engine.step(&snap.received, &scenario, i)?;
            let st = &mut stats[k];
            st.stream_checksum = fold_checksum(st.stream_checksum, &snap.received);
            st.multiplications += charged_multiplications(cfg.algorithms[k].algorithm, m, out.updated);
            st.updates += out.updated as u64;
            st.undefined_projections += out.undefined as u64;
            if i >= steady {
                st.steady_updates += out.updated as u64;
                if out.updated {
                    st.steady_mu_sum += out.mu;
                }
                st.steady_gamma_sum += out.gamma;
            }
            sinr[k].push(current[k]);
            mse[k].push((Complex64::new(snap.desired_symbol, 0.0) - out.y).norm_sqr());
            updated[k].push(out.updated);
            if out.changed {
                current[k] = sinr_linear(engine.weights(), &scenario, i);
            }
        }
    }
    for (k, st) in stats.iter_mut().enumerate() {
        st.final_sinr_db = 10.0 * current[k].log10();
    }
    Ok(RunOutput {
        sinr,
        mse,
        updated,
        record: RunRecord {
            run,
            doas_deg: scenario.sources.iter().map(|s| s.doa.to_degrees()).collect(),
            algorithms: stats,
        },
    })
}

/// Run every configured algorithm at the configured SNR.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_at(cfg, cfg.scenario.snr_db)
}

/// As [`run_experiment`], overriding the SNR.
pub fn run_experiment_at(cfg: &ExperimentConfig, snr_db: f64) -> Result<ExperimentResult> {
    cfg.validate()?;
    let n = cfg.scenario.snapshots;
    let na = cfg.algorithms.len();
    let runs = cfg.run.runs;
    let mut sinr_sum = vec![vec![0.0; n]; na];
    let mut mse_sum = vec![vec![0.0; n]; na];
    let mut update_count = vec![vec![0u64; n]; na];
    let mut records = Vec::with_capacity(runs);
    let mut start = 0;
    while start < runs {
        let end = (start + CHUNK).min(runs);
        let outputs = (start..end)
            .into_par_iter()
            .map(|run| simulate_run(cfg, snr_db, run))
            .collect::<Result<Vec<_>>>()?;
        // Reduce in run order.
        for out in outputs {
            for k in 0..na {
                for i in 0..n {
                    sinr_sum[k][i] += out.sinr[k][i];
                    mse_sum[k][i] += out.mse[k][i];
                    update_count[k][i] += out.updated[k][i] as u64;
                }
            }
            records.push(out.record);
        }
        start = end;
    }
    let r = runs as f64;
    let series = cfg
        .algorithms
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let mut cumulative = 0u64;
            let update_rate = (0..n)
                .map(|i| {
                    cumulative += update_count[k][i];
                    cumulative as f64 / ((i + 1) as f64 * r)
                })
                .collect();
            MetricSeries {
                algorithm: a.name.clone(),
                mean_sinr_db: sinr_sum[k].iter().map(|s| 10.0 * (s / r).log10()).collect(),
                mean_mse: mse_sum[k].iter().map(|s| s / r).collect(),
                update_rate,
            }
        })
        .collect();
    Ok(ExperimentResult {
        series,
        runs: records,
    })
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}
