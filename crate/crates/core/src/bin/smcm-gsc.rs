use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use smcm_gsc::harness::{self, parse_config, ExperimentConfig};

#[derive(Parser)]
#[command(version, about = "SM-CM-GSC beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo SINR / MSE / update-rate curves.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override `run.runs`.
        #[arg(long)]
        runs: Option<usize>,
        /// Override `run.master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Override `outputs.csv_path`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytical steady-state MSE next to the simulated steady state.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the library invariants and print one line per property.
    Validate,
}

fn load(path: &PathBuf) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run {
            config,
            runs,
            seed,
            out,
        } => {
            let mut cfg = load(&config)?;
            if let Some(r) = runs {
                cfg.run.runs = r;
            }
            if let Some(s) = seed {
                cfg.run.master_seed = s;
            }
            let out = out.unwrap_or_else(|| PathBuf::from(&cfg.outputs.csv_path));
            let res = harness::run_experiment(&cfg)?;
            harness::write_csv(&res.series, &out)?;
            println!("{:<16} {:>12} {:>12} {:>12}", "algorithm", "final_sinr", "final_mse", "update_rate");
            for s in &res.series {
                let last = s.len() - 1;
                println!(
                    "{:<16} {:>12.3} {:>12.5} {:>12.4}",
                    s.algorithm,
                    s.mean_sinr_db[last],
                    s.mean_mse[last],
                    s.final_update_rate()
                );
            }
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Analyze { config, out } => {
            let cfg = load(&config)?;
            let rows = harness::analyze::run_analysis(&cfg)?;
            harness::analyze::write_analysis_csv(&rows, &out)?;
            for r in &rows {
                println!(
                    "{:<12} snr {:>5.1} dB  xi_total pred {:>10.5}  sim {:>10.5}  p_update {:>7.4}  sim rate {:>7.4}",
                    r.scheme, r.snr_db, r.xi_total_pred, r.xi_total_sim, r.p_update_pred, r.update_rate_sim
                );
            }
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Validate => {
            let results = harness::validate::run_suite();
            for r in &results {
                println!("{} {}{}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail_suffix());
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
