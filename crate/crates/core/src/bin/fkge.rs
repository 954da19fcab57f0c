//! `fkge`: train, attack, account and evaluate federated KGE runs.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 runtime error, 4 privacy
//! budget exhausted before the first iteration.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use fkge_lab::attacks::AttackKind;
use fkge_lab::dp::DpConfig;
use fkge_lab::harness::{self, AccountRequest, AttackOverrides, ExperimentConfig};
use fkge_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "fkge", version, about = "Federated KGE privacy lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a federation and write a run directory.
    Train {
        /// TOML experiment config; defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// output root (overrides FKGE_OUT)
        #[arg(long)]
        out: Option<PathBuf>,
        /// run name (overrides the config)
        #[arg(long)]
        name: Option<String>,
    },
    /// Replay recorded observables through an attack.
    Attack {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_parser = parse_attack)]
        kind: AttackKind,
        #[arg(long)]
        si_cap: Option<usize>,
        #[arg(long)]
        si_quantile: Option<f64>,
    },
    /// Privacy cost of hypothetical private iterations.
    Account {
        /// read the defense section of this experiment config
        #[arg(long)]
        config: Option<PathBuf>,
        /// Poisson sampling rate B / |train|
        #[arg(long)]
        q: f64,
        #[arg(long)]
        iterations: usize,
        /// iterations whose release test passed (default: all)
        #[arg(long)]
        releases: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        sigma_r: Option<f64>,
        #[arg(long)]
        sigma_p: Option<f64>,
        #[arg(long)]
        delta_t: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Re-evaluate the checkpoints of a run.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        round: Option<usize>,
    },
}

fn parse_attack(s: &str) -> std::result::Result<AttackKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    // a closed pipe (e.g. `| head`) is not an error
    let _ = writeln!(std::io::stdout(), "{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, out, name } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(n) = name {
                cfg.name = n;
            }
            let root = out.unwrap_or_else(harness::output_root);
            let s = harness::cmd_train(&cfg, &root)?;
            eprintln!("run written to {}", s.run_dir.display());
            print_json(&s.metrics)
        }
        Command::Attack {
            run,
            kind,
            si_cap,
            si_quantile,
        } => {
            let r = harness::cmd_attack(&run, kind, AttackOverrides { si_cap, si_quantile })?;
            for w in &r.summary.warnings {
                eprintln!("warning: {w}");
            }
            print_json(&r.summary)
        }
        Command::Account {
            config,
            q,
            iterations,
            releases,
            sigma,
            sigma_r,
            sigma_p,
            delta_t,
            delta,
        } => {
            let mut dp = match config {
                Some(p) => ExperimentConfig::load(&p)?.defense.unwrap_or_default(),
                None => DpConfig::default(),
            };
            dp.sigma = sigma.unwrap_or(dp.sigma);
            dp.sigma_r = sigma_r.unwrap_or(dp.sigma_r);
            dp.sigma_p = sigma_p.unwrap_or(dp.sigma_p);
            dp.delta_t = delta_t.unwrap_or(dp.delta_t);
            dp.delta = delta.unwrap_or(dp.delta);
            let r = harness::cmd_account(&AccountRequest {
                dp,
                q,
                iterations,
                releases,
            })?;
            print_json(&r)
        }
        Command::Eval { run, round } => print_json(&harness::cmd_eval(&run, round)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
