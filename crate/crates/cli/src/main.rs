//! `mbsalloc`: allocation tables, rate sweeps, and chain validation for the
//! dynamic MBS bandwidth-allocation system.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mbsalloc::{
    load_config, rate_grid, run_sweep, validate_against_chain, Bandwidth, SchemeId, SimConfig,
    SweepMode, SweepSpec, SystemConfig, Technique,
};

#[derive(Parser)]
#[command(
    name = "mbsalloc",
    about = "Layered multicast bandwidth allocation: allocation tables, scheme sweeps, chain validation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Path to the key=value system configuration.
    #[arg(long)]
    config: PathBuf,

    /// Override the config's degradation technique.
    #[arg(long, value_parser = parse_technique)]
    technique: Option<Technique>,
}

impl ConfigArg {
    fn load(&self) -> Result<SystemConfig> {
        let text = fs::read_to_string(&self.config)
            .with_context(|| format!("reading config {}", self.config.display()))?;
        let mut config = load_config(&text).context("loading config")?;
        if let Some(technique) = self.technique {
            config.technique = technique;
        }
        Ok(config)
    }
}

fn parse_technique(s: &str) -> Result<Technique, String> {
    s.parse::<Technique>().map_err(|e| e.to_string())
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth, String> {
    s.parse::<Bandwidth>().map_err(|e| e.to_string())
}

fn parse_schemes(s: &str) -> Result<Vec<SchemeId>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            bail!("empty scheme entry in `{s}`");
        }
        let id: u8 = part
            .parse()
            .with_context(|| format!("bad scheme `{part}`"))?;
        out.push(SchemeId::new(id)?);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Subcommand)]
enum Command {
    /// Render the per-session MBS allocation for a given non-MBS commitment.
    Allocate {
        #[command(flatten)]
        config: ConfigArg,

        /// Bandwidth currently committed to non-MBS calls (e.g. `9 Mbps`).
        #[arg(long, value_parser = parse_bandwidth)]
        non_mbs_bw: Bandwidth,

        /// Write machine-readable rows to this file instead of a table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sweep arrival rates across schemes and emit the metrics CSV.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,

        #[arg(long)]
        rate_min: f64,
        #[arg(long)]
        rate_max: f64,
        #[arg(long)]
        rate_step: f64,

        /// Comma-separated scheme ids (default: the config's scheme).
        #[arg(long)]
        scheme: Option<String>,

        /// analytic, sim, or both.
        #[arg(long, default_value = "analytic")]
        mode: String,

        #[arg(long, default_value_t = 42)]
        seed: u64,

        /// Simulation replications per point.
        #[arg(long, default_value_t = 10)]
        replications: u32,

        /// Offered new calls per replication.
        #[arg(long, default_value_t = 100_000)]
        calls: u64,

        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compare the analytic chain against the simulator at one rate.
    Validate {
        #[command(flatten)]
        config: ConfigArg,

        /// Total new-call arrival rate, calls/s.
        #[arg(long)]
        rate: f64,

        #[arg(long, default_value_t = 42)]
        seed: u64,

        #[arg(long, default_value_t = 10)]
        replications: u32,

        /// Offered new calls per replication.
        #[arg(long, default_value_t = 100_000)]
        calls: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("MBSALLOC_LOG")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Allocate {
            config,
            non_mbs_bw,
            csv,
        } => {
            let cfg = config.load()?;
            let technique = cfg.technique;
            let alloc = mbsalloc::allocation_for(&cfg, non_mbs_bw, technique)
                .context("allocating")?;
            match csv {
                Some(path) => fs::write(&path, mbsalloc::allocation_csv(&alloc))
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{}", mbsalloc::render_allocation(&alloc, non_mbs_bw)),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            rate_min,
            rate_max,
            rate_step,
            scheme,
            mode,
            seed,
            replications,
            calls,
            csv,
        } => {
            let cfg = config.load()?;
            let mode = match mode.as_str() {
                "analytic" => SweepMode::Analytic,
                "sim" => SweepMode::Sim,
                "both" => SweepMode::Both,
                other => bail!("unknown mode `{other}` (expected analytic, sim, or both)"),
            };
            let schemes = match scheme {
                Some(list) => parse_schemes(&list)?,
                None => vec![cfg.scheme],
            };
            let spec = SweepSpec {
                rates: rate_grid(rate_min, rate_max, rate_step)?,
                schemes,
                technique: cfg.technique,
                mode,
                seed,
                replications,
                offered_calls: calls,
            };
            log::info!(
                "sweeping {} rates x {} schemes ({:?})",
                spec.rates.len(),
                spec.schemes.len(),
                mode
            );
            let result = run_sweep(&cfg, &spec)?;
            let text = result.to_csv();
            match csv {
                Some(path) => fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            config,
            rate,
            seed,
            replications,
            calls,
        } => {
            let cfg = config.load()?;
            let sim = SimConfig::sized(cfg, rate, seed, calls, replications);
            let cmp = validate_against_chain(&sim)?;
            println!(
                "regime: {}",
                if cmp.exact_regime {
                    "exact (rigid single-region chain; agreement enforced)"
                } else {
                    "approximate (report only)"
                }
            );
            println!(
                "{:<22} {:>14} {:>14} {:>12} {:>10} {:>10} {:>8}",
                "metric", "analytic", "simulated", "ci95", "rel_gap", "samples", "verdict"
            );
            for row in &cmp.rows {
                let verdict = match row.pass {
                    Some(true) => "PASS",
                    Some(false) => "FAIL",
                    None if row.samples == 0 => "SKIP",
                    None => "INFO",
                };
                println!(
                    "{:<22} {:>14.6e} {:>14.6e} {:>12.3e} {:>10.3e} {:>10} {:>8}",
                    row.metric,
                    row.analytic,
                    row.simulated,
                    row.ci_halfwidth,
                    row.relative_gap(),
                    row.samples,
                    verdict
                );
            }
            if cmp.all_pass() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
