use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sparsedom_cli::run::{run_kernel_stats, run_t1_probe, run_verify, MANIFEST_FILE};
use sparsedom_cli::{exit_code, Axis, ExperimentConfig, RunOutcome, EXIT_CHECK_FAILED, EXIT_CONFIG};

const OUT_ENV: &str = "SPARSEDOM_OUT";

#[derive(Parser)]
#[command(name = "sparsedom", version, about = "Pointwise sparse domination experiments on grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; falls back to the config, then $SPARSEDOM_OUT, then ./sparsedom-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel statistics, construction and verification.
    Run(Common),
    /// One sub-run per value of a parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// N, alpha, s, max_depth or seed.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
    /// Dini and Hormander estimates of the configured kernel.
    KernelStats(Common),
    /// Random testing-condition probe.
    T1Probe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<u32>,
        /// Side of the probed cube in cells.
        #[arg(long)]
        side: Option<i64>,
    },
    /// Re-checks a stored family against a stored function.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        function: PathBuf,
    },
}

fn prepare(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.directory.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("sparsedom-out"));
    Ok((cfg, out))
}

fn execute(command: Command) -> Result<(RunOutcome, PathBuf)> {
    Ok(match command {
        Command::Run(c) => {
            let (cfg, out) = prepare(&c)?;
            (sparsedom_cli::run(&cfg, &out)?, out)
        }
        Command::Sweep { common, axis, values } => {
            let (cfg, out) = prepare(&common)?;
            let axis: Axis = axis.parse()?;
            (sparsedom_cli::sweep(&cfg, axis, &values, &out)?, out)
        }
        Command::KernelStats(c) => {
            let (cfg, out) = prepare(&c)?;
            (run_kernel_stats(&cfg, &out)?, out)
        }
        Command::T1Probe { common, trials, side } => {
            let (mut cfg, out) = prepare(&common)?;
            if let Some(t) = trials {
                cfg.verify.t1_trials = t;
            }
            if side.is_some() {
                cfg.verify.t1_side = side;
            }
            (run_t1_probe(&cfg, &out)?, out)
        }
        Command::Verify { common, family, function } => {
            let (cfg, out) = prepare(&common)?;
            (run_verify(&cfg, &family, &function, &out)?, out)
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok((outcome, out)) => {
            for r in &outcome.reports {
                println!(
                    "{:<18} {} worst_ratio={:.6e}{}",
                    r.name,
                    if r.passed { "PASS" } else { "FAIL" },
                    r.worst_ratio,
                    r.worst_location.as_ref().map_or(String::new(), |l| format!(" at {l}"))
                );
            }
            if let Some(c) = outcome.manifest.c_emp {
                println!("C_emp = {c:.6e}");
            }
            println!("manifest: {}", out.join(MANIFEST_FILE).display());
            if outcome.manifest.passed {
                ExitCode::SUCCESS
            } else {
                for f in &outcome.manifest.files {
                    if f.path.ends_with("reports.json") || f.path.ends_with("reports.csv") {
                        eprintln!("failed checks recorded in {}", out.join(&f.path).display());
                    }
                }
                ExitCode::from(EXIT_CHECK_FAILED as u8)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
