use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use manifold_ot::config::{parse_config_with, ExperimentConfig};
use manifold_ot::error::{Error, Result};
use manifold_ot::experiment::run_experiment;
use manifold_ot::selftest::run_selftests;

#[derive(Parser)]
#[command(
    name = "manifold-ot",
    about = "Optimal transport maps and nonlinear filtering on S1, SE(2), and SO(3)",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write CSV artifacts plus a manifest.
    Run {
        /// Experiment id: ot-s1-gaussians, ot-s1-mixture, ot-se2, ot-so3,
        /// filter-s1-static, filter-s1-dynamic, filter-se2, filter-so3.
        experiment: String,
        /// Configuration file (line-oriented `key = value`, `#` comments).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: out/<experiment>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Inclusive seed range `A..B`; fans out one run per seed into
        /// <out>/seed_<n>/.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Run the oracle and invariant check battery.
    Selftest,
}

fn parse_seed_range(text: &str) -> Result<(u64, u64)> {
    let Some((a, b)) = text.split_once("..") else {
        return Err(Error::config(format!("expected A..B seed range, got '{text}'")));
    };
    let lo: u64 = a
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("bad seed range start '{a}'")))?;
    let hi: u64 = b
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("bad seed range end '{b}'")))?;
    if hi < lo {
        return Err(Error::config(format!("empty seed range {lo}..{hi}")));
    }
    Ok((lo, hi))
}

fn cmd_run(
    experiment: &str,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    seeds: Option<String>,
) -> Result<()> {
    let text = match &config {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut cfg: ExperimentConfig = parse_config_with(&text, Some(experiment))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out_dir = out.unwrap_or_else(|| PathBuf::from("out").join(experiment));

    match seeds {
        None => {
            run_experiment(&cfg, &out_dir)?;
            println!("wrote {}", out_dir.display());
            Ok(())
        }
        Some(range) => {
            let (lo, hi) = parse_seed_range(&range)?;
            let runs: Vec<(u64, PathBuf)> = (lo..=hi)
                .map(|s| (s, out_dir.join(format!("seed_{s}"))))
                .collect();
            let results: Vec<Result<()>> = runs
                .par_iter()
                .map(|(s, dir)| {
                    let mut cfg = cfg.clone();
                    cfg.seed = *s;
                    run_experiment(&cfg, dir)
                })
                .collect();
            for ((s, dir), result) in runs.iter().zip(results) {
                result?;
                println!("seed {s}: wrote {}", dir.display());
            }
            Ok(())
        }
    }
}

fn cmd_selftest() -> Result<()> {
    let mut failed = 0;
    for result in run_selftests() {
        let status = if result.passed { "PASS" } else { "FAIL" };
        println!("{status} {:<32} {}", result.name, result.detail);
        if !result.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(Error::numerical(format!("{failed} self-test(s) failed")));
    }
    println!("all self-tests passed");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            experiment,
            config,
            seed,
            out,
            seeds,
        } => cmd_run(&experiment, config, seed, out, seeds),
        Command::Selftest => cmd_selftest(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
