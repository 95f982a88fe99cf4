//! Command-line driver for robustness sweeps.

use anyhow::Context;
use clap::{Parser, Subcommand};
use relucert::report::{self, ReportError, RunOptions, SweepConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "relucert",
    about = "Formal robustness verification of ReLU image classifiers \
             under noise, brightness and contrast perturbations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full sweep described by a config file.
    Run {
        /// Sweep configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Anchor-level worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        /// Reuse per-anchor result files from an interrupted run.
        #[arg(long)]
        resume: bool,
    },
    /// Print summary tables for a completed (or partial) run directory.
    Summarize {
        /// Output directory of a previous `run`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-export CSV artifacts from per-anchor result files.
    Export {
        /// Output directory of a previous `run`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Load a network file and report its shape or the first violated
    /// invariant.
    ValidateNetwork {
        /// Network JSON document.
        network: PathBuf,
    },
    /// Falsifier-only pass: sampling attacks on every grid cell, no
    /// verifier calls.
    Attack {
        /// Sweep configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Anchor-level worker threads.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<ReportError>()
                .map(ReportError::exit_code)
                .unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}

fn load_config(path: &PathBuf, out: Option<PathBuf>) -> Result<SweepConfig, ReportError> {
    let mut config = SweepConfig::load(path)?;
    if let Some(out) = out {
        config.out_dir = out;
    }
    Ok(config)
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            jobs,
            resume,
        } => {
            let config = load_config(&config, out)?;
            let opts = RunOptions { jobs, resume };
            let summary = report::run(&config, &opts)?;
            print_summary(&summary);
            println!("results written to {}", config.out_dir.display());
            Ok(())
        }
        Command::Summarize { out } => {
            let (config, results) = report::load_results(&out)?;
            let summary = report::summarize(&config, &results);
            print_summary(&summary);
            Ok(())
        }
        Command::Export { out } => {
            let (config, results) = report::load_results(&out)?;
            let summary = report::summarize(&config, &results);
            report::export_csvs(&out, &summary, &results)?;
            println!("CSV artifacts written to {}", out.display());
            Ok(())
        }
        Command::ValidateNetwork { network } => {
            let net = relucert::nn::load_network(&network)
                .with_context(|| format!("validating {}", network.display()))?;
            println!(
                "ok: {} inputs -> {} outputs, {} layers, {} ReLU neurons",
                net.input_dim(),
                net.output_dim(),
                net.layers().len(),
                net.relu_count()
            );
            if let Some(labels) = net.class_labels() {
                println!("classes: {}", labels.join(", "));
            }
            Ok(())
        }
        Command::Attack { config, out, jobs } => {
            let config = load_config(&config, out)?;
            let opts = RunOptions { jobs, resume: false };
            let summary = report::attack_run(&config, &opts)?;
            println!(
                "attacked {} of {} anchors; hits per (beta, eps) cell:",
                summary.anchors_attacked, summary.anchors_total
            );
            print!("{:>8}", "eps\\beta");
            for beta in &summary.betas {
                print!("{beta:>8}");
            }
            println!();
            for e in (0..summary.epsilons.len()).rev() {
                print!("{:>8}", summary.epsilons[e]);
                for b in 0..summary.betas.len() {
                    print!("{:>8}", summary.hits[b][e]);
                }
                println!();
            }
            Ok(())
        }
    }
}

fn print_summary(summary: &report::SweepSummary) {
    println!(
        "anchors: {} total, {} analyzed, {} skipped",
        summary.anchors_total, summary.anchors_analyzed, summary.anchors_skipped
    );
    println!(
        "verifier calls: {} grid, {} contrast; deduced fractions: {:.1}% grid, {:.1}% contrast",
        summary.grid_verifier_calls,
        summary.contrast_verifier_calls,
        100.0 * summary.grid_totals.deduced_fraction,
        100.0 * summary.contrast_totals.deduced_fraction,
    );

    println!("\npercent UNSAT per (beta, eps):");
    print!("{:>9}", "eps\\beta");
    for beta in &summary.betas {
        print!("{beta:>9}");
    }
    println!();
    for e in (0..summary.epsilons.len()).rev() {
        print!("{:>9}", summary.epsilons[e]);
        for b in 0..summary.betas.len() {
            print!("{:>9.2}", summary.grid_percent_unsat[b][e]);
        }
        println!();
    }

    println!("\npercent UNSAT per gamma:");
    print!("{:>10}", "gamma");
    for gamma in &summary.gammas {
        print!("{gamma:>8}");
    }
    println!();
    print!("{:>10}", "% UNSAT");
    for pct in &summary.contrast_percent_unsat {
        print!("{pct:>8.2}");
    }
    println!();

    // Appendix-style result tables: Overall / deduced / verified rows.
    println!("\ncontrast query counts per gamma:");
    let gl = &summary.contrast_counts;
    print!("{:>16}", "result");
    for gamma in &summary.gammas {
        print!("{gamma:>8}");
    }
    println!();
    let rows: [(&str, Box<dyn Fn(&report::CellCounts) -> usize>); 7] = [
        ("SAT overall", Box::new(|c| c.sat_total)),
        ("  deduced", Box::new(|c| c.sat_deduced)),
        ("  verified", Box::new(|c| c.sat_verified)),
        ("  falsified", Box::new(|c| c.sat_falsified)),
        ("UNSAT overall", Box::new(|c| c.unsat_total)),
        ("  deduced", Box::new(|c| c.unsat_deduced)),
        ("  verified", Box::new(|c| c.unsat_verified)),
    ];
    for (name, get) in &rows {
        print!("{name:>16}");
        for counts in gl {
            print!("{:>8}", get(counts));
        }
        println!();
    }
    print!("{:>16}", "UNKNOWN");
    for counts in gl {
        print!("{:>8}", counts.unknown);
    }
    println!();
}
