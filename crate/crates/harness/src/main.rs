use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ggt_harness::bench::{bench_step_cost, write_bench};
use ggt_harness::compare::{compare_files, text_table, write_summary_csv};
use ggt_harness::config::ExperimentConfig;
use ggt_harness::run::{run_experiment, RunOptions};
use ggt_harness::theory_run::{run_theory, TheoryConfig, TheoryReport};
use ggt_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(
    name = "ggt",
    version,
    about = "Low-rank full-matrix adaptive optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config (or a previous run's manifest.toml).
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        master_seed: Option<u64>,
        /// Run seeds one at a time instead of on the worker pool.
        #[arg(long)]
        serial: bool,
    },
    /// Summarize and rank traces by median final loss.
    Compare {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Also write the summary as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time one preconditioned step over a (d, r) grid.
    Bench {
        #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [256usize, 512, 1024])]
        d: Vec<usize>,
        #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [8usize, 16, 32])]
        r: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
    },
    /// Run an epochs, nonconvex or hinge experiment.
    Theory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        serial: bool,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            master_seed,
            serial,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_experiment(
                &cfg,
                RunOptions {
                    out: out.as_deref(),
                    master_seed,
                    parallel: !serial,
                },
            )?;
            if let Some((p, o)) = report.best() {
                println!(
                    "{}: best lr {} median final loss {:.6e} ({} grid point(s))",
                    report.output_dir.display(),
                    p.lr,
                    o.median_final_loss(),
                    report.points.len()
                );
            }
            if report.failed() > 0 {
                return Err(HarnessError::Diverged {
                    failed: report.failed(),
                    total: report.total(),
                });
            }
            Ok(())
        }
        Command::Compare { traces, out } => {
            let rows = compare_files(&traces)?;
            print!("{}", text_table(&rows));
            if let Some(path) = out {
                write_summary_csv(&path, &rows)?;
            }
            Ok(())
        }
        Command::Bench { d, r, reps, out } => {
            let rows = bench_step_cost(&d, &r, reps)?;
            for row in &rows {
                println!("d={:<6} r={:<4} {:>12} ns", row.d, row.r, row.median_ns);
            }
            write_bench(&out, &rows)
        }
        Command::Theory {
            config,
            out,
            serial,
        } => {
            let cfg = TheoryConfig::load(&config)?;
            match run_theory(&cfg, out.as_deref(), !serial)? {
                TheoryReport::Epochs(r) => {
                    println!("steps per epoch {}", r.sizing.steps_per_epoch);
                    for (k, ratio) in r.median_ratios.iter().enumerate() {
                        println!("epoch {}: median gap ratio {ratio:.4}", k + 1);
                    }
                }
                TheoryReport::Nonconvex(rows) => println!("{} nonconvex runs", rows.len()),
                TheoryReport::Hinge(rows) => {
                    for h in rows {
                        println!(
                            "d={} T={} loss {:.4} mu {:.4}",
                            h.d, h.horizon, h.total_loss, h.mu_lipschitz
                        );
                    }
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
