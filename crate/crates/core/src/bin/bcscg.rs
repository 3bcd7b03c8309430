use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bcscg_ds::bench::{
    curves_for, performance_profile, read_records, run_cell, run_experiment, write_curve_csv, write_profile_csv,
    write_record, Cell, ExperimentConfig, ProfileMode,
};
use bcscg_ds::problems::DEFAULT_EPS_F;
use bcscg_ds::{Execution, SolverParams, Variant};

#[derive(Parser)]
#[command(name = "bcscg", version, about = "Box-constrained direct search benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    PerSeed,
    Median,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver on a single cell and write its record.
    Run {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value = "smooth")]
        variant: Variant,
        #[arg(long, default_value_t = DEFAULT_EPS_F)]
        eps_f: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        budget_mult: usize,
        #[arg(long)]
        out: PathBuf,
        /// Evaluate poll and vicinity batches on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Run a full grid described by a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run grid cells one after another.
        #[arg(long)]
        sequential: bool,
    },
    /// Performance profile of every solver found in a records directory.
    Profile {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-2)]
        tau: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "per-seed")]
        mode: Mode,
    },
    /// Median progress curves for one problem, dimension and variant.
    Curve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        problem: String,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        variant: Variant,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> bcscg_ds::Result<()> {
    match cli.command {
        Command::Run {
            problem,
            dim,
            variant,
            eps_f,
            seed,
            budget_mult,
            out,
            sequential,
        } => {
            let params = SolverParams {
                budget_multiplier: budget_mult,
                ..SolverParams::default()
            };
            params.validate()?;
            let cell = Cell {
                problem,
                dimension: dim,
                variant,
                eps_f,
                seed,
            };
            let record = run_cell(&cell, &params, execution(sequential))?;
            let path = write_record(&out, &record)?;
            println!(
                "{}: f0 = {:.6e}, final = {:.6e}, evaluations = {}",
                path.display(),
                record.initial_value,
                record.final_value(),
                record.best_history.last().map_or(0, |h| h.0)
            );
        }
        Command::Bench {
            config,
            out,
            sequential,
        } => {
            let config = ExperimentConfig::from_file(&config)?;
            let report = run_experiment(&config, &out, execution(sequential))?;
            println!("{} records written to {}", report.written.len(), out.display());
            for f in &report.failures {
                eprintln!("cell failed ({}): {}", f.cell, f.error);
            }
            if !report.failures.is_empty() {
                return Err(bcscg_ds::Error::InvalidConfig(format!(
                    "{} of {} cells failed",
                    report.failures.len(),
                    report.failures.len() + report.written.len()
                )));
            }
        }
        Command::Profile { input, tau, out, mode } => {
            let records = read_records(&input)?;
            let mode = match mode {
                Mode::PerSeed => ProfileMode::PerSeed,
                Mode::Median => ProfileMode::Median,
            };
            let table = performance_profile(&records, tau, mode)?;
            write_profile_csv(&table, &out)?;
            println!(
                "{} solvers, {} instances -> {}",
                table.solvers.len(),
                table.instances.len(),
                out.display()
            );
        }
        Command::Curve {
            input,
            problem,
            dim,
            variant,
            out,
        } => {
            let records = read_records(&input)?;
            let curves = curves_for(&records, &problem, dim, variant);
            if curves.is_empty() {
                return Err(bcscg_ds::Error::InvalidConfig(format!(
                    "no records for {problem} n={dim} {variant} in {}",
                    input.display()
                )));
            }
            write_curve_csv(&curves, &out)?;
            println!("{} solver curves -> {}", curves.len(), out.display());
        }
    }
    Ok(())
}
