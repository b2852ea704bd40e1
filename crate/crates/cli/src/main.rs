//! `rkma`: generate instances, diagnose, solve, tune probabilities and run
//! the bundled experiments.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numeric failure,
//! 3 no convergence guarantee.

mod commands;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rkma::probopt::Objective;
use rkma::StepRule;

use commands::{GenerateParams, Kind, OptimizeParams, PSource, Schedule, SolveParams};
use experiments::{Experiment, ExperimentParams};

#[derive(Parser, Debug)]
#[command(name = "rkma", version, about = "Randomized Kaczmarz with a mismatched adjoint")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a test instance (A.mtx, V.mtx, b.csv, ...) to a directory.
    Generate(GenerateArgs),
    /// Convergence diagnostics for a stored system.
    Diagnose(DiagnoseArgs),
    /// Run the iteration and write trace.csv and x.csv.
    Solve(SolveArgs),
    /// Optimize the row probabilities; writes p_opt.csv and history.csv.
    Optimize(OptimizeArgs),
    /// Run a bundled experiment end to end.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    kind: Kind,
    #[arg(long, default_value_t = 200)]
    rows: usize,
    #[arg(long, default_value_t = 50)]
    cols: usize,
    /// Entries of A below this magnitude are zero in V.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Standard deviation of the noise kept in r.csv (gaussian kind).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Fraction of V entries set to zero (probopt kind).
    #[arg(long, default_value_t = 0.05)]
    zero_frac: f64,
    /// Image side length (ct kind).
    #[arg(long, default_value_t = 32)]
    grid: usize,
    /// Position of the forward ray inside each group of three (ct kind).
    #[arg(long, default_value_t = 1)]
    ct_forward_row: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SystemArgs {
    /// Directory holding A.mtx, V.mtx, b.csv and optionally r.csv, xhat.csv.
    #[arg(long)]
    system_dir: PathBuf,
    /// Step length rule: oblique, rownorm-a, rownorm-v or adaptive-v.
    #[arg(long, default_value = "oblique")]
    rule: StepRule,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// uniform, rownorm-a, pairing or file:PATH.
    #[arg(long, default_value = "rownorm-a")]
    p: PSource,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// uniform, rownorm-a, pairing or file:PATH.
    #[arg(long, default_value = "rownorm-a")]
    p: PSource,
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    #[arg(long, default_value_t = 100)]
    log_stride: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative residual for early stopping; 0 disables it.
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// lambda (maximize) or norm (minimize).
    #[arg(long, default_value = "lambda")]
    objective: Objective,
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    #[arg(long, value_enum, default_value = "sqrt")]
    schedule: Schedule,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: Experiment,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    zero_frac: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    /// Passes over the rows (ct).
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    log_stride: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Iterations of the probability optimization (table1).
    #[arg(long)]
    opt_iters: Option<usize>,
    #[arg(long, default_value_t = 1)]
    ct_forward_row: usize,
    /// Also write diagnostics.csv for the CT pair (dense, slow for large grids).
    #[arg(long)]
    ct_diagnostics: bool,
}

fn dispatch(cmd: Command) -> rkma::Result<i32> {
    match cmd {
        Command::Generate(g) => {
            let params = GenerateParams {
                kind: g.kind,
                rows: g.rows,
                cols: g.cols,
                tau: g.tau,
                noise: g.noise,
                zero_frac: g.zero_frac,
                grid: g.grid,
                ct_forward_row: g.ct_forward_row,
                seed: g.seed,
            };
            commands::generate(&params, &g.out)?;
        }
        Command::Diagnose(d) => {
            return commands::diagnose(&d.system.system_dir, &d.p, d.system.rule, &d.system.out);
        }
        Command::Solve(s) => {
            let params = SolveParams {
                p: s.p,
                rule: s.system.rule,
                iters: s.iters,
                log_stride: s.log_stride,
                seed: s.seed,
                tol: s.tol,
            };
            commands::solve(&s.system.system_dir, &params, &s.system.out)?;
        }
        Command::Optimize(o) => {
            let params = OptimizeParams {
                objective: o.objective,
                rule: o.system.rule,
                iters: o.iters,
                step: o.step,
                schedule: o.schedule,
            };
            commands::optimize(&o.system.system_dir, &params, &o.system.out)?;
        }
        Command::Experiment(e) => {
            let params = ExperimentParams {
                rows: e.rows,
                cols: e.cols,
                tau: e.tau,
                noise: e.noise,
                zero_frac: e.zero_frac,
                grid: e.grid,
                sweeps: e.sweeps,
                iters: e.iters,
                log_stride: e.log_stride,
                replicates: e.replicates,
                opt_iters: e.opt_iters,
                ct_forward_row: e.ct_forward_row,
                ct_diagnostics: e.ct_diagnostics,
                seed: e.seed,
            };
            experiments::run_experiment(e.name, &params, &e.out)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are invalid input, not clap's default 2
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
