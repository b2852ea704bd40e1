//! End-to-end runs that write traces, diagnostics and bound curves.

use std::path::Path;

use rayon::prelude::*;
use rkma::diagnostics::{diagnose_auto, inconsistent_bound};
use rkma::io::save_vector;
use rkma::probopt::{optimize_probabilities, Objective, ProbOptConfig, ProbOptResult};
use rkma::problems::{
    assemble_consistent, assemble_inconsistent, assemble_scaled_for_probopt,
    assemble_underdetermined, gen_gaussian, mismatch_threshold, range_defect, ProbabilityScheme,
};
use rkma::solver::run_replicates;
use rkma::{
    Error, ProbabilityVector, RateDiagnostics, Result, SolverConfig, StepRule, SystemPair, Trace,
};

use crate::commands::ct_system;
use crate::output::{ensure_dir, num, opt, rms_trace_rows, write_csv, write_manifest, Provenance, TRACE_HEADER};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    /// Consistent overdetermined Gaussian system, RK vs RKMA.
    Fig1,
    /// The same with a noisy right-hand side and the error-floor bound.
    Fig2,
    /// Underdetermined system with its solution in range(V^T).
    Fig3,
    /// Parallel-beam CT with an averaged back projector.
    Ct,
    /// Diagnostics and iteration counts for several probability choices.
    Table1,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Ct => "ct",
            Experiment::Table1 => "table1",
        }
    }
}

/// Scale flags; `None` takes the experiment's default.
#[derive(Clone, Debug, Default)]
pub struct ExperimentParams {
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub tau: Option<f64>,
    pub noise: Option<f64>,
    pub zero_frac: Option<f64>,
    pub grid: Option<usize>,
    pub sweeps: Option<usize>,
    pub iters: Option<usize>,
    pub log_stride: Option<usize>,
    pub replicates: Option<usize>,
    pub opt_iters: Option<usize>,
    pub ct_forward_row: usize,
    /// Dense diagnostics of the CT pair; slow beyond small grids.
    pub ct_diagnostics: bool,
    pub seed: u64,
}

const RULE: StepRule = StepRule::ObliqueExact;

struct Ctx<'a> {
    out: &'a Path,
    prov: Provenance,
    manifest: Vec<(&'static str, String)>,
}

impl Ctx<'_> {
    fn record(&mut self, key: &'static str, value: impl std::fmt::Debug) {
        self.manifest.push((key, format!("{value:?}")));
    }

    fn comments(&self, extra: &[String]) -> Vec<String> {
        self.prov.with(extra.iter().cloned())
    }

    fn traces(&self, name: &str, traces: &[Trace], what: &str) -> Result<()> {
        let c = self.comments(&[
            what.to_string(),
            format!("root mean square over {} replicates", traces.len()),
        ]);
        write_csv(&self.out.join(name), &c, TRACE_HEADER, rms_trace_rows(traces))
    }

    fn diagnostics(&self, rows: &[(&str, &RateDiagnostics)]) -> Result<()> {
        let c = self.comments(&[format!("rule: {RULE}")]);
        let header = format!("method,{}", RateDiagnostics::CSV_HEADER);
        let body = rows.iter().map(|(m, d)| format!("{m},{}", d.to_csv_row()));
        write_csv(&self.out.join("diagnostics.csv"), &c, &header, body)
    }

    fn summary(&self, rows: &[(&str, String)]) -> Result<()> {
        let c = self.comments(&[]);
        let body = rows.iter().map(|(k, v)| format!("{k},{v}"));
        write_csv(&self.out.join("summary.csv"), &c, "quantity,value", body)
    }
}

pub fn run_experiment(which: Experiment, ep: &ExperimentParams, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let mut ctx = Ctx {
        out,
        prov: Provenance::new(Some(ep.seed)),
        manifest: vec![("experiment", which.name().to_string())],
    };
    match which {
        Experiment::Fig1 => fig1(ep, &mut ctx)?,
        Experiment::Fig2 => fig2(ep, &mut ctx)?,
        Experiment::Fig3 => fig3(ep, &mut ctx)?,
        Experiment::Ct => ct(ep, &mut ctx)?,
        Experiment::Table1 => table1(ep, &mut ctx)?,
    }
    ctx.record("seed", ep.seed);
    write_manifest(out, &ctx.prov, &ctx.manifest)?;
    println!("{} written to {}", which.name(), out.display());
    Ok(())
}

fn rownorm(sys: &SystemPair) -> Result<ProbabilityVector> {
    ProbabilityScheme::RowNormA.build(sys)
}

fn sq(x: f64) -> f64 {
    x * x
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// RKMA on `sys` and RK on its matched copy, same seeds.
fn rk_and_rkma(
    sys: &SystemPair,
    cfg: &SolverConfig,
    reps: usize,
) -> Result<(SystemPair, Vec<Trace>, Vec<Trace>)> {
    let matched = sys.matched()?;
    let p = rownorm(sys)?;
    let rkma = run_replicates(sys, &p, cfg, reps)?;
    let rk = run_replicates(&matched, &rownorm(&matched)?, cfg, reps)?;
    Ok((matched, rk, rkma))
}

fn solver_cfg(ep: &ExperimentParams, iters: usize, stride: usize) -> SolverConfig {
    SolverConfig::new(ep.iters.unwrap_or(iters))
        .rule(RULE)
        .log_stride(ep.log_stride.unwrap_or(stride))
        .seed(ep.seed)
}

/// `(1 - lambda)^k e0^2` and `rho^k e0` on the logging grid.
fn rate_curves(ctx: &Ctx, logged: &[usize], d: &RateDiagnostics, e0: f64) -> Result<()> {
    let c = ctx.comments(&[
        "sq_error_bound = (1 - lambda)^k e0^2 bounds the mean squared error".into(),
        "mean_error_rate = rho^k e0 is the asymptotic rate of the mean error".into(),
        format!("lambda: {:?}", d.lambda),
        format!("rho: {:?}", d.rho_asymptotic),
        format!("e0: {e0:?}"),
    ]);
    let rows = logged.iter().map(|&k| {
        let kf = k as f64;
        format!(
            "{k},{:?},{:?}",
            (1.0 - d.lambda).powf(kf) * sq(e0),
            d.rho_asymptotic.powf(kf) * e0
        )
    });
    write_csv(&ctx.out.join("bound.csv"), &c, "k,sq_error_bound,mean_error_rate", rows)
}

fn gaussian_pair(ep: &ExperimentParams, ctx: &mut Ctx) -> Result<(rkma::DenseMatrix, rkma::DenseMatrix)> {
    let (m, n, tau) = (ep.rows.unwrap_or(200), ep.cols.unwrap_or(50), ep.tau.unwrap_or(0.5));
    ctx.record("rows", m);
    ctx.record("cols", n);
    ctx.record("tau", tau);
    let a = gen_gaussian(m, n, ep.seed)?;
    let v = mismatch_threshold(&a, tau)?;
    Ok((a, v))
}

fn fig1(ep: &ExperimentParams, ctx: &mut Ctx) -> Result<()> {
    let (a, v) = gaussian_pair(ep, ctx)?;
    let sys = assemble_consistent(a, v, ep.seed)?;
    let cfg = solver_cfg(ep, 20_000, 200);
    let reps = ep.replicates.unwrap_or(20);
    record_run(ctx, &cfg, reps);
    let (matched, rk, rkma) = rk_and_rkma(&sys, &cfg, reps)?;
    let d = diagnose_auto(&sys, &rownorm(&sys)?, RULE)?;
    let dm = diagnose_auto(&matched, &rownorm(&matched)?, RULE)?;
    ctx.traces("rk_trace.csv", &rk, "method: rk (V = A)")?;
    ctx.traces("rkma_trace.csv", &rkma, "method: rkma")?;
    ctx.diagnostics(&[("rk", &dm), ("rkma", &d)])?;
    rate_curves(ctx, &rkma[0].logged_k, &d, norm(sys.truth().unwrap_or(&[])))
}

fn fig2(ep: &ExperimentParams, ctx: &mut Ctx) -> Result<()> {
    let (a, v) = gaussian_pair(ep, ctx)?;
    let noise = ep.noise.unwrap_or(0.1);
    ctx.record("noise", noise);
    let sys = assemble_inconsistent(a, v, noise, ep.seed)?;
    let cfg = solver_cfg(ep, 20_000, 200);
    let reps = ep.replicates.unwrap_or(20);
    record_run(ctx, &cfg, reps);
    let d = diagnose_auto(&sys, &rownorm(&sys)?, RULE)?;
    if !d.guarantees_convergence() {
        return Err(Error::NoGuarantee(format!("lambda = {:?}", d.lambda)));
    }
    let (matched, rk, rkma) = rk_and_rkma(&sys, &cfg, reps)?;
    let dm = diagnose_auto(&matched, &rownorm(&matched)?, RULE)?;
    ctx.traces("rk_trace.csv", &rk, "method: rk (V = A)")?;
    ctx.traces("rkma_trace.csv", &rkma, "method: rkma")?;
    ctx.diagnostics(&[("rk", &dm), ("rkma", &d)])?;

    let gamma = d.gamma.unwrap_or(0.0);
    let e0_sq = sq(norm(sys.truth().unwrap_or(&[])));
    let floor = 2.0 * sq(gamma) / d.lambda;
    let c = ctx.comments(&[
        "sq_error_bound = (1 - lambda/2)^k e0^2 + 2 gamma^2 / lambda".into(),
        format!("lambda: {:?}", d.lambda),
        format!("gamma: {gamma:?}"),
        format!("e0_sq: {e0_sq:?}"),
    ]);
    let mut rows = Vec::with_capacity(rkma[0].logged_k.len());
    for &k in &rkma[0].logged_k {
        rows.push(format!("{k},{:?},{floor:?}", inconsistent_bound(k, d.lambda, gamma, e0_sq)?));
    }
    write_csv(&ctx.out.join("bound.csv"), &c, "k,sq_error_bound,floor", rows)?;
    ctx.summary(&[
        ("floor", num(floor)),
        ("fixed_point_error", opt(d.fixed_point_error)),
    ])
}

fn fig3(ep: &ExperimentParams, ctx: &mut Ctx) -> Result<()> {
    let (m, n, tau) = (ep.rows.unwrap_or(60), ep.cols.unwrap_or(300), ep.tau.unwrap_or(0.3));
    ctx.record("rows", m);
    ctx.record("cols", n);
    ctx.record("tau", tau);
    let sys = assemble_underdetermined(m, n, tau, ep.seed)?;
    let cfg = solver_cfg(ep, 100_000, 1000);
    let reps = ep.replicates.unwrap_or(3);
    record_run(ctx, &cfg, reps);
    let (matched, rk, rkma) = rk_and_rkma(&sys, &cfg, reps)?;
    let d = diagnose_auto(&sys, &rownorm(&sys)?, RULE)?;
    let dm = diagnose_auto(&matched, &rownorm(&matched)?, RULE)?;
    ctx.traces("rk_trace.csv", &rk, "method: rk (V = A)")?;
    ctx.traces("rkma_trace.csv", &rkma, "method: rkma")?;
    ctx.diagnostics(&[("rk", &dm), ("rkma", &d)])?;
    let truth = sys.truth().unwrap_or(&[]);
    rate_curves(ctx, &rkma[0].logged_k, &d, norm(truth))?;
    ctx.summary(&[("rk_plateau", num(range_defect(sys.a(), truth)?))])
}

fn ct(ep: &ExperimentParams, ctx: &mut Ctx) -> Result<()> {
    let grid = ep.grid.unwrap_or(32);
    ctx.record("grid", grid);
    ctx.record("ct_forward_row", ep.ct_forward_row);
    let (sys, dropped_zero, dropped_pairing) = ct_system(grid, ep.ct_forward_row, ep.seed)?;
    let m = sys.rows();
    let sweeps = ep.sweeps.unwrap_or(20);
    ctx.record("sweeps", sweeps);
    let cfg = solver_cfg(ep, sweeps * m, m);
    let reps = ep.replicates.unwrap_or(1);
    record_run(ctx, &cfg, reps);
    let (_, rk, rkma) = rk_and_rkma(&sys, &cfg, reps)?;
    ctx.traces("rk_trace.csv", &rk, "method: rk (V = A)")?;
    ctx.traces("rkma_trace.csv", &rkma, "method: rkma")?;
    let comments = ctx.comments(&[format!("image: {grid}x{grid}, row-major, row 0 at the top")]);
    save_vector(ctx.out.join("phantom.csv"), sys.truth().unwrap_or(&[]), &comments)?;
    save_vector(ctx.out.join("recon_rk.csv"), &rk[0].final_x, &comments)?;
    save_vector(ctx.out.join("recon_rkma.csv"), &rkma[0].final_x, &comments)?;
    if ep.ct_diagnostics {
        let matched = sys.matched()?;
        let d = diagnose_auto(&sys, &rownorm(&sys)?, RULE)?;
        let dm = diagnose_auto(&matched, &rownorm(&matched)?, RULE)?;
        ctx.diagnostics(&[("rk", &dm), ("rkma", &d)])?;
    }
    let final_rms = |t: &[Trace]| {
        (t.iter().map(|t| sq(*t.error_norms.last().unwrap_or(&0.0))).sum::<f64>() / t.len() as f64).sqrt()
    };
    let (erk, erkma) = (final_rms(&rk), final_rms(&rkma));
    ctx.summary(&[
        ("rows", m.to_string()),
        ("dropped_zero", dropped_zero.to_string()),
        ("dropped_pairing", dropped_pairing.to_string()),
        ("rk_final_error", num(erk)),
        ("rkma_final_error", num(erkma)),
        ("rkma_over_rk", num(erkma / erk)),
    ])
}

fn record_run(ctx: &mut Ctx, cfg: &SolverConfig, reps: usize) {
    ctx.record("iters", cfg.max_iterations);
    ctx.record("log_stride", cfg.log_stride);
    ctx.record("replicates", reps);
    ctx.manifest.push(("rule", RULE.to_string()));
}

/// First logged iteration with relative error at most `tol`; the run
/// length when it never gets there.
fn first_hit(t: &Trace, e0: f64, tol: f64) -> usize {
    t.logged_k
        .iter()
        .zip(&t.error_norms)
        .find(|(_, e)| **e <= tol * e0)
        .map(|(k, _)| *k)
        .unwrap_or_else(|| t.iterations())
}

fn table1(ep: &ExperimentParams, ctx: &mut Ctx) -> Result<()> {
    let (m, n) = (ep.rows.unwrap_or(150), ep.cols.unwrap_or(50));
    let zero_frac = ep.zero_frac.unwrap_or(0.05);
    ctx.record("rows", m);
    ctx.record("cols", n);
    ctx.record("zero_frac", zero_frac);
    let sys = assemble_scaled_for_probopt(m, n, zero_frac, ep.seed)?;
    let opt_iters = ep.opt_iters.unwrap_or(200);
    ctx.record("opt_iters", opt_iters);

    let optimize = |obj| optimize_probabilities(&sys, RULE, &ProbOptConfig::new(obj, opt_iters));
    let (opt_l, opt_n): (Result<ProbOptResult>, Result<ProbOptResult>) = rayon::join(
        || optimize(Objective::MaxLambdaMin),
        || optimize(Objective::MinSpectralNorm),
    );
    let (opt_l, opt_n) = (opt_l?, opt_n?);
    let choices = [
        ("uniform", ProbabilityScheme::Uniform.build(&sys)?),
        ("pairing", ProbabilityScheme::Pairing.build(&sys)?),
        ("opt-lambda", opt_l.best_p.clone()),
        ("opt-norm", opt_n.best_p.clone()),
    ];

    let cfg = solver_cfg(ep, 200_000, 50);
    let reps = ep.replicates.unwrap_or(5);
    record_run(ctx, &cfg, reps);
    let tol = 1e-6;
    let e0 = norm(sys.truth().unwrap_or(&[]));
    let rows: Vec<(RateDiagnostics, f64)> = choices
        .par_iter()
        .map(|(_, p)| {
            let d = diagnose_auto(&sys, p, RULE)?;
            let traces = run_replicates(&sys, p, &cfg, reps)?;
            let hits: usize = traces.iter().map(|t| first_hit(t, e0, tol)).sum();
            Ok((d, hits as f64 / reps as f64))
        })
        .collect::<Result<_>>()?;

    let c = ctx.comments(&[
        format!("iterations = mean first logged k with relative error <= {tol}, over {reps} runs"),
        format!("capped at {} iterations", cfg.max_iterations),
    ]);
    let body = choices.iter().zip(&rows).map(|((name, _), (d, hit))| {
        format!(
            "{name},{:?},{:?},{:?},{hit:?}",
            d.expected_improvement, d.norm_expectation, d.rho_asymptotic
        )
    });
    write_csv(
        &ctx.out.join("table1.csv"),
        &c,
        "probabilities,one_minus_lambda,norm,rho,iterations",
        body,
    )?;
    let diag: Vec<(&str, &RateDiagnostics)> =
        choices.iter().zip(&rows).map(|((name, _), (d, _))| (*name, d)).collect();
    ctx.diagnostics(&diag)?;
    for (tag, r) in [("lambda", &opt_l), ("norm", &opt_n)] {
        let c = ctx.comments(&[format!("objective: {tag}"), format!("best_objective: {:?}", r.best_objective)]);
        save_vector(ctx.out.join(format!("p_opt_{tag}.csv")), r.best_p.as_slice(), &c)?;
        let history = r.history_csv();
        let mut lines = history.lines();
        let header = lines.next().unwrap_or("iter,objective");
        write_csv(&ctx.out.join(format!("history_{tag}.csv")), &c, header, lines.map(String::from))?;
    }
    Ok(())
}
