use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rkma::diagnostics::diagnose_auto;
use rkma::io::{load_vector, save_vector};
use rkma::probopt::{optimize_probabilities, Objective, ProbOptConfig, StepSchedule};
use rkma::problems::{
    assemble_inconsistent, assemble_scaled_for_probopt, assemble_underdetermined,
    ct_mismatch_pair_at, gen_gaussian, mismatch_threshold, smooth_phantom, ProbabilityScheme,
    ScanGeometry,
};
use rkma::solver::run;
use rkma::{Error, ProbabilityVector, RateDiagnostics, Result, SolverConfig, StepRule, SystemPair};

use crate::output::{
    ensure_dir, load_system, num, save_system, trace_rows, write_csv, write_manifest, Provenance,
    TRACE_HEADER,
};

/// Where row probabilities come from: a named scheme or `file:PATH`.
#[derive(Clone, Debug)]
pub enum PSource {
    Scheme(ProbabilityScheme),
    File(PathBuf),
}

impl FromStr for PSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("file:") {
            Some(path) if !path.is_empty() => Ok(PSource::File(path.into())),
            Some(_) => Err(Error::InvalidInput("file: needs a path".into())),
            None => s.parse().map(PSource::Scheme),
        }
    }
}

impl fmt::Display for PSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PSource::Scheme(s) => write!(f, "{s}"),
            PSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl PSource {
    pub fn resolve(&self, sys: &SystemPair) -> Result<ProbabilityVector> {
        let p = match self {
            PSource::Scheme(s) => s.build(sys)?,
            PSource::File(path) => ProbabilityVector::new(load_vector(path)?)?,
        };
        if p.len() != sys.rows() {
            return Err(Error::Dimension(format!(
                "{} probabilities for {} rows",
                p.len(),
                sys.rows()
            )));
        }
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    /// Gaussian A, V = A thresholded at tau, optional noise.
    Gaussian,
    /// Wide Gaussian system with its solution in range(V^T).
    Underdetermined,
    /// Rows with decaying norms and sparsified V.
    Probopt,
    /// Parallel-beam CT pair with a smooth phantom.
    Ct,
}

#[derive(Clone, Debug)]
pub struct GenerateParams {
    pub kind: Kind,
    pub rows: usize,
    pub cols: usize,
    pub tau: f64,
    pub noise: f64,
    pub zero_frac: f64,
    pub grid: usize,
    pub ct_forward_row: usize,
    pub seed: u64,
}

pub fn build_system(g: &GenerateParams) -> Result<SystemPair> {
    match g.kind {
        Kind::Gaussian => {
            let a = gen_gaussian(g.rows, g.cols, g.seed)?;
            let v = mismatch_threshold(&a, g.tau)?;
            assemble_inconsistent(a, v, g.noise, g.seed)
        }
        Kind::Underdetermined => assemble_underdetermined(g.rows, g.cols, g.tau, g.seed),
        Kind::Probopt => assemble_scaled_for_probopt(g.rows, g.cols, g.zero_frac, g.seed),
        Kind::Ct => Ok(ct_system(g.grid, g.ct_forward_row, g.seed)?.0),
    }
}

/// CT pair at `grid` plus the number of rays that survived.
pub fn ct_system(grid: usize, forward: usize, seed: u64) -> Result<(SystemPair, usize, usize)> {
    let geometry = ScanGeometry::standard(grid);
    let full = geometry.matrix()?;
    let x = smooth_phantom(grid, seed)?;
    let b = full.matvec(&x);
    let pair = ct_mismatch_pair_at(&full, &b, Some(x), forward)?;
    Ok((pair.system, pair.dropped_zero, pair.dropped_pairing))
}

pub fn generate(g: &GenerateParams, out: &Path) -> Result<()> {
    let prov = Provenance::new(Some(g.seed));
    let sys = build_system(g)?;
    let files = save_system(out, &sys, prov.lines())?;
    let kind = match g.kind {
        Kind::Gaussian => "gaussian",
        Kind::Underdetermined => "underdetermined",
        Kind::Probopt => "probopt",
        Kind::Ct => "ct",
    };
    let mut entries = vec![("kind", kind.to_string())];
    match g.kind {
        Kind::Gaussian => {
            entries.push(("tau", num(g.tau)));
            entries.push(("noise", num(g.noise)));
        }
        Kind::Underdetermined => entries.push(("tau", num(g.tau))),
        Kind::Probopt => entries.push(("zero_frac", num(g.zero_frac))),
        Kind::Ct => {
            entries.push(("grid", g.grid.to_string()));
            entries.push(("ct_forward_row", g.ct_forward_row.to_string()));
        }
    }
    entries.push(("rows", sys.rows().to_string()));
    entries.push(("cols", sys.cols().to_string()));
    entries.push(("seed", g.seed.to_string()));
    entries.push(("files", files.join(" ")));
    write_manifest(out, &prov, &entries)?;
    println!("wrote {}x{} {kind} system to {}", sys.rows(), sys.cols(), out.display());
    Ok(())
}

/// Returns the process exit code: 0, or 3 when `lambda` gives no guarantee.
pub fn diagnose(system_dir: &Path, p: &PSource, rule: StepRule, out: &Path) -> Result<i32> {
    let prov = Provenance::new(None);
    let sys = load_system(system_dir)?;
    let probs = p.resolve(&sys)?;
    let d = diagnose_auto(&sys, &probs, rule)?;
    ensure_dir(out)?;
    let comments = prov.with([format!("p: {p}"), format!("rule: {rule}")]);
    write_csv(
        &out.join("diagnostics.csv"),
        &comments,
        RateDiagnostics::CSV_HEADER,
        [d.to_csv_row()],
    )?;
    println!("{}", RateDiagnostics::CSV_HEADER);
    println!("{}", d.to_csv_row());
    print!("{}", d.to_key_value());
    if d.guarantees_convergence() {
        Ok(0)
    } else {
        eprintln!("warning: lambda = {:?} gives no convergence guarantee", d.lambda);
        Ok(Error::NoGuarantee(String::new()).exit_code())
    }
}

#[derive(Clone, Debug)]
pub struct SolveParams {
    pub p: PSource,
    pub rule: StepRule,
    pub iters: usize,
    pub log_stride: usize,
    pub seed: u64,
    pub tol: f64,
}

pub fn solve(system_dir: &Path, s: &SolveParams, out: &Path) -> Result<()> {
    let prov = Provenance::new(Some(s.seed));
    let sys = load_system(system_dir)?;
    let probs = s.p.resolve(&sys)?;
    let cfg = SolverConfig::new(s.iters)
        .rule(s.rule)
        .log_stride(s.log_stride)
        .seed(s.seed)
        .residual_tolerance(s.tol);
    let t = run(&sys, &probs, &cfg)?;
    ensure_dir(out)?;
    let comments = prov.with([
        format!("system: {}x{}", sys.rows(), sys.cols()),
        format!("p: {}", s.p),
        format!("rule: {}", s.rule),
        format!("iters: {}", s.iters),
        format!("log_stride: {}", s.log_stride),
        format!("tol: {:?}", s.tol),
        format!("stopped_early: {}", t.stopped_early),
    ]);
    write_csv(&out.join("trace.csv"), &comments, TRACE_HEADER, trace_rows(&t))?;
    save_vector(out.join("x.csv"), &t.final_x, prov.lines())?;
    let last = t.logged_k.len() - 1;
    println!(
        "k = {}, error_norm = {}, residual_norm = {:?}",
        t.logged_k[last],
        t.error_norms.get(last).map(|e| num(*e)).unwrap_or_else(|| "unknown".into()),
        t.residual_norms[last]
    );
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Schedule {
    /// Fixed step length.
    Const,
    /// Step length divided by sqrt(k + 1).
    Sqrt,
}

impl Schedule {
    pub fn with_step(self, t: f64) -> StepSchedule {
        match self {
            Schedule::Const => StepSchedule::Constant(t),
            Schedule::Sqrt => StepSchedule::Diminishing(t),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizeParams {
    pub objective: Objective,
    pub rule: StepRule,
    pub iters: usize,
    pub step: f64,
    pub schedule: Schedule,
}

pub fn optimize(system_dir: &Path, o: &OptimizeParams, out: &Path) -> Result<()> {
    let prov = Provenance::new(None);
    let sys = load_system(system_dir)?;
    let cfg = ProbOptConfig::new(o.objective, o.iters).schedule(o.schedule.with_step(o.step));
    let r = optimize_probabilities(&sys, o.rule, &cfg)?;
    ensure_dir(out)?;
    let objective = match o.objective {
        Objective::MaxLambdaMin => "lambda",
        Objective::MinSpectralNorm => "norm",
    };
    let comments = prov.with([
        format!("objective: {objective}"),
        format!("rule: {}", o.rule),
        format!("iters: {}", o.iters),
        format!("step: {:?}", o.step),
        format!("schedule: {:?}", o.schedule).to_lowercase(),
        format!("best_objective: {:?}", r.best_objective),
    ]);
    save_vector(out.join("p_opt.csv"), r.best_p.as_slice(), &comments)?;
    let history = r.history_csv();
    let mut lines = history.lines();
    let header = lines.next().unwrap_or("iter,objective");
    write_csv(&out.join("history.csv"), &comments, header, lines.map(String::from))?;
    println!("best {objective} = {:?}", r.best_objective);
    if let Some(s) = r.norm_sign {
        println!("norm subgradient sign = {s}");
    }
    Ok(())
}
