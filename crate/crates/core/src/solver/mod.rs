//! The randomized Kaczmarz iteration with mismatched adjoint.
//!
//! Each step draws a row `i` with probability `p_i` and moves along `v_i`
//! (instead of `a_i`) until the `i`-th equation is satisfied:
//!
//! ```text
//! x+ = x - w_i (<a_i, x> - beta_i) v_i,     w_i = 1 / <a_i, v_i>
//! ```
//!
//! Other step rules from [`StepRule`] are supported. Only logged iterates
//! are kept, so memory is `O(n + logged points)`.

mod system;

pub use system::{StepRule, SystemPair, CONSISTENCY_TOLERANCE, PAIRING_TOLERANCE};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{axpy, distance, dot, norm};
use crate::sampling::{derive_replicate_rng, DiscreteSampler, ProbabilityVector, RngState};

/// Residual magnitude under which the adaptive rule takes no step.
pub const ADAPTIVE_DEGENERACY: f64 = 1e-14;

/// Starting point of a run.
#[derive(Clone, Debug, PartialEq)]
pub enum Start {
    Zero,
    Given(Vec<f64>),
    /// `x_0 = V^T c` for the given coefficients `c`.
    RangeOfVTranspose(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub rule: StepRule,
    pub max_iterations: usize,
    pub log_stride: usize,
    pub seed: u64,
    /// Relative residual for early stopping; 0 disables it.
    pub residual_tolerance: f64,
    pub start: Start,
}

impl SolverConfig {
    pub fn new(max_iterations: usize) -> Self {
        SolverConfig {
            rule: StepRule::ObliqueExact,
            max_iterations,
            log_stride: 1,
            seed: 0,
            residual_tolerance: 0.0,
            start: Start::Zero,
        }
    }

    pub fn rule(mut self, rule: StepRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn log_stride(mut self, stride: usize) -> Self {
        self.log_stride = stride;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn residual_tolerance(mut self, tol: f64) -> Self {
        self.residual_tolerance = tol;
        self
    }

    pub fn start(mut self, start: Start) -> Self {
        self.start = start;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be at least 1".into()));
        }
        if self.log_stride == 0 {
            return Err(Error::InvalidInput("log_stride must be at least 1".into()));
        }
        if !(self.residual_tolerance >= 0.0) {
            return Err(Error::InvalidInput("residual_tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Logged history of one run.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub logged_k: Vec<usize>,
    /// `||x_k - x_hat||`; empty when the solution is unknown.
    pub error_norms: Vec<f64>,
    /// `||A x_k - (b + r)||`
    pub residual_norms: Vec<f64>,
    pub final_x: Vec<f64>,
    pub rows_visited: Vec<usize>,
    pub stopped_early: bool,
}

impl Trace {
    pub fn iterations(&self) -> usize {
        self.logged_k.last().copied().unwrap_or(0)
    }
}

/// Applies one step in place. Returns the step coefficient
/// `w_i (<a_i, x> - beta_i)`.
pub fn step_in_place(sys: &SystemPair, x: &mut [f64], i: usize, rule: StepRule) -> Result<f64> {
    if i >= sys.rows() {
        return Err(Error::InvalidInput(format!(
            "row index {i} out of range for {} rows",
            sys.rows()
        )));
    }
    if x.len() != sys.cols() {
        return Err(Error::Dimension(format!(
            "iterate has length {}, expected {}",
            x.len(),
            sys.cols()
        )));
    }
    let beta = sys.rhs()[i];
    let a = sys.a().row(i);
    let v = sys.v().row(i);
    let res = dot(a, x) - beta;
    let coef = match rule.omega(sys, i) {
        Some(w) => w * res,
        None => {
            if res.abs() <= ADAPTIVE_DEGENERACY {
                0.0
            } else {
                (dot(v, x) - beta) / sys.v_norms_sq()[i]
            }
        }
    };
    if !coef.is_finite() {
        return Err(Error::Numeric(format!("non-finite step coefficient at row {i}")));
    }
    axpy(-coef, v, x);
    Ok(coef)
}

/// One step from `x` along row `i`.
pub fn rkma_step(sys: &SystemPair, x: &[f64], i: usize, rule: StepRule) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    step_in_place(sys, &mut out, i, rule)?;
    Ok(out)
}

fn starting_point(sys: &SystemPair, start: &Start) -> Result<Vec<f64>> {
    let n = sys.cols();
    match start {
        Start::Zero => Ok(vec![0.0; n]),
        Start::Given(x) => {
            if x.len() != n {
                return Err(Error::Dimension(format!(
                    "start vector has length {}, expected {n}",
                    x.len()
                )));
            }
            Ok(x.clone())
        }
        Start::RangeOfVTranspose(c) => {
            if c.len() != sys.rows() {
                return Err(Error::Dimension(format!(
                    "range coefficients have length {}, expected {}",
                    c.len(),
                    sys.rows()
                )));
            }
            Ok(sys.v().tr_matvec(c))
        }
    }
}

/// Runs the iteration with a fresh stream seeded by `cfg.seed`.
pub fn run(sys: &SystemPair, p: &ProbabilityVector, cfg: &SolverConfig) -> Result<Trace> {
    let mut rng = RngState::new(cfg.seed);
    run_observed(sys, p, cfg, &mut rng, |_, _| {})
}

/// Runs replicate `id` on the stream derived from `(cfg.seed, id)`.
pub fn run_replicate(
    sys: &SystemPair,
    p: &ProbabilityVector,
    cfg: &SolverConfig,
    id: u64,
) -> Result<Trace> {
    let mut rng = derive_replicate_rng(cfg.seed, id);
    run_observed(sys, p, cfg, &mut rng, |_, _| {})
}

/// Independent replicates `0..count`, run in parallel. Output order is
/// the replicate order.
pub fn run_replicates(
    sys: &SystemPair,
    p: &ProbabilityVector,
    cfg: &SolverConfig,
    count: usize,
) -> Result<Vec<Trace>> {
    (0..count as u64)
        .into_par_iter()
        .map(|id| run_replicate(sys, p, cfg, id))
        .collect()
}

/// Runs the iteration, calling `observe(k, x_k)` at every logged point.
///
/// Iteration 0, every multiple of `log_stride` and the final iterate are
/// logged. The early-stopping residual test is evaluated at logged
/// points.
pub fn run_observed<F>(
    sys: &SystemPair,
    p: &ProbabilityVector,
    cfg: &SolverConfig,
    rng: &mut RngState,
    mut observe: F,
) -> Result<Trace>
where
    F: FnMut(usize, &[f64]),
{
    cfg.validate()?;
    if p.len() != sys.rows() {
        return Err(Error::Dimension(format!(
            "probability vector has length {}, expected {}",
            p.len(),
            sys.rows()
        )));
    }
    let sampler = DiscreteSampler::new(p)?;
    let mut x = starting_point(sys, &cfg.start)?;
    let rhs_norm = norm(sys.rhs());
    let mut trace = Trace {
        rows_visited: vec![0; sys.rows()],
        ..Trace::default()
    };

    let mut log = |k: usize, x: &[f64], trace: &mut Trace| -> Result<bool> {
        let res = sys.residual_norm(x);
        if !res.is_finite() {
            return Err(Error::Numeric(format!("iterate diverged at step {k}")));
        }
        trace.logged_k.push(k);
        trace.residual_norms.push(res);
        if let Some(t) = sys.truth() {
            trace.error_norms.push(distance(x, t));
        }
        observe(k, x);
        Ok(cfg.residual_tolerance > 0.0 && res <= cfg.residual_tolerance * rhs_norm)
    };

    let mut converged = log(0, &x, &mut trace)?;
    let mut k = 0;
    while !converged && k < cfg.max_iterations {
        let i = sampler.draw(rng);
        trace.rows_visited[i] += 1;
        step_in_place(sys, &mut x, i, cfg.rule)?;
        k += 1;
        if k % cfg.log_stride == 0 || k == cfg.max_iterations {
            converged = log(k, &x, &mut trace)?;
        }
    }
    trace.stopped_early = converged && k < cfg.max_iterations;
    trace.final_x = x;
    Ok(trace)
}

/// Exact one-step expectation by summation over all rows: returns
/// `E[x+]` and `E||x+ - x_hat||^2`.
pub fn exact_one_step_expectation(
    sys: &SystemPair,
    x: &[f64],
    p: &ProbabilityVector,
    rule: StepRule,
) -> Result<(Vec<f64>, f64)> {
    let truth = sys
        .truth()
        .ok_or_else(|| Error::Precondition("exact expectation needs the true solution".into()))?;
    if p.len() != sys.rows() {
        return Err(Error::Dimension(format!(
            "probability vector has length {}, expected {}",
            p.len(),
            sys.rows()
        )));
    }
    let mut mean = vec![0.0; sys.cols()];
    let mut mean_sq = 0.0;
    for (i, &pi) in p.as_slice().iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        let next = rkma_step(sys, x, i, rule)?;
        axpy(pi, &next, &mut mean);
        mean_sq += pi * distance(&next, truth).powi(2);
    }
    Ok((mean, mean_sq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn pair(a: Vec<Vec<f64>>, v: Vec<Vec<f64>>, b: Vec<f64>) -> SystemPair {
        SystemPair::new(
            DenseMatrix::from_rows(&a).unwrap(),
            DenseMatrix::from_rows(&v).unwrap(),
            b,
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn oblique_step_lands_on_hyperplane() {
        let sys = pair(vec![vec![1.0, 0.0]], vec![vec![1.0, 1.0]], vec![2.0]);
        let x = rkma_step(&sys, &[0.0, 0.0], 0, StepRule::ObliqueExact).unwrap();
        assert_eq!(x, vec![2.0, 2.0]);
        assert_eq!(dot(sys.a().row(0), &x), 2.0);
    }

    #[test]
    fn matched_step_is_orthogonal_projection() {
        let sys = pair(vec![vec![0.0, 3.0]], vec![vec![0.0, 3.0]], vec![3.0]);
        let x = rkma_step(&sys, &[5.0, 0.0], 0, StepRule::ObliqueExact).unwrap();
        assert_eq!(x, vec![5.0, 1.0]);
    }

    #[test]
    fn fixed_point_on_hyperplane() {
        let sys = pair(vec![vec![1.0, 2.0]], vec![vec![1.0, 1.0]], vec![5.0]);
        let x = rkma_step(&sys, &[1.0, 2.0], 0, StepRule::ObliqueExact).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn adaptive_rule_lands_on_v_hyperplane() {
        let sys = pair(vec![vec![1.0, 0.0]], vec![vec![1.0, 1.0]], vec![2.0]);
        let x = rkma_step(&sys, &[0.0, 0.0], 0, StepRule::AdaptiveVHyperplane).unwrap();
        assert!((dot(sys.v().row(0), &x) - 2.0).abs() < 1e-15);
        // already on the a-hyperplane: no step
        let y = rkma_step(&sys, &[2.0, 7.0], 0, StepRule::AdaptiveVHyperplane).unwrap();
        assert_eq!(y, vec![2.0, 7.0]);
    }

    #[test]
    fn other_static_rules() {
        let sys = pair(vec![vec![2.0, 0.0]], vec![vec![1.0, 1.0]], vec![2.0]);
        // residual = -2
        let x = rkma_step(&sys, &[0.0, 0.0], 0, StepRule::InverseRowNormA).unwrap();
        assert_eq!(x, vec![0.5, 0.5]);
        let x = rkma_step(&sys, &[0.0, 0.0], 0, StepRule::InverseRowNormV).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
    }

    #[test]
    fn index_out_of_range() {
        let sys = pair(vec![vec![1.0, 0.0]], vec![vec![1.0, 1.0]], vec![2.0]);
        assert!(rkma_step(&sys, &[0.0, 0.0], 1, StepRule::ObliqueExact).is_err());
    }

    #[test]
    fn identity_system_solves_exactly() {
        let a = DenseMatrix::identity(2);
        let sys = SystemPair::consistent(a.clone(), a, vec![1.0, 1.0]).unwrap();
        let trace = run(&sys, &ProbabilityVector::uniform(2), &SolverConfig::new(50).seed(3)).unwrap();
        assert!(*trace.error_norms.last().unwrap() <= 1e-12);
        assert_eq!(trace.rows_visited.iter().sum::<usize>(), 50);
    }

    #[test]
    fn logging_schedule() {
        let a = DenseMatrix::identity(3);
        let sys = SystemPair::consistent(a.clone(), a, vec![1.0, 2.0, 3.0]).unwrap();
        let p = ProbabilityVector::uniform(3);
        let t = run(&sys, &p, &SolverConfig::new(10).log_stride(3)).unwrap();
        assert_eq!(t.logged_k, vec![0, 3, 6, 9, 10]);
        let t = run(&sys, &p, &SolverConfig::new(10).log_stride(5)).unwrap();
        assert_eq!(t.logged_k, vec![0, 5, 10]);
        assert_eq!(t.error_norms.len(), t.residual_norms.len());
    }

    #[test]
    fn early_stop_on_residual() {
        let a = DenseMatrix::identity(2);
        let sys = SystemPair::consistent(a.clone(), a, vec![1.0, 1.0]).unwrap();
        let cfg = SolverConfig::new(10_000).residual_tolerance(1e-10);
        let t = run(&sys, &ProbabilityVector::uniform(2), &cfg).unwrap();
        assert!(t.stopped_early);
        assert!(t.iterations() < 10_000);
    }

    #[test]
    fn runs_are_deterministic() {
        let a = DenseMatrix::from_fn(4, 2, |i, j| 1.0 + (i + 3 * j) as f64);
        let v = a.scaled(1.0);
        let sys = SystemPair::consistent(a, v, vec![1.0, -1.0]).unwrap();
        let p = ProbabilityVector::uniform(4);
        let cfg = SolverConfig::new(100).seed(11).log_stride(7);
        let t1 = run(&sys, &p, &cfg).unwrap();
        let t2 = run(&sys, &p, &cfg).unwrap();
        assert_eq!(t1.final_x, t2.final_x);
        assert_eq!(t1.error_norms, t2.error_norms);
    }

    #[test]
    fn range_start() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0, 1.0]]).unwrap();
        let sys = SystemPair::new(a.clone(), a, vec![1.0], None, None).unwrap();
        let cfg = SolverConfig::new(1).start(Start::RangeOfVTranspose(vec![2.0]));
        let t = run(&sys, &ProbabilityVector::uniform(1), &cfg).unwrap();
        assert_eq!(t.final_x, vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn expectation_closed_form() {
        let a = DenseMatrix::identity(2);
        let sys = SystemPair::consistent(a.clone(), a, vec![0.0, 0.0]).unwrap();
        let p = ProbabilityVector::uniform(2);
        let (mean, msq) = exact_one_step_expectation(&sys, &[1.0, 0.0], &p, StepRule::ObliqueExact).unwrap();
        assert_eq!(mean, vec![0.5, 0.0]);
        assert_eq!(msq, 0.5);
        let (mean, msq) = exact_one_step_expectation(&sys, &[0.0, 0.0], &p, StepRule::ObliqueExact).unwrap();
        assert_eq!(mean, vec![0.0, 0.0]);
        assert_eq!(msq, 0.0);
    }

    #[test]
    fn expectation_needs_truth() {
        let sys = pair(vec![vec![1.0, 0.0]], vec![vec![1.0, 1.0]], vec![2.0]);
        let err = exact_one_step_expectation(&sys, &[0.0, 0.0], &ProbabilityVector::uniform(1), StepRule::ObliqueExact);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }
}
