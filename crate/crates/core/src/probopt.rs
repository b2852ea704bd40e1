//! Tuning the row-selection probabilities.
//!
//! Two objectives over the simplex are supported: maximizing the concave
//! `p -> lambda_min(W(p))` by projected supergradient ascent, and
//! minimizing the convex `p -> ||I - V^T D(p) A||` by projected
//! subgradient descent. Both start from uniform probabilities and keep the
//! best iterate seen, since neither method is monotone.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;

use crate::diagnostics::{contraction_matrix, expected_step_operator, scaling};
use crate::error::{Error, Result};
use crate::linalg::{dot, symmetric_eigen, top_singular_triplet_with_next};
use crate::sampling::{ProbabilityVector, RngState};
use crate::solver::{StepRule, SystemPair};

/// Slack allowed in the subgradient inequality during sign validation.
pub const SUBGRADIENT_SLACK: f64 = 1e-8;

/// Random simplex probes used by sign validation.
pub const SIGN_PROBES: usize = 200;

const PROBE_SEED: u64 = 0x005e_ed0f_5167;

/// Relative gap under which an extremal eigen/singular value is treated as
/// repeated.
const DEGENERACY_GAP: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    MaxLambdaMin,
    MinSpectralNorm,
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(Objective::MaxLambdaMin),
            "norm" => Ok(Objective::MinSpectralNorm),
            other => Err(Error::InvalidInput(format!("unknown objective '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `t / sqrt(k + 1)`
    Diminishing(f64),
}

impl StepSchedule {
    pub fn step(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Constant(t) => t,
            StepSchedule::Diminishing(t) => t / ((k + 1) as f64).sqrt(),
        }
    }

    fn base(&self) -> f64 {
        match *self {
            StepSchedule::Constant(t) | StepSchedule::Diminishing(t) => t,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProbOptConfig {
    pub objective: Objective,
    pub iterations: usize,
    pub step_schedule: StepSchedule,
    pub record_history: bool,
}

impl ProbOptConfig {
    pub fn new(objective: Objective, iterations: usize) -> Self {
        ProbOptConfig {
            objective,
            iterations,
            step_schedule: StepSchedule::Diminishing(1.0),
            record_history: true,
        }
    }

    pub fn schedule(mut self, s: StepSchedule) -> Self {
        self.step_schedule = s;
        self
    }
}

#[derive(Clone, Debug)]
pub struct ProbOptResult {
    pub best_p: ProbabilityVector,
    pub best_objective: f64,
    /// `(iterate index, objective)`; empty unless history was requested.
    pub history: Vec<(usize, f64)>,
    pub objective_evals: Vec<f64>,
    /// Iterates at which the extremal eigen/singular value was repeated.
    pub degenerate_iterates: Vec<usize>,
    /// Sign applied to `(V q) . (A r) / <a, v>` for the norm objective.
    pub norm_sign: Option<f64>,
}

impl ProbOptResult {
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iter,objective\n");
        for (k, f) in &self.history {
            let _ = writeln!(out, "{k},{f:?}");
        }
        out
    }
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn project_simplex(y: &[f64]) -> ProbabilityVector {
    assert!(!y.is_empty(), "cannot project an empty vector");
    assert!(y.iter().all(|v| v.is_finite()), "non-finite input to simplex projection");
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    let p: Vec<f64> = y.iter().map(|v| (v - theta).max(0.0)).collect();
    ProbabilityVector::new(p.clone())
        .or_else(|_| ProbabilityVector::from_weights(&p))
        .expect("simplex projection produced an invalid distribution")
}

/// `lambda_min(W(p))`.
pub fn lambda_objective(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<f64> {
    crate::diagnostics::contraction_lambda(sys, p, rule)
}

/// `||I - V^T D(p) A||`.
pub fn norm_objective(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<f64> {
    let sc = scaling(sys, p, rule)?;
    let b = expected_step_operator(sys, &sc).identity_minus();
    Ok(top_singular_triplet_with_next(&b)?.0.sigma)
}

fn omegas(sys: &SystemPair, rule: StepRule) -> Result<Vec<f64>> {
    (0..sys.rows())
        .map(|i| {
            rule.omega(sys, i).ok_or_else(|| {
                Error::UnsupportedRule(format!("{rule} has no iterate-independent step length"))
            })
        })
        .collect()
}

struct Evaluation {
    value: f64,
    gradient: Vec<f64>,
    degenerate: bool,
}

fn eval_lambda(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<Evaluation> {
    let sc = scaling(sys, p, rule)?;
    let w = contraction_matrix(sys, &sc);
    let eig = symmetric_eigen(&w)?;
    let x = eig.vector(0);
    let ax = sys.a().matvec(&x);
    let vx = sys.v().matvec(&x);
    let om = omegas(sys, rule)?;
    let gradient = (0..sys.rows())
        .map(|i| om[i] * (2.0 * vx[i] - sc.s[i] * ax[i]) * ax[i])
        .collect();
    let scale = w.frobenius_norm().max(f64::MIN_POSITIVE);
    let degenerate = eig.values.len() > 1 && (eig.values[1] - eig.values[0]) <= DEGENERACY_GAP * scale;
    Ok(Evaluation {
        value: eig.values[0],
        gradient,
        degenerate,
    })
}

/// Supergradient of `p -> lambda_min(W(p))`:
/// `g_i = w_i <2 v_i - s_i a_i, x> <a_i, x>` with `x` a unit eigenvector of
/// the smallest eigenvalue and `s_i = w_i ||v_i||^2`.
pub fn supergradient_lambda(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<Vec<f64>> {
    Ok(eval_lambda(sys, p, rule)?.gradient)
}

/// `c_i = w_i (V q)_i (A r)_i` for the top singular pair
/// `(I - V^T D A) r = sigma q`. The subgradient of the norm is `-c`.
fn eval_norm_unsigned(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<Evaluation> {
    let sc = scaling(sys, p, rule)?;
    let b = expected_step_operator(sys, &sc).identity_minus();
    let (t, next) = top_singular_triplet_with_next(&b)?;
    let vq = sys.v().matvec(&t.left);
    let ar = sys.a().matvec(&t.right);
    let om = omegas(sys, rule)?;
    let gradient = (0..sys.rows()).map(|i| om[i] * vq[i] * ar[i]).collect();
    Ok(Evaluation {
        value: t.sigma,
        gradient,
        degenerate: b.cols() > 1 && t.sigma - next <= DEGENERACY_GAP * t.sigma.max(f64::MIN_POSITIVE),
    })
}

/// Uniform random point on the simplex.
pub fn random_simplex_point<R: Rng + ?Sized>(m: usize, rng: &mut R) -> ProbabilityVector {
    let e: Vec<f64> = (0..m)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    ProbabilityVector::from_weights(&e).expect("exponential weights are positive")
}

/// Chooses the sign of `c` that satisfies the subgradient inequality
/// `f(q) >= f(p) + <g, q - p> - SUBGRADIENT_SLACK` on random simplex
/// probes. Returns `-1.0` or `+1.0`.
pub fn validate_norm_sign(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<f64> {
    let base = eval_norm_unsigned(sys, p, rule)?;
    let mut rng = RngState::new(PROBE_SEED);
    let probes: Vec<(Vec<f64>, f64)> = (0..SIGN_PROBES)
        .map(|_| {
            let q = random_simplex_point(sys.rows(), &mut rng);
            let fq = norm_objective(sys, &q, rule)?;
            let diff: Vec<f64> = q.as_slice().iter().zip(p.as_slice()).map(|(a, b)| a - b).collect();
            Ok((diff, fq))
        })
        .collect::<Result<_>>()?;

    for sign in [-1.0, 1.0] {
        let ok = probes.iter().all(|(diff, fq)| {
            let lin = sign * dot(&base.gradient, diff);
            *fq >= base.value + lin - SUBGRADIENT_SLACK
        });
        if ok {
            return Ok(sign);
        }
    }
    Err(Error::Degenerate(
        "neither sign satisfies the subgradient inequality (repeated top singular value?)".into(),
    ))
}

/// Sign-validated subgradient of `p -> ||I - V^T D(p) A||`.
pub fn subgradient_norm(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<Vec<f64>> {
    let sign = validate_norm_sign(sys, p, rule)?;
    let base = eval_norm_unsigned(sys, p, rule)?;
    Ok(base.gradient.into_iter().map(|g| sign * g).collect())
}

/// Projected super/subgradient optimization from uniform probabilities.
pub fn optimize_probabilities(
    sys: &SystemPair,
    rule: StepRule,
    cfg: &ProbOptConfig,
) -> Result<ProbOptResult> {
    let m = sys.rows();
    if m < 2 {
        return Err(Error::Precondition("probability optimization needs m >= 2".into()));
    }
    if cfg.iterations == 0 {
        return Err(Error::InvalidInput("iterations must be at least 1".into()));
    }
    if !(cfg.step_schedule.base() > 0.0) {
        return Err(Error::InvalidInput("step size must be positive".into()));
    }

    let mut p = ProbabilityVector::uniform(m);
    let norm_sign = match cfg.objective {
        Objective::MinSpectralNorm => Some(validate_norm_sign(sys, &p, rule)?),
        Objective::MaxLambdaMin => None,
    };

    let better = |new: f64, old: f64| match cfg.objective {
        Objective::MaxLambdaMin => new > old,
        Objective::MinSpectralNorm => new < old,
    };

    let mut best_p = p.clone();
    let mut best_objective = f64::NAN;
    let mut history = Vec::new();
    let mut objective_evals = Vec::with_capacity(cfg.iterations + 1);
    let mut degenerate_iterates = Vec::new();

    for k in 0..=cfg.iterations {
        let ev = match cfg.objective {
            Objective::MaxLambdaMin => eval_lambda(sys, &p, rule)?,
            Objective::MinSpectralNorm => eval_norm_unsigned(sys, &p, rule)?,
        };
        objective_evals.push(ev.value);
        if cfg.record_history {
            history.push((k, ev.value));
        }
        if ev.degenerate {
            degenerate_iterates.push(k);
        }
        if best_objective.is_nan() || better(ev.value, best_objective) {
            best_objective = ev.value;
            best_p = p.clone();
        }
        if k == cfg.iterations {
            break;
        }
        let t = cfg.step_schedule.step(k);
        // ascent on lambda; descent along the signed subgradient for the norm
        let direction = match (cfg.objective, norm_sign) {
            (Objective::MaxLambdaMin, _) => 1.0,
            (Objective::MinSpectralNorm, Some(sign)) => -sign,
            (Objective::MinSpectralNorm, None) => unreachable!(),
        };
        let y: Vec<f64> = p
            .as_slice()
            .iter()
            .zip(&ev.gradient)
            .map(|(pi, gi)| pi + direction * t * gi)
            .collect();
        p = project_simplex(&y);
    }

    Ok(ProbOptResult {
        best_p,
        best_objective,
        history,
        objective_evals,
        degenerate_iterates,
        norm_sign,
    })
}
