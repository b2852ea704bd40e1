//! Convergence quantities of the mismatched iteration.
//!
//! With `D = diag(p_i w_i)` and `S = diag(w_i ||v_i||^2)` the expected step
//! is `E[x+ - x_hat] = (I - V^T D A)(x - x_hat)` and
//!
//! ```text
//! E||x+ - x_hat||^2 = ||e||^2 - <e, W e>,   W = V^T D A + A^T D V - A^T S D A
//! ```
//!
//! so `lambda = lambda_min(W)` is a per-step contraction constant for the
//! mean squared error, `rho(I - V^T D A)` the asymptotic rate of the mean
//! and `||I - V^T D A||` the per-step contraction of the mean's norm. For
//! underdetermined systems all three are taken on `range(V^T)` through an
//! orthonormal basis `Z`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{
    norm, orthonormal_range_basis, spectral_radius, symmetric_eig_min, top_singular_triplet,
    DenseMatrix, Lu,
};
use crate::sampling::ProbabilityVector;
use crate::solver::{StepRule, SystemPair};

/// Relative tolerance for the `||M||^2 = rho(M^T M)` cross-check.
pub const NORM_IDENTITY_TOLERANCE: f64 = 1e-6;

/// Diagonals of `D` and `S` plus the pairings `<a_i, v_i>`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingPair {
    pub d: Vec<f64>,
    pub s: Vec<f64>,
    pub pairing: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateDiagnostics {
    pub lambda: f64,
    pub rho_asymptotic: f64,
    pub norm_expectation: f64,
    pub expected_improvement: f64,
    pub gamma: Option<f64>,
    pub fixed_point_error: Option<f64>,
    pub positivity_ok: bool,
    pub restricted: bool,
}

impl RateDiagnostics {
    pub const CSV_HEADER: &'static str =
        "lambda,rho,norm,gamma,fixed_point_error,restricted,positivity_ok";

    /// Whether `lambda > 0` certifies linear convergence (it only does
    /// when every `p_i > 0`).
    pub fn guarantees_convergence(&self) -> bool {
        self.lambda > 0.0 && self.positivity_ok
    }

    /// The empirically observed `rho <= ||I - V^T D A|| <= 1 - lambda`.
    /// Unproven in general; reported, not enforced.
    pub fn conjectured_ordering_holds(&self) -> bool {
        self.rho_asymptotic <= self.norm_expectation + 1e-12
            && self.norm_expectation <= self.expected_improvement + 1e-12
    }

    pub fn to_csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_default();
        format!(
            "{:?},{:?},{:?},{},{},{},{}",
            self.lambda,
            self.rho_asymptotic,
            self.norm_expectation,
            opt(self.gamma),
            opt(self.fixed_point_error),
            self.restricted,
            self.positivity_ok
        )
    }

    /// Flat `key = value` report, one entry per line.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let opt = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_else(|| "none".into());
        let _ = writeln!(out, "lambda = {:?}", self.lambda);
        let _ = writeln!(out, "one_minus_lambda = {:?}", self.expected_improvement);
        let _ = writeln!(out, "rho = {:?}", self.rho_asymptotic);
        let _ = writeln!(out, "norm = {:?}", self.norm_expectation);
        let _ = writeln!(out, "gamma = {}", opt(self.gamma));
        let _ = writeln!(out, "fixed_point_error = {}", opt(self.fixed_point_error));
        let _ = writeln!(out, "restricted = {}", self.restricted);
        let _ = writeln!(out, "positivity_ok = {}", self.positivity_ok);
        let _ = writeln!(
            out,
            "conjectured_ordering = {}",
            self.conjectured_ordering_holds()
        );
        out
    }
}

fn check_lengths(sys: &SystemPair, p: &ProbabilityVector) -> Result<()> {
    if p.len() != sys.rows() {
        return Err(Error::Dimension(format!(
            "probability vector has length {}, expected {}",
            p.len(),
            sys.rows()
        )));
    }
    Ok(())
}

/// `D` and `S` for a static step rule.
pub fn scaling(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<ScalingPair> {
    check_lengths(sys, p)?;
    let m = sys.rows();
    let mut d = Vec::with_capacity(m);
    let mut s = Vec::with_capacity(m);
    for (i, &pi) in p.as_slice().iter().enumerate() {
        let w = rule.omega(sys, i).ok_or_else(|| {
            Error::UnsupportedRule(format!("{rule} has no iterate-independent step length"))
        })?;
        d.push(pi * w);
        s.push(w * sys.v_norms_sq()[i]);
    }
    Ok(ScalingPair {
        d,
        s,
        pairing: sys.pairing().to_vec(),
    })
}

/// `V^T D A` (n x n).
pub fn expected_step_operator(sys: &SystemPair, sc: &ScalingPair) -> DenseMatrix {
    sys.v().scale_rows(&sc.d).tr_matmul(sys.a())
}

/// `W = V^T D A + A^T D V - A^T S D A`, symmetrized.
pub fn contraction_matrix(sys: &SystemPair, sc: &ScalingPair) -> DenseMatrix {
    let k = expected_step_operator(sys, sc);
    let sd: Vec<f64> = sc.s.iter().zip(&sc.d).map(|(s, d)| s * d).collect();
    let quad = sys.a().scale_rows(&sd).tr_matmul(sys.a());
    k.add(&k.transpose()).sub(&quad).symmetrized()
}

/// `lambda_min(W)`.
pub fn contraction_lambda(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<f64> {
    let sc = scaling(sys, p, rule)?;
    Ok(symmetric_eig_min(&contraction_matrix(sys, &sc))?.0)
}

/// `rho(I - V^T D A)`.
pub fn asymptotic_rate(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<f64> {
    let sc = scaling(sys, p, rule)?;
    spectral_radius(&expected_step_operator(sys, &sc).identity_minus())
}

/// `||I - V^T D A||`, cross-checked against the spectral radius of
/// `(I - V^T D A)^T (I - V^T D A)` expanded as
/// `I - V^T D A - A^T D V + A^T D V V^T D A`.
pub fn expectation_norm(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<f64> {
    let sc = scaling(sys, p, rule)?;
    let k = expected_step_operator(sys, &sc);
    let sigma = top_singular_triplet(&k.identity_minus())?.sigma;

    let expanded = k.add(&k.transpose()).sub(&k.tr_matmul(&k)).identity_minus();
    let rho = spectral_radius(&expanded)?;
    let sq = sigma * sigma;
    // the expansion cancels against I, so its rounding is absolute
    if (sq - rho).abs() > NORM_IDENTITY_TOLERANCE * sq.max(rho).max(1.0) {
        return Err(Error::Numeric(format!(
            "||M||^2 = {sq} disagrees with rho(M^T M) = {rho}"
        )));
    }
    Ok(sigma)
}

/// `lambda_min(I - W)`; nonnegative up to rounding because `1 - <e, W e>`
/// is an expected squared norm for unit `e`.
pub fn psd_certificate(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<f64> {
    let sc = scaling(sys, p, rule)?;
    let w = contraction_matrix(sys, &sc);
    Ok(symmetric_eig_min(&w.identity_minus())?.0)
}

/// `gamma = max_i |r_i| ||v_i|| / |<a_i, v_i>|`.
pub fn noise_gamma(sys: &SystemPair) -> Result<f64> {
    let r = sys
        .noise()
        .ok_or_else(|| Error::Precondition("noise level needs a noise vector".into()))?;
    Ok(r.iter()
        .zip(sys.v_norms_sq())
        .zip(sys.pairing())
        .map(|((ri, vn), s)| ri.abs() * vn.sqrt() / s.abs())
        .fold(0.0, f64::max))
}

/// Upper bound on `E||x_k - x_hat||^2` for a noisy right-hand side:
/// `(1 - lambda/2)^k e0_sq + 2 gamma^2 / lambda`.
pub fn inconsistent_bound(k: usize, lambda: f64, gamma: f64, e0_sq: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::NoGuarantee(format!("lambda = {lambda} is not positive")));
    }
    if lambda > 1.0 {
        return Err(Error::Precondition(format!("lambda = {lambda} exceeds 1")));
    }
    let decay = (1.0 - lambda / 2.0).powf(k as f64);
    Ok(decay * e0_sq + 2.0 / lambda * gamma * gamma)
}

/// Limit of `E[x_k - x_hat]` for a noisy right-hand side:
/// `(V^T D A)^{-1} V^T D r`.
pub fn fixed_point_offset(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<Vec<f64>> {
    let r = sys
        .noise()
        .ok_or_else(|| Error::Precondition("fixed-point error needs a noise vector".into()))?;
    let sc = scaling(sys, p, rule)?;
    let k = expected_step_operator(sys, &sc);
    let dr: Vec<f64> = sc.d.iter().zip(r).map(|(d, r)| d * r).collect();
    let rhs = sys.v().tr_matvec(&dr);
    Ok(Lu::new(&k)?.solve(&rhs))
}

/// `||(V^T D A)^{-1} V^T D r||`.
pub fn expected_fixed_point_error(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<f64> {
    Ok(norm(&fixed_point_offset(sys, p, rule)?))
}

/// All unrestricted quantities.
pub fn diagnose(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<RateDiagnostics> {
    let lambda = contraction_lambda(sys, p, rule)?;
    let rho = asymptotic_rate(sys, p, rule)?;
    let nrm = expectation_norm(sys, p, rule)?;
    let (gamma, fixed_point_error) = match sys.noise() {
        Some(_) => (
            Some(noise_gamma(sys)?),
            match expected_fixed_point_error(sys, p, rule) {
                Ok(v) => Some(v),
                Err(Error::Singular(_)) => None,
                Err(e) => return Err(e),
            },
        ),
        None => (None, None),
    };
    debug_assert!(rho <= nrm + 1e-8, "rho {rho} exceeds norm {nrm}");
    Ok(RateDiagnostics {
        lambda,
        rho_asymptotic: rho,
        norm_expectation: nrm,
        expected_improvement: 1.0 - lambda,
        gamma,
        fixed_point_error,
        positivity_ok: p.positivity_ok(),
        restricted: false,
    })
}

/// Range basis `Z` of `V^T` after checking the hypotheses of the
/// underdetermined analysis: `m <= n`, full row rank, `A V^T` nonsingular.
pub fn restricted_basis(sys: &SystemPair) -> Result<DenseMatrix> {
    let (m, n) = (sys.rows(), sys.cols());
    if m > n {
        return Err(Error::Precondition(format!(
            "restricted analysis needs m <= n, got {m}x{n}"
        )));
    }
    let z = orthonormal_range_basis(&sys.v().transpose())?;
    if z.cols() < m {
        return Err(Error::RankDeficient(format!(
            "V has rank {} < {m} rows",
            z.cols()
        )));
    }
    let avt = sys.a().matmul(&sys.v().transpose());
    Lu::new(&avt).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!("A V^T: {msg}")),
        other => other,
    })?;
    Ok(z)
}

/// Quantities restricted to `range(V^T)`.
pub fn restricted_diagnostics(
    sys: &SystemPair,
    p: &ProbabilityVector,
    rule: StepRule,
) -> Result<RateDiagnostics> {
    let z = restricted_basis(sys)?;
    let sc = scaling(sys, p, rule)?;
    let w = contraction_matrix(sys, &sc);
    let wz = z.tr_matmul(&w.matmul(&z)).symmetrized();
    let lambda = symmetric_eig_min(&wz)?.0;

    let k = expected_step_operator(sys, &sc);
    let kz = z.tr_matmul(&k.matmul(&z));
    let mz = kz.identity_minus();
    let rho = spectral_radius(&mz)?;
    let nrm = top_singular_triplet(&mz)?.sigma;

    let (gamma, fixed_point_error) = match sys.noise() {
        Some(r) => {
            let dr: Vec<f64> = sc.d.iter().zip(r).map(|(d, r)| d * r).collect();
            let rhs = z.tr_matvec(&sys.v().tr_matvec(&dr));
            let fp = match Lu::new(&kz) {
                Ok(lu) => Some(norm(&lu.solve(&rhs))),
                Err(Error::Singular(_)) => None,
                Err(e) => return Err(e),
            };
            (Some(noise_gamma(sys)?), fp)
        }
        None => (None, None),
    };
    Ok(RateDiagnostics {
        lambda,
        rho_asymptotic: rho,
        norm_expectation: nrm,
        expected_improvement: 1.0 - lambda,
        gamma,
        fixed_point_error,
        positivity_ok: p.positivity_ok(),
        restricted: true,
    })
}

/// Restricted analysis for `m < n`, unrestricted otherwise.
pub fn diagnose_auto(sys: &SystemPair, p: &ProbabilityVector, rule: StepRule) -> Result<RateDiagnostics> {
    if sys.rows() < sys.cols() {
        restricted_diagnostics(sys, p, rule)
    } else {
        diagnose(sys, p, rule)
    }
}
