use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{check_finite, dot, norm, DenseMatrix};

/// Pairings `|<a_i, v_i>|` at or below this multiple of `||a_i|| ||v_i||`
/// are rejected.
pub const PAIRING_TOLERANCE: f64 = 1e-12;

/// Relative residual allowed for a declared solution of a noise-free
/// system.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-8;

/// A problem instance: forward matrix `A`, mismatched adjoint rows `V`,
/// consistent right-hand side `b`, optional additive noise `r` (the
/// iteration then uses `b + r`) and optional known solution.
#[derive(Clone, Debug)]
pub struct SystemPair {
    a: DenseMatrix,
    v: DenseMatrix,
    b: Vec<f64>,
    noise: Option<Vec<f64>>,
    truth: Option<Vec<f64>>,
    rhs: Vec<f64>,
    pairing: Vec<f64>,
    a_norms_sq: Vec<f64>,
    v_norms_sq: Vec<f64>,
    flipped: Vec<usize>,
}

impl SystemPair {
    /// Validates and assembles an instance. Rows of `V` with a negative
    /// pairing `<a_i, v_i>` are negated; near-orthogonal pairs are
    /// rejected with the offending row indices.
    pub fn new(
        a: DenseMatrix,
        mut v: DenseMatrix,
        b: Vec<f64>,
        noise: Option<Vec<f64>>,
        truth: Option<Vec<f64>>,
    ) -> Result<Self> {
        let (m, n) = a.shape();
        if v.shape() != (m, n) {
            return Err(Error::Dimension(format!(
                "A is {m}x{n} but V is {}x{}",
                v.rows(),
                v.cols()
            )));
        }
        if !a.is_finite() || !v.is_finite() {
            return Err(Error::InvalidInput("A or V has non-finite entries".into()));
        }
        if b.len() != m {
            return Err(Error::Dimension(format!("b has length {}, expected {m}", b.len())));
        }
        check_finite(&b, "b")?;
        if let Some(r) = &noise {
            if r.len() != m {
                return Err(Error::Dimension(format!("r has length {}, expected {m}", r.len())));
            }
            check_finite(r, "r")?;
        }
        if let Some(x) = &truth {
            if x.len() != n {
                return Err(Error::Dimension(format!(
                    "solution has length {}, expected {n}",
                    x.len()
                )));
            }
            check_finite(x, "solution")?;
        }

        let mut pairing = Vec::with_capacity(m);
        let mut flipped = Vec::new();
        let mut degenerate = Vec::new();
        for i in 0..m {
            let na = norm(a.row(i));
            let nv = norm(v.row(i));
            let mut s = dot(a.row(i), v.row(i));
            if s.abs() <= PAIRING_TOLERANCE * na * nv || na == 0.0 || nv == 0.0 {
                degenerate.push(i);
                continue;
            }
            if s < 0.0 {
                v.row_mut(i).iter_mut().for_each(|x| *x = -*x);
                s = -s;
                flipped.push(i);
            }
            pairing.push(s);
        }
        if !degenerate.is_empty() {
            let shown: Vec<String> = degenerate.iter().take(10).map(|i| i.to_string()).collect();
            return Err(Error::InvalidInput(format!(
                "{} row(s) with <a_i, v_i> ~ 0: {}{}",
                degenerate.len(),
                shown.join(", "),
                if degenerate.len() > 10 { ", ..." } else { "" }
            )));
        }

        if let (Some(x), None) = (&truth, &noise) {
            let res = norm(&crate::linalg::sub(&a.matvec(x), &b));
            if res > CONSISTENCY_TOLERANCE * norm(&b) {
                return Err(Error::InvalidInput(format!(
                    "declared solution has residual {res:e} (||b|| = {:e})",
                    norm(&b)
                )));
            }
        }

        let rhs = match &noise {
            Some(r) => b.iter().zip(r).map(|(x, y)| x + y).collect(),
            None => b.clone(),
        };
        let a_norms_sq = (0..m).map(|i| dot(a.row(i), a.row(i))).collect();
        let v_norms_sq = (0..m).map(|i| dot(v.row(i), v.row(i))).collect();
        Ok(SystemPair {
            a,
            v,
            b,
            noise,
            truth,
            rhs,
            pairing,
            a_norms_sq,
            v_norms_sq,
            flipped,
        })
    }

    /// Consistent instance `b = A x_hat`.
    pub fn consistent(a: DenseMatrix, v: DenseMatrix, truth: Vec<f64>) -> Result<Self> {
        let b = a.matvec(&truth);
        Self::new(a, v, b, None, Some(truth))
    }

    /// The same instance with `V` replaced by `A` (classical randomized
    /// Kaczmarz).
    pub fn matched(&self) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.a.clone(),
            self.b.clone(),
            self.noise.clone(),
            self.truth.clone(),
        )
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    /// Consistent part of the right-hand side.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn noise(&self) -> Option<&[f64]> {
        self.noise.as_deref()
    }

    pub fn truth(&self) -> Option<&[f64]> {
        self.truth.as_deref()
    }

    /// Right-hand side the iteration actually uses: `b + r`, or `b`.
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// `<a_i, v_i>`, all strictly positive.
    pub fn pairing(&self) -> &[f64] {
        &self.pairing
    }

    pub fn a_norms_sq(&self) -> &[f64] {
        &self.a_norms_sq
    }

    pub fn v_norms_sq(&self) -> &[f64] {
        &self.v_norms_sq
    }

    /// Rows of `V` that were negated during assembly.
    pub fn flipped_rows(&self) -> &[usize] {
        &self.flipped
    }

    /// `||A x - (b + r)||`
    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        let ax = self.a.matvec(x);
        ax.iter()
            .zip(&self.rhs)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    }
}

/// Step length rule for `x+ = x - w_i (<a_i, x> - beta_i) v_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StepRule {
    /// `w_i = 1 / <a_i, v_i>`: oblique projection onto the `a_i`
    /// hyperplane.
    ObliqueExact,
    /// `w_i = 1 / ||a_i||^2`
    InverseRowNormA,
    /// `w_i = 1 / ||v_i||^2`
    InverseRowNormV,
    /// Iterate-dependent `w` that lands on `{x : <v_i, x> = beta_i}`.
    AdaptiveVHyperplane,
}

impl StepRule {
    /// Static step length for row `i`; `None` for the adaptive rule.
    pub fn omega(&self, sys: &SystemPair, i: usize) -> Option<f64> {
        match self {
            StepRule::ObliqueExact => Some(1.0 / sys.pairing[i]),
            StepRule::InverseRowNormA => Some(1.0 / sys.a_norms_sq[i]),
            StepRule::InverseRowNormV => Some(1.0 / sys.v_norms_sq[i]),
            StepRule::AdaptiveVHyperplane => None,
        }
    }

    pub fn is_static(&self) -> bool {
        !matches!(self, StepRule::AdaptiveVHyperplane)
    }

    pub fn name(&self) -> &'static str {
        match self {
            StepRule::ObliqueExact => "oblique",
            StepRule::InverseRowNormA => "rownorm-a",
            StepRule::InverseRowNormV => "rownorm-v",
            StepRule::AdaptiveVHyperplane => "adaptive-v",
        }
    }
}

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StepRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oblique" => Ok(StepRule::ObliqueExact),
            "rownorm-a" => Ok(StepRule::InverseRowNormA),
            "rownorm-v" => Ok(StepRule::InverseRowNormV),
            "adaptive-v" => Ok(StepRule::AdaptiveVHyperplane),
            other => Err(Error::InvalidInput(format!("unknown step rule '{other}'"))),
        }
    }
}
