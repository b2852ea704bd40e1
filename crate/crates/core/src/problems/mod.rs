//! Test-instance generators. Every generator is a pure function of its
//! parameters and seed; independent pieces (matrix, solution, noise, ...)
//! come from separate derived streams.

pub mod ct;

pub use ct::{
    ct_mismatch_pair, ct_mismatch_pair_at, gradient_energy, parallel_beam_matrix,
    power_law_field, smooth_phantom, trace_ray, CtPair, ScanGeometry,
};

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{norm, orthonormal_range_basis, DenseMatrix, Lu};
use crate::sampling::{derive_replicate_rng, ProbabilityVector, RngState};
use crate::solver::SystemPair;

const STREAM_MATRIX: u64 = 1;
const STREAM_SOLUTION: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_COEFFS: u64 = 4;
const STREAM_MASK: u64 = 5;

fn stream(seed: u64, tag: u64) -> RngState {
    derive_replicate_rng(seed, tag)
}

fn gaussian_vec(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// `m x n` matrix of independent standard normal entries.
pub fn gen_gaussian(m: usize, n: usize, seed: u64) -> Result<DenseMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput(format!("dimensions {m}x{n} must be positive")));
    }
    let mut rng = stream(seed, STREAM_MATRIX);
    DenseMatrix::new(m, n, gaussian_vec(m * n, &mut rng))
}

/// Copy of `a` with every entry of magnitude below `tau` set to zero.
pub fn mismatch_threshold(a: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidInput(format!("threshold {tau} must be finite and >= 0")));
    }
    Ok(DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| {
        let x = a[(i, j)];
        if x.abs() >= tau {
            x
        } else {
            0.0
        }
    }))
}

/// Gaussian solution `x_hat`, `b = A x_hat`.
pub fn assemble_consistent(a: DenseMatrix, v: DenseMatrix, seed: u64) -> Result<SystemPair> {
    let truth = gaussian_vec(a.cols(), &mut stream(seed, STREAM_SOLUTION));
    SystemPair::consistent(a, v, truth)
}

/// Same solution as [`assemble_consistent`] plus noise
/// `r = noise_scale * N(0, I)` kept apart from `b`.
pub fn assemble_inconsistent(
    a: DenseMatrix,
    v: DenseMatrix,
    noise_scale: f64,
    seed: u64,
) -> Result<SystemPair> {
    if !(noise_scale >= 0.0) || !noise_scale.is_finite() {
        return Err(Error::InvalidInput(format!("noise scale {noise_scale} must be >= 0")));
    }
    if noise_scale == 0.0 {
        return assemble_consistent(a, v, seed);
    }
    let truth = gaussian_vec(a.cols(), &mut stream(seed, STREAM_SOLUTION));
    let r: Vec<f64> = gaussian_vec(a.rows(), &mut stream(seed, STREAM_NOISE))
        .into_iter()
        .map(|x| noise_scale * x)
        .collect();
    let b = a.matvec(&truth);
    SystemPair::new(a, v, b, Some(r), Some(truth))
}

/// Wide Gaussian system whose solution lies in `range(V^T)`:
/// `x_hat = V^T c`, `b = A x_hat`, with `V` the `tau`-thresholded `A`.
pub fn assemble_underdetermined(m: usize, n: usize, tau: f64, seed: u64) -> Result<SystemPair> {
    if m >= n {
        return Err(Error::InvalidInput(format!("need m < n, got {m}x{n}")));
    }
    let a = gen_gaussian(m, n, seed)?;
    let v = mismatch_threshold(&a, tau)?;
    Lu::new(&a.matmul(&v.transpose()))?;
    let c = gaussian_vec(m, &mut stream(seed, STREAM_COEFFS));
    let truth = v.tr_matvec(&c);
    SystemPair::consistent(a, v, truth)
}

/// Row factor `2 / (sqrt(i) + 2)` for the 1-based row index `i`.
pub fn probopt_row_scale(i: usize) -> f64 {
    2.0 / ((i as f64).sqrt() + 2.0)
}

/// Gaussian `A` with row `i` scaled by [`probopt_row_scale`] and `V` equal
/// to `A` with `floor(zero_frac * m * n)` random entries set to zero.
pub fn assemble_scaled_for_probopt(m: usize, n: usize, zero_frac: f64, seed: u64) -> Result<SystemPair> {
    if !(0.0..=1.0).contains(&zero_frac) {
        return Err(Error::InvalidInput(format!("zero fraction {zero_frac} not in [0, 1]")));
    }
    let mut a = gen_gaussian(m, n, seed)?;
    for i in 0..m {
        let s = probopt_row_scale(i + 1);
        a.row_mut(i).iter_mut().for_each(|x| *x *= s);
    }
    let mut v = a.clone();
    let zeros = (zero_frac * (m * n) as f64).floor() as usize;
    let mut rng = stream(seed, STREAM_MASK);
    for k in sample(&mut rng, m * n, zeros) {
        v[(k / n, k % n)] = 0.0;
    }
    assemble_consistent(a, v, seed)
}

/// `||(I - P) x||` with `P` the orthogonal projector onto `range(A^T)`:
/// the error level at which the matched iteration stalls when started in
/// that range.
pub fn range_defect(a: &DenseMatrix, x: &[f64]) -> Result<f64> {
    let z = orthonormal_range_basis(&a.transpose())?;
    let coeffs = z.tr_matvec(x);
    let proj = z.matvec(&coeffs);
    Ok(norm(&crate::linalg::sub(x, &proj)))
}

/// The two scan-derived CT matrices with a smooth phantom as solution.
pub fn ct_instance(geometry: &ScanGeometry, seed: u64) -> Result<CtPair> {
    let full = geometry.matrix()?;
    let x = smooth_phantom(geometry.grid_n, seed)?;
    let b_full = full.matvec(&x);
    ct_mismatch_pair(&full, &b_full, Some(x))
}

/// Named row-selection distributions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbabilityScheme {
    Uniform,
    /// `p_i = ||a_i||^2 / ||A||_F^2`
    RowNormA,
    /// `p_i = <a_i, v_i> / sum_j <a_j, v_j>`
    Pairing,
}

impl ProbabilityScheme {
    pub fn name(&self) -> &'static str {
        match self {
            ProbabilityScheme::Uniform => "uniform",
            ProbabilityScheme::RowNormA => "rownorm-a",
            ProbabilityScheme::Pairing => "pairing",
        }
    }

    pub fn build(&self, sys: &SystemPair) -> Result<ProbabilityVector> {
        match self {
            ProbabilityScheme::Uniform => Ok(ProbabilityVector::uniform(sys.rows())),
            ProbabilityScheme::RowNormA => ProbabilityVector::from_weights(sys.a_norms_sq()),
            ProbabilityScheme::Pairing => ProbabilityVector::from_weights(sys.pairing()),
        }
    }
}

impl fmt::Display for ProbabilityScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProbabilityScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ProbabilityScheme::Uniform),
            "rownorm-a" => Ok(ProbabilityScheme::RowNormA),
            "pairing" => Ok(ProbabilityScheme::Pairing),
            _ => Err(Error::InvalidInput(format!(
                "unknown probability scheme '{s}' (uniform, rownorm-a, pairing)"
            ))),
        }
    }
}
