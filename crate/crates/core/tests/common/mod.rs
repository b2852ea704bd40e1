//! Reference computations that share no code with the library.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rkma::linalg::DenseMatrix;
use rkma::{ProbabilityVector, SystemPair};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller, kept local so the oracle does not depend on rand_distr
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| normal(rng)).collect())
        .collect()
}

pub fn to_dense(rows: &[Vec<f64>]) -> DenseMatrix {
    DenseMatrix::from_rows(rows).unwrap()
}

pub fn to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn random_symmetric<R: Rng>(n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let g = gaussian_matrix(n, n, rng);
    (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (g[i][j] + g[j][i])).collect())
        .collect()
}

pub fn random_simplex<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            for j in 0..m {
                c[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    c
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len())
        .map(|j| a.iter().map(|r| r[j]).collect())
        .collect()
}

pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Gauss-Jordan inverse with full pivoting.
pub fn inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))
            .unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        assert!(piv.abs() > 1e-300, "singular in oracle inverse");
        for v in m[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for j in 0..2 * n {
                        m[r][j] -= f * m[c][j];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Tridiagonal form `(diag, offdiag)` of a symmetric matrix by Givens
/// rotations.
pub fn givens_tridiagonal(a: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let mut m = a.to_vec();
    for k in 0..n.saturating_sub(2) {
        for i in k + 2..n {
            let (x, y) = (m[k + 1][k], m[i][k]);
            if y == 0.0 {
                continue;
            }
            let r = x.hypot(y);
            let (c, s) = (x / r, y / r);
            for j in 0..n {
                let (p, q) = (m[k + 1][j], m[i][j]);
                m[k + 1][j] = c * p + s * q;
                m[i][j] = -s * p + c * q;
            }
            for j in 0..n {
                let (p, q) = (m[j][k + 1], m[j][i]);
                m[j][k + 1] = c * p + s * q;
                m[j][i] = -s * p + c * q;
            }
        }
    }
    let d = (0..n).map(|i| m[i][i]).collect();
    let e = (0..n.saturating_sub(1)).map(|i| m[i + 1][i]).collect();
    (d, e)
}

/// Number of eigenvalues of the tridiagonal matrix below `x`.
pub fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] };
        q = d[i] - x - if i == 0 { 0.0 } else { off / q };
        if q == 0.0 {
            q = -f64::EPSILON * (x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (0-based) of a symmetric matrix by Sturm
/// bisection.
pub fn sturm_eigenvalue(a: &[Vec<f64>], k: usize) -> f64 {
    let (d, e) = givens_tridiagonal(a);
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(&d, &e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest singular value by power iteration on `M^T M`.
pub fn power_sigma(m: &[Vec<f64>]) -> f64 {
    let g = matmul(&transpose(m), m);
    let n = g.len();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64).collect();
    let mut last = 0.0;
    for it in 0..200_000 {
        let y = matvec(&g, &x);
        let ny = norm(&y);
        if ny == 0.0 {
            return 0.0;
        }
        let rq = dot(&x, &y) / dot(&x, &x);
        x = y.iter().map(|v| v / ny).collect();
        if it > 10 && (rq - last).abs() <= 1e-16 * rq.abs() {
            return rq.max(0.0).sqrt();
        }
        last = rq;
    }
    last.max(0.0).sqrt()
}

/// Real matrix `S L S^{-1}` with `L` block diagonal: real eigenvalues and
/// 2x2 blocks `[[a, b], [-b, a]]` for pairs `a +- ib`. Returns the matrix
/// and its spectral radius.
pub fn known_spectrum<R: Rng>(n: usize, rng: &mut R) -> (Vec<Vec<f64>>, f64) {
    let mut l = vec![vec![0.0; n]; n];
    let mut rho: f64 = 0.0;
    let mut i = 0;
    while i < n {
        if i + 1 < n && rng.random::<f64>() < 0.5 {
            let a: f64 = rng.random_range(-1.5..1.5);
            let b = rng.random_range(0.1..1.5);
            l[i][i] = a;
            l[i + 1][i + 1] = a;
            l[i][i + 1] = b;
            l[i + 1][i] = -b;
            rho = rho.max(a.hypot(b));
            i += 2;
        } else {
            let a: f64 = rng.random_range(-2.0..2.0);
            l[i][i] = a;
            rho = rho.max(a.abs());
            i += 1;
        }
    }
    let scale = 0.5 / (n as f64).sqrt();
    let s: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| if r == c { 1.0 } else { 0.0 } + scale * normal(rng))
                .collect()
        })
        .collect();
    let m = matmul(&matmul(&s, &l), &inverse(&s));
    (m, rho)
}

/// Euclidean projection onto the 3-simplex by exhaustive search on a
/// grid of spacing `h`, refined once around the best point.
pub fn brute_force_simplex3(y: &[f64; 3], h: f64) -> [f64; 3] {
    let dist = |p: &[f64; 3]| (0..3).map(|i| (p[i] - y[i]).powi(2)).sum::<f64>();
    let search = |center: Option<[f64; 3]>, step: f64, radius: f64| {
        let mut best = [1.0, 0.0, 0.0];
        let mut bd = f64::INFINITY;
        let (lo0, hi0, lo1, hi1) = match center {
            None => (0.0, 1.0, 0.0, 1.0),
            Some(c) => (
                (c[0] - radius).max(0.0),
                (c[0] + radius).min(1.0),
                (c[1] - radius).max(0.0),
                (c[1] + radius).min(1.0),
            ),
        };
        let n0 = ((hi0 - lo0) / step).round() as usize;
        let n1 = ((hi1 - lo1) / step).round() as usize;
        for i in 0..=n0 {
            let a = lo0 + i as f64 * step;
            for j in 0..=n1 {
                let b = lo1 + j as f64 * step;
                if a + b > 1.0 + 1e-15 {
                    break;
                }
                let p = [a, b, (1.0 - a - b).max(0.0)];
                let d = dist(&p);
                if d < bd {
                    bd = d;
                    best = p;
                }
            }
        }
        best
    };
    let coarse = search(None, 1e-2, 0.0);
    search(Some(coarse), h, 2e-2)
}

/// Expected step operator `I - V^T D A` and `W` assembled entry by entry.
pub fn reference_operators(sys: &SystemPair, p: &ProbabilityVector) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let a = to_rows(sys.a());
    let v = to_rows(sys.v());
    let (m, n) = (a.len(), a[0].len());
    let mut step = vec![vec![0.0; n]; n];
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..m {
        let pair = dot(&a[i], &v[i]);
        let om = 1.0 / pair;
        let pi = p.as_slice()[i];
        let vv = dot(&v[i], &v[i]);
        for r in 0..n {
            for c in 0..n {
                let k = pi * om * v[i][r] * a[i][c];
                let kt = pi * om * a[i][r] * v[i][c];
                step[r][c] -= k;
                w[r][c] += k + kt - pi * om * om * vv * a[i][r] * a[i][c];
            }
        }
    }
    for (r, row) in step.iter_mut().enumerate() {
        row[r] += 1.0;
    }
    (step, w)
}
