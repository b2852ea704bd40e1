//! Eigenvalues of general real matrices: orthogonal reduction to upper
//! Hessenberg form, then Francis double-shift QR iteration to real Schur
//! form. Trailing 2x2 blocks are resolved analytically, so complex
//! conjugate pairs come out exactly as pairs.

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Eigenvalues of a square matrix as `(re, im)` pairs, in deflation order.
pub fn eigenvalues(m: &DenseMatrix) -> Result<Vec<(f64, f64)>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let mut h = m.clone();
    hessenberg(&mut h);
    hqr(&mut h)
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DenseMatrix) -> Result<f64> {
    let ev = eigenvalues(m)?;
    Ok(ev.iter().fold(0.0, |r, &(re, im)| r.max(re.hypot(im))))
}

fn hessenberg(h: &mut DenseMatrix) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        h[(m, m - 1)] = scale * g;
        for i in m + 1..=high {
            h[(i, m - 1)] = 0.0;
        }
    }
}

fn hqr(h: &mut DenseMatrix) -> Result<Vec<(f64, f64)>> {
    let nn = h.rows();
    let eps = f64::EPSILON;
    let max_iterations = 100 * nn.max(10);
    let mut re = vec![0.0; nn];
    let mut im = vec![0.0; nn];
    let mut done = vec![false; nn];

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let mut n = nn as isize - 1;
    let mut exshift = 0.0;
    let mut iter = 0usize;
    let mut total = 0usize;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut w, mut x, mut y);

    while n >= 0 {
        let nu = n as usize;
        let mut l = n;
        while l > 0 {
            let lu = l as usize;
            s = h[(lu - 1, lu - 1)].abs() + h[(lu, lu)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(lu, lu - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            re[nu] = h[(nu, nu)] + exshift;
            im[nu] = 0.0;
            done[nu] = true;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            x = h[(nu, nu)] + exshift;
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                re[nu - 1] = x + z;
                re[nu] = if z != 0.0 { x - w / z } else { x + z };
                im[nu - 1] = 0.0;
                im[nu] = 0.0;
            } else {
                re[nu - 1] = x + p;
                re[nu] = x + p;
                im[nu - 1] = z;
                im[nu] = -z;
            }
            done[nu] = true;
            done[nu - 1] = true;
            n -= 2;
            iter = 0;
        } else {
            total += 1;
            if total > max_iterations {
                let mut best = 0.0f64;
                for i in 0..nn {
                    let v = if done[i] {
                        re[i].hypot(im[i])
                    } else {
                        (h[(i, i)] + exshift).abs()
                    };
                    best = best.max(v);
                }
                return Err(Error::ConvergenceFailure {
                    what: "Hessenberg QR iteration",
                    iterations: total,
                    best_estimate: best,
                });
            }

            x = h[(nu, nu)];
            y = 0.0;
            w = 0.0;
            if l < n {
                y = h[(nu - 1, nu - 1)];
                w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            }
            // exceptional shifts
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;

            let lu = l as usize;
            let mut m = nu - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == lu {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            for k in m..nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if lu != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            p += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= p * z;
                        }
                        h[(k, j)] -= p * x;
                        h[(k + 1, j)] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            p += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= p * r;
                        }
                        h[(i, k)] -= p;
                        h[(i, k + 1)] -= p * q;
                    }
                }
            }
        }
    }
    Ok(re.into_iter().zip(im).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn nilpotent_has_zero_radius() {
        let r = spectral_radius(&m(&[vec![0.0, 1.0], vec![0.0, 0.0]])).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn rotation_gives_complex_pair() {
        let ev = eigenvalues(&m(&[vec![0.0, -1.0], vec![1.0, 0.0]])).unwrap();
        let mut ims: Vec<f64> = ev.iter().map(|e| e.1).collect();
        ims.sort_by(f64::total_cmp);
        assert!((ims[0] + 1.0).abs() < 1e-15 && (ims[1] - 1.0).abs() < 1e-15);
        assert!(ev.iter().all(|e| e.0.abs() < 1e-15));
        let r = spectral_radius(&m(&[vec![0.0, -1.0], vec![1.0, 0.0]])).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal() {
        let r = spectral_radius(&DenseMatrix::diag(&[0.5, -0.9])).unwrap();
        assert!((r - 0.9).abs() < 1e-15);
        let r = spectral_radius(&DenseMatrix::diag(&[0.25])).unwrap();
        assert_eq!(r, 0.25);
    }

    #[test]
    fn companion_matrix_roots() {
        // x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3)
        let c = m(&[
            vec![6.0, -11.0, 6.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ]);
        let mut re: Vec<f64> = eigenvalues(&c).unwrap().iter().map(|e| e.0).collect();
        re.sort_by(f64::total_cmp);
        for (got, want) in re.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(
            spectral_radius(&DenseMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }
}
