use super::{dot, norm, DenseMatrix};
use crate::error::{Error, Result};

/// Relative drop tolerance for rank detection.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Orthonormal basis `Z` of `range(M)` by Householder QR with column
/// pivoting. Columns whose remaining norm falls below
/// `RANK_TOLERANCE * ||M||_F` are treated as dependent.
pub fn orthonormal_range_basis(m: &DenseMatrix) -> Result<DenseMatrix> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let (rows, cols) = m.shape();
    let fro = m.frobenius_norm();
    if fro == 0.0 {
        return Err(Error::RankZero);
    }
    let tol = RANK_TOLERANCE * fro;

    // column-major working copy
    let mut work: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::new();

    for k in 0..rows.min(cols) {
        let (best, best_norm) = (k..cols)
            .map(|j| (j, norm(&work[j][k..])))
            .fold((k, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        if best_norm <= tol {
            break;
        }
        work.swap(k, best);

        let x = &work[k][k..];
        let alpha = if x[0] > 0.0 { -best_norm } else { best_norm };
        let mut u = x.to_vec();
        u[0] -= alpha;
        let un = norm(&u);
        if un > 0.0 {
            u.iter_mut().for_each(|v| *v /= un);
        }
        for col in work.iter_mut().skip(k) {
            let tail = &mut col[k..];
            let c = 2.0 * dot(&u, tail);
            tail.iter_mut().zip(&u).for_each(|(t, ui)| *t -= c * ui);
        }
        reflectors.push(u);
    }

    let rank = reflectors.len();
    if rank == 0 {
        return Err(Error::RankZero);
    }
    let mut z = DenseMatrix::zeros(rows, rank);
    for j in 0..rank {
        let mut q = vec![0.0; rows];
        q[j] = 1.0;
        for (k, u) in reflectors.iter().enumerate().rev() {
            let tail = &mut q[k..];
            let c = 2.0 * dot(u, tail);
            tail.iter_mut().zip(u).for_each(|(t, ui)| *t -= c * ui);
        }
        for i in 0..rows {
            z[(i, j)] = q[i];
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(z: &DenseMatrix, m: &DenseMatrix) -> f64 {
        // ||(I - Z Z^T) M||_F
        let proj = z.matmul(&z.tr_matmul(m));
        m.sub(&proj).frobenius_norm()
    }

    #[test]
    fn coordinate_plane() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let z = orthonormal_range_basis(&m).unwrap();
        assert_eq!(z.shape(), (3, 2));
        let ztz = z.tr_matmul(&z);
        assert!(ztz.sub(&DenseMatrix::identity(2)).max_abs() < 1e-15);
        assert!(residual(&z, &m) < 1e-15);
    }

    #[test]
    fn duplicated_column_is_rank_one() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![-1.0, -1.0]]).unwrap();
        let z = orthonormal_range_basis(&m).unwrap();
        assert_eq!(z.cols(), 1);
        assert!(residual(&z, &m) < 1e-14);
    }

    #[test]
    fn zero_matrix_is_rank_zero() {
        assert!(matches!(
            orthonormal_range_basis(&DenseMatrix::zeros(3, 2)),
            Err(Error::RankZero)
        ));
    }
}
