use super::{norm, symmetric_eigen, DenseMatrix};
use crate::error::{Error, Result};

/// Largest singular value with unit singular vectors:
/// `M right = sigma left` and `M^T left = sigma right`.
#[derive(Clone, Debug)]
pub struct SingularTriplet {
    pub sigma: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Top singular triplet from the eigendecomposition of the smaller Gram
/// matrix (`M^T M` or `M M^T`). The companion vector is recovered by one
/// multiplication with `M` and normalized.
pub fn top_singular_triplet(m: &DenseMatrix) -> Result<SingularTriplet> {
    Ok(top_singular_triplet_with_next(m)?.0)
}

/// Like [`top_singular_triplet`], also returning the second largest
/// singular value (0 when there is none), which tells whether the top
/// one is simple.
pub fn top_singular_triplet_with_next(m: &DenseMatrix) -> Result<(SingularTriplet, f64)> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let (rows, cols) = m.shape();
    let wide = rows < cols;
    let gram = if wide {
        m.transpose().tr_matmul(&m.transpose())
    } else {
        m.tr_matmul(m)
    };
    let eig = symmetric_eigen(&gram)?;
    let k = eig.values.len() - 1;
    let sigma = eig.values[k].max(0.0).sqrt();
    let v = eig.vector(k);
    let next = if k > 0 { eig.values[k - 1].max(0.0).sqrt() } else { 0.0 };

    let (left, right) = if sigma == 0.0 {
        (unit(rows), unit(cols))
    } else if wide {
        let mut r = m.tr_matvec(&v);
        normalize(&mut r);
        (v, r)
    } else {
        let mut l = m.matvec(&v);
        normalize(&mut l);
        (l, v)
    };
    Ok((SingularTriplet { sigma, left, right }, next))
}

fn unit(n: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[0] = 1.0;
    e
}

fn normalize(x: &mut [f64]) {
    let s = norm(x);
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    }
}
