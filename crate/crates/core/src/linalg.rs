//! Dense kernels shared by the sketched algorithms: thin QR/SVD, symmetric
//! eigendecomposition, pseudoinverses and a handful of row/column reductions.

use nalgebra::{DMatrix, DVector};
use nalgebra_lapack::{SymmetricEigen, QR, SVD};

use crate::error::{LordError, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Thin singular value decomposition `a = u * diag(s) * vt` with `s` descending.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Mat,
    pub s: Vector,
    pub vt: Mat,
}

/// Thin QR. For `rows >= cols` returns `q` (rows×cols) and `r` (cols×cols).
pub fn thin_qr(a: &Mat) -> (Mat, Mat) {
    let qr = QR::new(a.clone());
    (qr.q(), qr.r())
}

pub fn is_finite(a: &Mat) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// LAPACK divide-and-conquer SVD of a square matrix.
fn square_svd(a: Mat) -> Result<ThinSvd> {
    let svd = SVD::new(a).ok_or_else(|| LordError::Numerical("SVD did not converge".into()))?;
    Ok(sort_descending(svd.u, svd.singular_values, svd.vt))
}

fn sort_descending(u: Mat, s: Vector, vt: Mat) -> ThinSvd {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap_or(std::cmp::Ordering::Equal));
    if order.iter().enumerate().all(|(k, &i)| k == i) {
        return ThinSvd { u, s, vt };
    }
    let u = Mat::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let vt = Mat::from_fn(order.len(), vt.ncols(), |r, c| vt[(order[r], c)]);
    let s = Vector::from_iterator(order.len(), order.iter().map(|&i| s[i]));
    ThinSvd { u, s, vt }
}

/// Thin SVD. Tall inputs are reduced by a QR first so the iterative part only
/// ever sees a square `cols×cols` factor.
pub fn thin_svd(a: &Mat) -> Result<ThinSvd> {
    if !is_finite(a) {
        return Err(LordError::InvalidInput("non-finite entry passed to SVD".into()));
    }
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Ok(ThinSvd {
            u: Mat::zeros(rows, 0),
            s: Vector::zeros(0),
            vt: Mat::zeros(0, cols),
        });
    }
    if rows > cols {
        let (q, r) = thin_qr(a);
        let inner = square_svd(r)?;
        Ok(ThinSvd {
            u: q * inner.u,
            s: inner.s,
            vt: inner.vt,
        })
    } else if rows < cols {
        let t = thin_svd(&a.transpose())?;
        Ok(ThinSvd {
            u: t.vt.transpose(),
            s: t.s,
            vt: t.u.transpose(),
        })
    } else {
        square_svd(a.clone())
    }
}

/// Orthonormal basis for the numerical range of `a`: left singular vectors
/// whose singular values exceed [`pinv_cutoff`]. Unlike a QR factor it never
/// carries arbitrary completion columns for a rank-deficient input.
pub fn range_basis(a: &Mat) -> Result<Mat> {
    let svd = thin_svd(a)?;
    let s_max = svd.s.iter().cloned().fold(0.0, f64::max);
    let cut = pinv_cutoff(a.nrows(), a.ncols(), s_max);
    let rank = svd.s.iter().take_while(|&&s| s > cut && s > 0.0).count();
    Ok(svd.u.columns(0, rank).into_owned())
}

/// Relative cutoff used by every pseudoinverse: `max(rows, cols) * eps * s_max`.
pub fn pinv_cutoff(rows: usize, cols: usize, s_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * s_max
}

/// Moore–Penrose pseudoinverse with the standard relative singular-value cutoff.
pub fn pinv(a: &Mat) -> Result<Mat> {
    let (rows, cols) = a.shape();
    let svd = thin_svd(a)?;
    let s_max = svd.s.iter().cloned().fold(0.0, f64::max);
    let cut = pinv_cutoff(rows, cols, s_max);
    let mut vs = svd.vt.transpose();
    for (j, &sj) in svd.s.iter().enumerate() {
        let inv = if sj > cut && sj > 0.0 { 1.0 / sj } else { 0.0 };
        vs.column_mut(j).scale_mut(inv);
    }
    Ok(vs * svd.u.transpose())
}

/// 2-norm condition number; infinite for singular inputs.
pub fn condition_number(a: &Mat) -> Result<f64> {
    let svd = thin_svd(a)?;
    let s_max = svd.s.iter().cloned().fold(0.0, f64::max);
    let s_min = svd.s.iter().cloned().fold(f64::INFINITY, f64::min);
    if s_max == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(if s_min > 0.0 { s_max / s_min } else { f64::INFINITY })
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
pub fn sym_eig_desc(a: &Mat) -> Result<(Vector, Mat)> {
    if !is_finite(a) {
        return Err(LordError::InvalidInput(
            "non-finite entry passed to eigendecomposition".into(),
        ));
    }
    let n = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    if n == 0 {
        return Ok((Vector::zeros(0), Mat::zeros(0, 0)));
    }
    let eig = SymmetricEigen::try_new(sym)
        .ok_or_else(|| LordError::Numerical("eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = Mat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((vals, vecs))
}

/// `x (I - 11ᵀ/p)`: subtracts each row's mean.
pub fn center_rows(x: &Mat) -> Mat {
    let p = x.ncols() as f64;
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.sum() / p;
        row.add_scalar_mut(-mean);
    }
    out
}

pub fn row_sums(x: &Mat) -> Vector {
    Vector::from_iterator(x.nrows(), x.row_iter().map(|r| r.sum()))
}

pub fn frob2(x: &Mat) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Scales row `i` of `x` by `d[i]`, i.e. `diag(d) x`.
pub fn scale_rows(d: &Vector, x: &Mat) -> Mat {
    let mut out = x.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= d[i];
    }
    out
}

/// Largest absolute deviation of `qᵀq` from the identity.
pub fn orthonormality_defect(q: &Mat) -> f64 {
    let g = q.transpose() * q;
    let n = g.nrows();
    (g - Mat::identity(n, n)).amax()
}
