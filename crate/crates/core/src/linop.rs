//! Matrix-free linear operators.
//!
//! Every algorithm in this crate touches its target matrix only through
//! [`LinOp::apply`] and [`LinOp::adjoint_apply`], always on blocks of columns.
//! Operators are immutable once built and can be shared across threads.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{LordError, Result};
use crate::linalg::{scale_rows, Mat, Vector};
use crate::recovery::SvdFactors;

/// Default cap on `rows * cols` for [`LinOp::materialize`].
pub const DEFAULT_MATERIALIZE_CAP: usize = 25_000_000;

pub trait LinOp: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// `self * b` without shape checks. `b` has `cols()` rows.
    fn forward_unchecked(&self, b: &Mat) -> Mat;

    /// `selfᵀ * b` without shape checks. `b` has `rows()` rows.
    fn adjoint_unchecked(&self, b: &Mat) -> Mat;

    fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    fn apply(&self, b: &Mat) -> Result<Mat> {
        if b.nrows() != self.cols() || b.ncols() == 0 {
            return Err(LordError::shape(
                "apply",
                (self.cols(), b.ncols().max(1)),
                b.shape(),
            ));
        }
        Ok(self.forward_unchecked(b))
    }

    fn adjoint_apply(&self, b: &Mat) -> Result<Mat> {
        if b.nrows() != self.rows() || b.ncols() == 0 {
            return Err(LordError::shape(
                "adjoint_apply",
                (self.rows(), b.ncols().max(1)),
                b.shape(),
            ));
        }
        Ok(self.adjoint_unchecked(b))
    }

    fn materialize(&self) -> Result<Mat> {
        self.materialize_with_cap(DEFAULT_MATERIALIZE_CAP)
    }

    /// Dense copy of the operator, built by applying it to the identity.
    fn materialize_with_cap(&self, cap: usize) -> Result<Mat> {
        let (rows, cols) = self.shape();
        if rows.saturating_mul(cols) > cap {
            return Err(LordError::TooLarge { rows, cols, cap });
        }
        Ok(self.forward_unchecked(&Mat::identity(cols, cols)))
    }
}

impl<T: LinOp + ?Sized> LinOp for &T {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn forward_unchecked(&self, b: &Mat) -> Mat {
        (**self).forward_unchecked(b)
    }
    fn adjoint_unchecked(&self, b: &Mat) -> Mat {
        (**self).adjoint_unchecked(b)
    }
}

impl<T: LinOp + ?Sized> LinOp for Box<T> {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn forward_unchecked(&self, b: &Mat) -> Mat {
        (**self).forward_unchecked(b)
    }
    fn adjoint_unchecked(&self, b: &Mat) -> Mat {
        (**self).adjoint_unchecked(b)
    }
}

/// Explicitly stored matrix.
#[derive(Debug, Clone)]
pub struct DenseOp {
    matrix: Mat,
}

impl DenseOp {
    pub fn new(matrix: Mat) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn into_inner(self) -> Mat {
        self.matrix
    }
}

impl From<Mat> for DenseOp {
    fn from(matrix: Mat) -> Self {
        Self::new(matrix)
    }
}

impl LinOp for DenseOp {
    fn rows(&self) -> usize {
        self.matrix.nrows()
    }
    fn cols(&self) -> usize {
        self.matrix.ncols()
    }
    fn forward_unchecked(&self, b: &Mat) -> Mat {
        &self.matrix * b
    }
    fn adjoint_unchecked(&self, b: &Mat) -> Mat {
        self.matrix.tr_mul(b)
    }
    fn materialize_with_cap(&self, cap: usize) -> Result<Mat> {
        let (rows, cols) = self.shape();
        if rows.saturating_mul(cols) > cap {
            return Err(LordError::TooLarge { rows, cols, cap });
        }
        Ok(self.matrix.clone())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityOp {
    n: usize,
}

impl IdentityOp {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl LinOp for IdentityOp {
    fn rows(&self) -> usize {
        self.n
    }
    fn cols(&self) -> usize {
        self.n
    }
    fn forward_unchecked(&self, b: &Mat) -> Mat {
        b.clone()
    }
    fn adjoint_unchecked(&self, b: &Mat) -> Mat {
        b.clone()
    }
}

/// `diag(d)`.
#[derive(Debug, Clone)]
pub struct DiagonalOp {
    diag: Vector,
}

impl DiagonalOp {
    pub fn new(diag: Vector) -> Self {
        Self { diag }
    }

    pub fn diag(&self) -> &Vector {
        &self.diag
    }
}

impl LinOp for DiagonalOp {
    fn rows(&self) -> usize {
        self.diag.len()
    }
    fn cols(&self) -> usize {
        self.diag.len()
    }
    fn forward_unchecked(&self, b: &Mat) -> Mat {
        scale_rows(&self.diag, b)
    }
    fn adjoint_unchecked(&self, b: &Mat) -> Mat {
        scale_rows(&self.diag, b)
    }
}

impl LinOp for SvdFactors {
    fn rows(&self) -> usize {
        self.u.nrows()
    }
    fn cols(&self) -> usize {
        self.vt.ncols()
    }
    fn forward_unchecked(&self, b: &Mat) -> Mat {
        let mut core = &self.vt * b;
        for (i, mut row) in core.row_iter_mut().enumerate() {
            row *= self.sigma[i];
        }
        &self.u * core
    }
    fn adjoint_unchecked(&self, b: &Mat) -> Mat {
        let mut core = self.u.tr_mul(b);
        for (i, mut row) in core.row_iter_mut().enumerate() {
            row *= self.sigma[i];
        }
        self.vt.tr_mul(&core)
    }
}

/// Low-rank plus diagonal operator `U Σ Vᵀ + diag(d)`; the output type of every
/// joint or sequential recovery.
#[derive(Debug, Clone)]
pub struct LordOp {
    pub factors: SvdFactors,
    pub diag: Vector,
}

impl LordOp {
    pub fn new(factors: SvdFactors, diag: Vector) -> Result<Self> {
        let n = diag.len();
        if factors.u.nrows() != n || factors.vt.ncols() != n {
            return Err(LordError::shape(
                "LordOp::new",
                (n, n),
                (factors.u.nrows(), factors.vt.ncols()),
            ));
        }
        Ok(Self { factors, diag })
    }

    /// Only the low-rank half, with a zero diagonal.
    pub fn from_factors(factors: SvdFactors) -> Self {
        let n = factors.u.nrows();
        Self {
            factors,
            diag: Vector::zeros(n),
        }
    }

    /// Only the diagonal half, with empty factors.
    pub fn from_diagonal(diag: Vector) -> Self {
        let n = diag.len();
        Self {
            factors: SvdFactors::zeros(n, n, 0),
            diag,
        }
    }

    /// Main diagonal of the full operator.
    pub fn diagonal(&self) -> Vector {
        &self.factors.diagonal() + &self.diag
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = self.factors.to_dense();
        for i in 0..self.diag.len() {
            m[(i, i)] += self.diag[i];
        }
        m
    }
}

impl LinOp for LordOp {
    fn rows(&self) -> usize {
        self.diag.len()
    }
    fn cols(&self) -> usize {
        self.diag.len()
    }
    fn forward_unchecked(&self, b: &Mat) -> Mat {
        self.factors.forward_unchecked(b) + scale_rows(&self.diag, b)
    }
    fn adjoint_unchecked(&self, b: &Mat) -> Mat {
        self.factors.adjoint_unchecked(b) + scale_rows(&self.diag, b)
    }
}

/// `base - subtracted`, evaluated lazily.
#[derive(Debug, Clone)]
pub struct DeflatedOp<B, S> {
    base: B,
    subtracted: S,
}

impl<B: LinOp, S: LinOp> DeflatedOp<B, S> {
    pub fn new(base: B, subtracted: S) -> Result<Self> {
        if base.shape() != subtracted.shape() {
            return Err(LordError::shape(
                "DeflatedOp::new",
                base.shape(),
                subtracted.shape(),
            ));
        }
        Ok(Self { base, subtracted })
    }

    pub fn base(&self) -> &B {
        &self.base
    }

    pub fn subtracted(&self) -> &S {
        &self.subtracted
    }
}

impl<B: LinOp, S: LinOp> LinOp for DeflatedOp<B, S> {
    fn rows(&self) -> usize {
        self.base.rows()
    }
    fn cols(&self) -> usize {
        self.base.cols()
    }
    fn forward_unchecked(&self, b: &Mat) -> Mat {
        self.base.forward_unchecked(b) - self.subtracted.forward_unchecked(b)
    }
    fn adjoint_unchecked(&self, b: &Mat) -> Mat {
        self.base.adjoint_unchecked(b) - self.subtracted.adjoint_unchecked(b)
    }
}

/// Wraps an operator and counts matrix-vector products (one per column of
/// every block applied, in either direction).
#[derive(Debug)]
pub struct CountingOp<T> {
    inner: T,
    forward: AtomicUsize,
    adjoint: AtomicUsize,
}

impl<T: LinOp> CountingOp<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            forward: AtomicUsize::new(0),
            adjoint: AtomicUsize::new(0),
        }
    }

    pub fn forward_count(&self) -> usize {
        self.forward.load(Ordering::Relaxed)
    }

    pub fn adjoint_count(&self) -> usize {
        self.adjoint.load(Ordering::Relaxed)
    }

    pub fn total(&self) -> usize {
        self.forward_count() + self.adjoint_count()
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }
}

impl<T: LinOp> LinOp for CountingOp<T> {
    fn rows(&self) -> usize {
        self.inner.rows()
    }
    fn cols(&self) -> usize {
        self.inner.cols()
    }
    fn forward_unchecked(&self, b: &Mat) -> Mat {
        self.forward.fetch_add(b.ncols(), Ordering::Relaxed);
        self.inner.forward_unchecked(b)
    }
    fn adjoint_unchecked(&self, b: &Mat) -> Mat {
        self.adjoint.fetch_add(b.ncols(), Ordering::Relaxed);
        self.inner.adjoint_unchecked(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::toy_operator;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(n: usize, i: usize) -> Mat {
        let mut m = Mat::zeros(n, 1);
        m[(i, 0)] = 1.0;
        m
    }

    fn random_dense(n: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn identity_maps_basis_vector_to_itself() {
        let id = IdentityOp::new(3);
        assert_eq!(id.apply(&e(3, 1)).unwrap(), e(3, 1));
    }

    #[test]
    fn toy_operator_on_first_basis_vector() {
        let a = toy_operator(3).unwrap();
        let y = a.apply(&e(3, 0)).unwrap();
        assert_eq!(y.as_slice(), &[2.0, 1.0, 1.0]);
    }

    #[test]
    fn pure_diagonal_lord_materializes_to_diag() {
        let d = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let op = LordOp::new(SvdFactors::zeros(3, 3, 1), d.clone()).unwrap();
        let m = op.apply(&Mat::identity(3, 3)).unwrap();
        assert_eq!(m, Mat::from_diagonal(&d));
    }

    #[test]
    fn shape_error_names_both_shapes() {
        let a = DenseOp::new(Mat::zeros(4, 3));
        let err = a.apply(&Mat::zeros(4, 2)).unwrap_err().to_string();
        assert!(err.contains("3x2") && err.contains("4x2"), "{err}");
        assert!(a.apply(&Mat::zeros(3, 0)).is_err());
        assert!(a.adjoint_apply(&Mat::zeros(3, 1)).is_err());
    }

    #[test]
    fn adjoint_of_dense_is_transpose() {
        let a = DenseOp::new(Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let y = a.adjoint_apply(&e(2, 0)).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn symmetric_operator_adjoint_equals_forward() {
        let a = toy_operator(5).unwrap();
        let b = Mat::from_fn(5, 2, |i, j| (i + 2 * j) as f64);
        assert_eq!(a.apply(&b).unwrap(), a.adjoint_apply(&b).unwrap());
    }

    #[test]
    fn dense_inner_product_identity() {
        let a = DenseOp::new(random_dense(8, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Mat::from_fn(8, 1, |_, _| rng.gen_range(-1.0..1.0));
        let y = Mat::from_fn(8, 1, |_, _| rng.gen_range(-1.0..1.0));
        let lhs = a.apply(&x).unwrap().dot(&y);
        let rhs = x.dot(&a.adjoint_apply(&y).unwrap());
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
    }

    #[test]
    fn materialize_small_operators() {
        let a = toy_operator(2).unwrap();
        assert_eq!(
            a.materialize().unwrap(),
            Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])
        );
        let u = e(3, 0);
        let lr = LordOp::from_factors(SvdFactors::new(
            u.clone(),
            Vector::from_element(1, 1.0),
            u.transpose(),
        ));
        assert_eq!(lr.materialize().unwrap(), &u * u.transpose());
    }

    #[test]
    fn deflating_by_the_diagonal_zeroes_it() {
        let dense = random_dense(4, 9);
        let diag = DiagonalOp::new(dense.diagonal());
        let op = DeflatedOp::new(DenseOp::new(dense.clone()), diag).unwrap();
        let m = op.materialize().unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(m[(i, i)], 0.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(m[(0, 1)], dense[(0, 1)], epsilon = 1e-15);
    }

    #[test]
    fn materialize_refuses_beyond_cap() {
        let a = IdentityOp::new(100);
        assert!(matches!(
            a.materialize_with_cap(99 * 100),
            Err(LordError::TooLarge { .. })
        ));
    }

    #[test]
    fn counting_op_counts_columns() {
        let a = CountingOp::new(IdentityOp::new(4));
        a.apply(&Mat::zeros(4, 3)).unwrap();
        a.adjoint_apply(&Mat::zeros(4, 2)).unwrap();
        assert_eq!((a.forward_count(), a.adjoint_count(), a.total()), (3, 2, 5));
    }
}
