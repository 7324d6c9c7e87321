//! Turning forward/adjoint sketches into SVD factors.
//!
//! Three interchangeable strategies:
//!
//! * [`singlepass`]: range basis of the row sketch, an `N×p` pseudo-solve and a thin SVD.
//! * [`compact`]: range bases of both sketches, after which every remaining operation
//!   acts on `p×p` matrices (pseudoinverses and a symmetric eigensolve).
//! * [`oversampled`]: spends `2p` extra forward MVPs on a core sketch
//!   `Υ′ᵀ A Ω′` and solves the `p×p` core in the sketched bases.

use serde::{Deserialize, Serialize};

use crate::error::{LordError, Result};
use crate::linalg::{
    condition_number, is_finite, pinv, range_basis, sym_eig_desc, thin_svd, Mat, Vector,
};
use crate::linop::LinOp;
use crate::method::Recovery;
use crate::sketch::SketchPair;

/// Low-rank factors `U diag(sigma) Vt`, `sigma` non-negative and descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub u: Mat,
    pub sigma: Vector,
    pub vt: Mat,
}

impl SvdFactors {
    pub fn new(u: Mat, sigma: Vector, vt: Mat) -> Self {
        debug_assert_eq!(u.ncols(), sigma.len());
        debug_assert_eq!(vt.nrows(), sigma.len());
        Self { u, sigma, vt }
    }

    /// Rank-`r` factors that are identically zero.
    pub fn zeros(rows: usize, cols: usize, r: usize) -> Self {
        Self {
            u: Mat::zeros(rows, r),
            sigma: Vector::zeros(r),
            vt: Mat::zeros(r, cols),
        }
    }

    pub fn width(&self) -> usize {
        self.sigma.len()
    }

    /// Number of singular values above `tol * sigma_1`.
    pub fn numerical_rank(&self, tol: f64) -> usize {
        let s1 = self.sigma.iter().cloned().fold(0.0, f64::max);
        if s1 == 0.0 {
            return 0;
        }
        self.sigma.iter().filter(|&&s| s > tol * s1).count()
    }

    /// Drops the components at or below `tol * sigma_1`.
    pub fn truncated(&self, tol: f64) -> Self {
        let r = self.numerical_rank(tol);
        Self {
            u: self.u.columns(0, r).into_owned(),
            sigma: self.sigma.rows(0, r).into_owned(),
            vt: self.vt.rows(0, r).into_owned(),
        }
    }

    pub fn to_dense(&self) -> Mat {
        let mut us = self.u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.sigma[j];
        }
        us * &self.vt
    }

    /// `diag(U Σ Vᵀ)` without forming the product.
    pub fn diagonal(&self) -> Vector {
        let n = self.u.nrows().min(self.vt.ncols());
        Vector::from_fn(n, |i, _| {
            (0..self.sigma.len())
                .map(|j| self.u[(i, j)] * self.sigma[j] * self.vt[(j, i)])
                .sum()
        })
    }
}

fn check_inputs(context: &'static str, m: &Mat, omega: &Mat, w: &Mat) -> Result<()> {
    if omega.shape() != m.shape() {
        return Err(LordError::shape(context, m.shape(), omega.shape()));
    }
    if w.shape() != m.shape() {
        return Err(LordError::shape(context, m.shape(), w.shape()));
    }
    if !(is_finite(m) && is_finite(omega) && is_finite(w)) {
        return Err(LordError::InvalidInput(format!("{context}: non-finite sketch entries")));
    }
    Ok(())
}

fn factors_from_svd(u: Mat, s: Vector, vt: Mat) -> SvdFactors {
    let s = s.map(|v| v.max(0.0));
    SvdFactors::new(u, s, vt)
}

/// Single-pass recovery from `M = AΩ` and `W = AᵀΥ`.
pub fn singlepass(m: &Mat, omega: &Mat, w: &Mat) -> Result<SvdFactors> {
    check_inputs("singlepass", m, omega, w)?;
    let p_basis = range_basis(w)?;
    if p_basis.ncols() == 0 {
        return Ok(SvdFactors::zeros(m.nrows(), w.nrows(), 0));
    }
    let b = m * pinv(&p_basis.tr_mul(omega))?;
    let svd = thin_svd(&b)?;
    // V = P Z, stored transposed.
    let vt = &svd.vt * p_basis.transpose();
    Ok(factors_from_svd(svd.u, svd.s, vt))
}

/// Placement of `Σ` and `Z` when forming the left factor in [`compact`].
///
/// `TransposeFirst` is `U = P (B S†)ᵀ Z Σ`; `TransposeLast` is `U = P (Σ Z B S†)ᵀ`.
/// Only `TransposeFirst` reproduces the input on exact low-rank data (see the
/// `compact_orderings` test), so it is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CompactOrdering {
    #[default]
    TransposeFirst,
    TransposeLast,
}

/// Eigenvalues of `ΨᵀΨ` below `-EIG_CLAMP_TOL * λ_max` are treated as a
/// numerical failure; smaller negative values are clamped to zero.
pub const EIG_CLAMP_TOL: f64 = 1e-12;

/// Compact recovery: two numerical range bases, then only `p×p` work.
pub fn compact(m: &Mat, omega: &Mat, w: &Mat) -> Result<SvdFactors> {
    compact_with_ordering(m, omega, w, CompactOrdering::TransposeFirst)
}

pub fn compact_with_ordering(
    m: &Mat,
    omega: &Mat,
    w: &Mat,
    ordering: CompactOrdering,
) -> Result<SvdFactors> {
    check_inputs("compact", m, omega, w)?;
    let p_basis = range_basis(m)?;
    let s = p_basis.tr_mul(m);
    let q_basis = range_basis(w)?;
    if p_basis.ncols() == 0 || q_basis.ncols() == 0 {
        return Ok(SvdFactors::zeros(m.nrows(), w.nrows(), 0));
    }
    let b = q_basis.tr_mul(omega);
    let s_pinv = pinv(&s)?;
    let psi = &s * pinv(&b)?;
    let (eigvals, z) = sym_eig_desc(&psi.tr_mul(&psi))?;

    let lmax = eigvals.iter().cloned().fold(0.0, f64::max);
    let mut sigma = Vector::zeros(eigvals.len());
    for (i, &ev) in eigvals.iter().enumerate() {
        if ev < -EIG_CLAMP_TOL * lmax.max(f64::MIN_POSITIVE) {
            return Err(LordError::Numerical(format!(
                "compact recovery: eigenvalue {ev:e} of ΨᵀΨ is negative beyond roundoff"
            )));
        }
        sigma[i] = ev.max(0.0).sqrt();
    }

    let bs = &b * &s_pinv;
    let sig = Mat::from_diagonal(&sigma);
    let u_core = match ordering {
        CompactOrdering::TransposeFirst => bs.transpose() * &z * &sig,
        CompactOrdering::TransposeLast => (&sig * &z * &bs).transpose(),
    };
    let u = &p_basis * u_core;
    let vt = z.transpose() * q_basis.transpose();
    Ok(factors_from_svd(u, sigma, vt))
}

/// Result of [`oversampled`], carrying the worse of the two core condition numbers.
#[derive(Debug, Clone)]
pub struct OversampledOutput {
    pub factors: SvdFactors,
    pub condition: f64,
}

/// Oversampled recovery. `p_basis`/`q_basis` are orthonormal bases for the
/// column and row spaces; the core sketches must be `N×2p`.
pub fn oversampled<A: LinOp + ?Sized>(
    a: &A,
    p_basis: &Mat,
    q_basis: &Mat,
    omega_core: &SketchPair,
    upsilon_core: &SketchPair,
) -> Result<OversampledOutput> {
    let n = a.rows();
    if p_basis.nrows() != n || q_basis.nrows() != a.cols() {
        return Err(LordError::shape(
            "oversampled",
            (n, a.cols()),
            (p_basis.nrows(), q_basis.nrows()),
        ));
    }
    if p_basis.ncols() == 0 || q_basis.ncols() == 0 {
        return Ok(OversampledOutput {
            factors: SvdFactors::zeros(n, a.cols(), 0),
            condition: 1.0,
        });
    }
    let core = a.apply(&omega_core.omega)?;
    let c = upsilon_core.omega.tr_mul(&core);
    let left = upsilon_core.omega.tr_mul(p_basis);
    let right = q_basis.tr_mul(&omega_core.omega);
    let condition = condition_number(&left)?.max(condition_number(&right)?);
    let solved = pinv(&left)? * c * pinv(&right)?;
    let svd = thin_svd(&solved)?;
    let u = p_basis * svd.u;
    let vt = svd.vt * q_basis.transpose();
    Ok(OversampledOutput {
        factors: factors_from_svd(u, svd.s, vt),
        condition,
    })
}

/// Core sketches consumed by oversampled recovery.
#[derive(Debug, Clone, Copy)]
pub struct CoreSketches<'a> {
    pub omega: &'a SketchPair,
    pub upsilon: &'a SketchPair,
}

/// Runs `strategy` on `M = op·Ω` and `W = opᵀ·Υ`. `op` is only touched by the
/// oversampled strategy, which also needs `core`.
pub fn recover<A: LinOp + ?Sized>(
    strategy: Recovery,
    op: &A,
    m: &Mat,
    omega: &Mat,
    w: &Mat,
    core: Option<CoreSketches<'_>>,
) -> Result<SvdFactors> {
    match strategy {
        Recovery::Singlepass => singlepass(m, omega, w),
        Recovery::Compact => compact(m, omega, w),
        Recovery::Oversampled => {
            let core = core.ok_or_else(|| {
                LordError::Config("oversampled recovery needs core sketches".into())
            })?;
            check_inputs("oversampled", m, omega, w)?;
            let p_basis = range_basis(m)?;
            let q_basis = range_basis(w)?;
            Ok(oversampled(op, &p_basis, &q_basis, core.omega, core.upsilon)?.factors)
        }
    }
}
