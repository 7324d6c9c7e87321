//! Comparison methods: SSVD for low rank, XDiag for the diagonal, and the two
//! sequential combinations LoR→D and D→LoR.

use crate::error::Result;
use crate::linalg::{pinv_cutoff, row_sums, scale_rows, thin_qr, thin_svd, Mat, Vector};
use crate::linop::{DeflatedOp, DiagonalOp, LinOp, LordOp};
use crate::method::Recovery;
use crate::recovery::{recover, CoreSketches, SvdFactors};
use crate::sketch::{adjoint_measure, forward_measure, SketchPair};

/// Sketched SVD from one forward and one adjoint round.
pub fn ssvd<A: LinOp + ?Sized>(
    a: &A,
    omega: &SketchPair,
    upsilon: &SketchPair,
    recovery: Recovery,
    core: Option<CoreSketches<'_>>,
) -> Result<SvdFactors> {
    let m = forward_measure(a, &omega.omega)?.matrix;
    let w = adjoint_measure(a, &upsilon.omega)?.matrix;
    recover(recovery, a, &m, &omega.omega, &w, core)
}

/// XDiag output. `q` spans the sketched top space; `forward` keeps `AΩ` so
/// callers can reuse it without spending more MVPs.
#[derive(Debug, Clone)]
pub struct DiagEstimate {
    pub d: Vector,
    pub q: Mat,
    pub forward: Mat,
    /// Set when the forward sketch was identically zero.
    pub degenerate: bool,
}

/// XDiag diagonal estimator (`p` forward + `p` adjoint MVPs).
///
/// The top space `Q` of `Y = AΩ` is handled exactly through the adjoint
/// measurement `Z = AᵀQ`; the remainder is estimated Girard–Hutchinson style
/// with the same probes. Each probe is paired with the top space of the other
/// `p − 1` probes (the exchangeable leave-one-out scheme), which keeps the
/// estimate unbiased. If `Y` is rank deficient the leave-one-out spaces all
/// coincide with `range(Y)` and the estimator reduces to a plain projection.
pub fn xdiag<A: LinOp + ?Sized>(a: &A, omega: &SketchPair) -> Result<DiagEstimate> {
    let om = &omega.omega;
    let (n, p) = om.shape();
    let y = forward_measure(a, om)?.matrix;

    let (q0, r) = thin_qr(&y);
    let r_svd = thin_svd(&r)?;
    let s_max = r_svd.s.iter().cloned().fold(0.0, f64::max);
    let q = &q0 * &r_svd.u;
    let z = adjoint_measure(a, &q)?.matrix;

    if s_max == 0.0 {
        return Ok(DiagEstimate {
            d: Vector::zeros(n),
            q,
            forward: y,
            degenerate: true,
        });
    }

    let cut = pinv_cutoff(n, p, s_max);
    let rank = r_svd.s.iter().filter(|&&s| s > cut).count();
    let pf = p as f64;

    let d = if rank == r_svd.s.len() && rank == p {
        // R̃ = Σ Vᵀ in the rotated basis, so R̃⁻ᵀ = Σ⁻¹ Vᵀ.
        let mut s_mat = r_svd.vt.clone();
        for (i, mut row) in s_mat.row_iter_mut().enumerate() {
            row /= r_svd.s[i];
        }
        for mut col in s_mat.column_iter_mut() {
            let norm = col.norm();
            col /= norm;
        }
        let psi = Mat::identity(p, p) - &s_mat * s_mat.transpose() / pf;
        let top = row_sums(&(&q * psi).component_mul(&z));

        let t = z.tr_mul(om);
        let residual = &y - &q * &t;
        let sts = s_mat.tr_mul(&t);
        let mut correction = &q * &s_mat;
        for (j, mut col) in correction.column_iter_mut().enumerate() {
            col *= sts[(j, j)];
        }
        top + row_sums(&om.component_mul(&(residual + correction))) / pf
    } else {
        let qr = q.columns(0, rank);
        let zr = z.columns(0, rank);
        let top = row_sums(&qr.component_mul(&zr));
        let residual = &y - qr * zr.tr_mul(om);
        top + row_sums(&om.component_mul(&residual)) / pf
    };

    Ok(DiagEstimate {
        d,
        q: q.columns(0, rank).into_owned(),
        forward: y,
        degenerate: false,
    })
}

/// Girard–Hutchinson diagonal estimate `(1/p)(Γ ∘ BΓ)1`.
pub fn hutchinson_diagonal<B: LinOp + ?Sized>(b: &B, gamma: &SketchPair) -> Result<Vector> {
    let bg = b.apply(&gamma.omega)?;
    Ok(row_sums(&gamma.omega.component_mul(&bg)) / gamma.width() as f64)
}

/// Low rank first (SSVD), then a Girard–Hutchinson estimate of the diagonal
/// of the implicitly deflated residual `A − UΣVᵀ`. Passing `gamma = None`
/// skips the diagonal round and returns the bare SSVD.
pub fn lor_then_d<A: LinOp + ?Sized>(
    a: &A,
    omega: &SketchPair,
    upsilon: &SketchPair,
    gamma: Option<&SketchPair>,
    recovery: Recovery,
    core: Option<CoreSketches<'_>>,
) -> Result<LordOp> {
    let factors = ssvd(a, omega, upsilon, recovery, core)?;
    let Some(gamma) = gamma else {
        return Ok(LordOp::from_factors(factors));
    };
    let residual = DeflatedOp::new(a, &factors)?;
    let d = hutchinson_diagonal(&residual, gamma)?;
    LordOp::new(factors, d)
}

/// Diagonal first (XDiag), then a low-rank recovery of `A − diag(d)`. The
/// forward sketch from XDiag is reused, so only one more (adjoint) round is spent.
pub fn d_then_lor<A: LinOp + ?Sized>(
    a: &A,
    omega: &SketchPair,
    upsilon: &SketchPair,
    recovery: Recovery,
    core: Option<CoreSketches<'_>>,
) -> Result<LordOp> {
    let est = xdiag(a, omega)?;
    let m = &est.forward - scale_rows(&est.d, &omega.omega);
    let deflated = DeflatedOp::new(a, DiagonalOp::new(est.d.clone()))?;
    let w = adjoint_measure(&deflated, &upsilon.omega)?.matrix;
    let factors = recover(recovery, &deflated, &m, &omega.omega, &w, core)?;
    LordOp::new(factors, est.d)
}
