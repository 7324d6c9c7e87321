//! Relative residual energies and closed-form bounds for the `11ᵀ + I` toy.

use serde::{Deserialize, Serialize};

use crate::error::{LordError, Result};
use crate::linalg::{Mat, Vector};
use crate::linop::LinOp;

/// Columns per block in the exact sweep.
const SWEEP_BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub rho_total: f64,
    pub rho_diag: f64,
    pub mvp_cost: usize,
    pub iterations: Option<usize>,
    pub runtime_s: f64,
}

/// Squared error sums accumulated over a column sweep.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorEnergies {
    pub ref_total: f64,
    pub err_total: f64,
    pub ref_diag: f64,
    pub err_diag: f64,
}

impl ErrorEnergies {
    pub fn rho_total(&self) -> Result<f64> {
        if self.ref_total == 0.0 {
            return Err(LordError::UndefinedMetric("reference has zero Frobenius norm"));
        }
        Ok(self.err_total / self.ref_total)
    }

    pub fn rho_diag(&self) -> Result<f64> {
        if self.ref_diag == 0.0 {
            return Err(LordError::UndefinedMetric("reference has zero diagonal"));
        }
        Ok(self.err_diag / self.ref_diag)
    }
}

/// Exact sweep over blocks of identity columns: `N` MVPs on each operator,
/// never more than `N × 64` entries in memory.
pub fn error_energies<A: LinOp + ?Sized, B: LinOp + ?Sized>(reference: &A, approx: &B) -> Result<ErrorEnergies> {
    if reference.shape() != approx.shape() {
        return Err(LordError::shape("residual_energy", reference.shape(), approx.shape()));
    }
    let (rows, cols) = reference.shape();
    let mut acc = ErrorEnergies::default();
    let mut start = 0;
    while start < cols {
        let width = SWEEP_BLOCK.min(cols - start);
        let mut block = Mat::zeros(cols, width);
        for j in 0..width {
            block[(start + j, j)] = 1.0;
        }
        let a = reference.apply(&block)?;
        let b = approx.apply(&block)?;
        for j in 0..width {
            for i in 0..rows {
                let (x, y) = (a[(i, j)], b[(i, j)]);
                acc.ref_total += x * x;
                acc.err_total += (x - y) * (x - y);
                if i == start + j {
                    acc.ref_diag += x * x;
                    acc.err_diag += (x - y) * (x - y);
                }
            }
        }
        start += width;
    }
    Ok(acc)
}

/// `‖A − Â‖²_F / ‖A‖²_F`.
pub fn residual_energy<A: LinOp + ?Sized, B: LinOp + ?Sized>(reference: &A, approx: &B) -> Result<f64> {
    error_energies(reference, approx)?.rho_total()
}

/// `‖diag(A) − diag(Â)‖² / ‖diag(A)‖²`.
pub fn diag_residual_energy(reference: &Vector, estimate: &Vector) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(LordError::shape(
            "diag_residual_energy",
            (reference.len(), 1),
            (estimate.len(), 1),
        ));
    }
    let denom = reference.norm_squared();
    if denom == 0.0 {
        return Err(LordError::UndefinedMetric("reference has zero diagonal"));
    }
    Ok((reference - estimate).norm_squared() / denom)
}

/// Best achievable residual energies on `11ᵀ + I` of size `N`, given rank `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyBounds {
    /// Exact diagonal only.
    pub rho_d: f64,
    /// Best rank-`k` approximation.
    pub rho_lor: f64,
    /// Exact diagonal, then best rank-`k` of the remainder.
    pub rho_d_then_lor: f64,
    /// Best rank-`k`, then exact diagonal of the remainder.
    pub rho_lor_then_d: f64,
}

pub fn toy_bounds(n: usize, k: usize) -> Result<ToyBounds> {
    if n == 0 || k == 0 || k > n {
        return Err(LordError::Domain(format!("need 1 <= k <= N, got N = {n}, k = {k}")));
    }
    let nf = n as f64;
    let r = k as f64 / nf;
    let denom = nf + 3.0;
    let rho_lor = (1.0 - r) / denom;
    Ok(ToyBounds {
        rho_d: (nf - 1.0) / denom,
        rho_lor,
        rho_d_then_lor: rho_lor,
        rho_lor_then_d: (r - r * r) / denom,
    })
}
