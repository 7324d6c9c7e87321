//! Seeded Rademacher sketches, the three measurement primitives and the
//! measurement-budget bookkeeping used to compare methods at equal cost.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LordError, Result};
use crate::linop::LinOp;
use crate::linalg::Mat;
use crate::method::{Method, Recovery};

/// Stream ids for the independent sketches a single run may draw.
pub mod stream {
    pub const OMEGA: u64 = 0;
    pub const UPSILON: u64 = 1;
    pub const GAMMA: u64 = 2;
    pub const OMEGA_CORE: u64 = 3;
    pub const UPSILON_CORE: u64 = 4;
}

/// Sign matrix `omega` with its entrywise inverse `omega_bar`
/// (`omega ∘ omega_bar = 11ᵀ`). For real Rademacher sketches they coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchPair {
    pub omega: Mat,
    pub omega_bar: Mat,
    pub seed: u64,
    pub stream: u64,
}

impl SketchPair {
    pub fn n(&self) -> usize {
        self.omega.nrows()
    }

    pub fn width(&self) -> usize {
        self.omega.ncols()
    }
}

/// i.i.d. ±1 entries from a ChaCha8 stream keyed by `(seed, stream)`.
/// Regeneration with the same arguments is bit-identical.
pub fn make_rademacher(n: usize, p: usize, seed: u64, stream: u64) -> Result<SketchPair> {
    if n == 0 || p == 0 {
        return Err(LordError::shape("make_rademacher", (n.max(1), p.max(1)), (n, p)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let total = n * p;
    let mut data = Vec::with_capacity(total);
    while data.len() < total {
        let mut bits = rng.next_u64();
        for _ in 0..64.min(total - data.len()) {
            data.push(if bits & 1 == 1 { 1.0 } else { -1.0 });
            bits >>= 1;
        }
    }
    let omega = Mat::from_vec(n, p, data);
    Ok(SketchPair {
        omega_bar: omega.clone(),
        omega,
        seed,
        stream,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementKind {
    Forward,
    Adjoint,
    Lord,
}

/// Measurements of an operator along with the number of MVPs they cost.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub matrix: Mat,
    pub kind: MeasurementKind,
    pub mvp_cost: usize,
}

/// `M = (A Ω) ∘ Ω̄`. Only defined for square operators.
pub fn lord_measure<A: LinOp + ?Sized>(a: &A, s: &SketchPair) -> Result<MeasurementSet> {
    if a.rows() != a.cols() {
        return Err(LordError::Unsupported(format!(
            "lord measurements need a square operator, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let y = a.apply(&s.omega)?;
    Ok(MeasurementSet {
        matrix: y.component_mul(&s.omega_bar),
        kind: MeasurementKind::Lord,
        mvp_cost: s.width(),
    })
}

/// `M = A Ω`.
pub fn forward_measure<A: LinOp + ?Sized>(a: &A, omega: &Mat) -> Result<MeasurementSet> {
    Ok(MeasurementSet {
        matrix: a.apply(omega)?,
        kind: MeasurementKind::Forward,
        mvp_cost: omega.ncols(),
    })
}

/// `W = Aᵀ Υ`, i.e. the transpose of the row sketch `Υᵀ A`.
pub fn adjoint_measure<A: LinOp + ?Sized>(a: &A, upsilon: &Mat) -> Result<MeasurementSet> {
    Ok(MeasurementSet {
        matrix: a.adjoint_apply(upsilon)?,
        kind: MeasurementKind::Adjoint,
        mvp_cost: upsilon.ncols(),
    })
}

/// Total operator MVPs a configuration spends at per-round sketch `width`.
///
/// Two-round methods (ssvd, xdiag, sketchlord) spend `2·width`, the sequential
/// baselines `3·width`. Oversampled recovery adds a core sketch of width
/// `2·width`. XDiag has no recovery step.
pub fn mvp_cost(method: Method, recovery: Recovery, width: usize) -> Result<usize> {
    if width == 0 {
        return Err(LordError::Config("sketch width must be positive".into()));
    }
    let core = if recovery == Recovery::Oversampled && method.uses_recovery() {
        2 * width
    } else {
        0
    };
    Ok(method.rounds() * width + core)
}

/// Largest per-round width whose [`mvp_cost`] fits in `budget`.
pub fn width_for_budget(method: Method, recovery: Recovery, budget: usize) -> Result<usize> {
    let per_unit = mvp_cost(method, recovery, 1)?;
    let width = budget / per_unit;
    if width == 0 {
        return Err(LordError::Config(format!(
            "budget {budget} is too small for {method}/{recovery} (needs at least {per_unit})"
        )));
    }
    Ok(width)
}
