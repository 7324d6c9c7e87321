//! Sketched, matrix-free approximation of square operators as low-rank plus
//! diagonal (`A ≈ U Σ Vᵀ + diag(d)`), with the sketched SVD, XDiag and
//! sequential baselines it is compared against.
//!
//! ```
//! use sketchlord::{sketchlord, make_rademacher, stream, toy_operator, residual_energy};
//! use sketchlord::{AdmmConfig, Recovery};
//!
//! let a = toy_operator(60).unwrap();
//! let omega = make_rademacher(60, 12, 7, stream::OMEGA).unwrap();
//! let upsilon = make_rademacher(60, 12, 7, stream::UPSILON).unwrap();
//! let (approx, _trace) =
//!     sketchlord(&a, &omega, &upsilon, &AdmmConfig::default(), Recovery::Compact, None).unwrap();
//! assert!(residual_energy(&a, &approx).unwrap() < 1e-2);
//! ```

pub mod admm;
pub mod baselines;
pub mod error;
pub mod linalg;
pub mod linop;
pub mod method;
pub mod metrics;
pub mod pipeline;
pub mod recovery;
pub mod sketch;
pub mod synthgen;

pub use admm::{
    admm_solve, l2_gradient, l2_loss, optimal_init, recover_diagonal, sketchlord, spectral_shrink,
    AdmmConfig, AdmmTrace, IterRecord, Momentum, Termination,
};
pub use baselines::{d_then_lor, hutchinson_diagonal, lor_then_d, ssvd, xdiag, DiagEstimate};
pub use error::{LordError, Result};
pub use linalg::{Mat, Vector};
pub use linop::{CountingOp, DeflatedOp, DenseOp, DiagonalOp, IdentityOp, LinOp, LordOp};
pub use method::{Method, Recovery};
pub use metrics::{diag_residual_energy, error_energies, residual_energy, toy_bounds, RecoveryReport, ToyBounds};
pub use pipeline::{run_method, MethodOutput, SketchSet};
pub use recovery::{recover, CoreSketches, SvdFactors};
pub use sketch::{lord_measure, make_rademacher, mvp_cost, stream, width_for_budget, SketchPair};
pub use synthgen::{gen_lowrank, mix_diagonal, sample, toy_operator, Family, LordSample, OnesPlusIdentity, SynthSpec};

/// Result of a joint recovery: SVD factors plus an explicit diagonal.
pub type LordApprox = LordOp;
