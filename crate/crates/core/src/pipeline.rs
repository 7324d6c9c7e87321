//! One call per (method, recovery, budget): draws the seeded sketches, runs the
//! method and reports what it spent.

use crate::admm::{sketchlord, AdmmConfig, AdmmTrace};
use crate::baselines::{d_then_lor, lor_then_d, ssvd, xdiag};
use crate::error::Result;
use crate::linop::{CountingOp, LinOp, LordOp};
use crate::method::{Method, Recovery};
use crate::recovery::CoreSketches;
use crate::sketch::{make_rademacher, stream, width_for_budget, SketchPair};

#[derive(Debug, Clone)]
pub struct MethodOutput {
    pub approx: LordOp,
    /// Per-round sketch width.
    pub width: usize,
    /// Operator MVPs actually spent, counted at the operator.
    pub mvp_cost: usize,
    pub trace: Option<AdmmTrace>,
}

/// All sketches a run may need, drawn from `seed` on fixed streams.
pub struct SketchSet {
    pub omega: SketchPair,
    pub upsilon: SketchPair,
    pub gamma: SketchPair,
    pub omega_core: SketchPair,
    pub upsilon_core: SketchPair,
}

impl SketchSet {
    pub fn new(n: usize, width: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            omega: make_rademacher(n, width, seed, stream::OMEGA)?,
            upsilon: make_rademacher(n, width, seed, stream::UPSILON)?,
            gamma: make_rademacher(n, width, seed, stream::GAMMA)?,
            omega_core: make_rademacher(n, 2 * width, seed, stream::OMEGA_CORE)?,
            upsilon_core: make_rademacher(n, 2 * width, seed, stream::UPSILON_CORE)?,
        })
    }

    fn core(&self) -> CoreSketches<'_> {
        CoreSketches {
            omega: &self.omega_core,
            upsilon: &self.upsilon_core,
        }
    }
}

/// Runs `method` with the largest sketch width whose total cost fits `budget`.
pub fn run_method<A: LinOp + ?Sized>(
    a: &A,
    method: Method,
    recovery: Recovery,
    budget: usize,
    seed: u64,
    cfg: &AdmmConfig,
) -> Result<MethodOutput> {
    let width = width_for_budget(method, recovery, budget)?;
    let sketches = SketchSet::new(a.rows(), width, seed)?;
    let counted = CountingOp::new(a);
    let core = (recovery == Recovery::Oversampled).then(|| sketches.core());
    let (s, mut trace) = (&sketches, None);
    let approx = match method {
        Method::Ssvd => LordOp::from_factors(ssvd(&counted, &s.omega, &s.upsilon, recovery, core)?),
        Method::Xdiag => LordOp::from_diagonal(xdiag(&counted, &s.omega)?.d),
        Method::LorThenD => lor_then_d(&counted, &s.omega, &s.upsilon, Some(&s.gamma), recovery, core)?,
        Method::DThenLor => d_then_lor(&counted, &s.omega, &s.upsilon, recovery, core)?,
        Method::Sketchlord => {
            let (approx, t) = sketchlord(&counted, &s.omega, &s.upsilon, cfg, recovery, core)?;
            trace = Some(t);
            approx
        }
    };
    Ok(MethodOutput {
        approx,
        width,
        mvp_cost: counted.total(),
        trace,
    })
}
