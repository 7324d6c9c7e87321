//! Joint low-rank plus diagonal recovery by sketched nuclear-norm minimisation.
//!
//! With `M = (AΩ) ∘ Ω̄` and `A = L + diag(d)`, every row of `M − (LΩ) ∘ Ω̄` is
//! constant (it equals `d 1ᵀ`). Centring the rows removes the diagonal, which
//! leaves a constraint on `X = LΩ` alone. The solver minimises
//!
//! ```text
//! ½ ‖(M − X ∘ Ω̄)(I − 11ᵀ/p)‖²_F + λ ‖X‖_*
//! ```
//!
//! by projected gradient steps with momentum, starting from the zero-loss point
//! `X = M ∘ Ω`. Once `X` is found the diagonal is the row mean of
//! `M − X ∘ Ω̄`, and `L` is recovered from `X` together with deflated adjoint
//! measurements `Aᵀ Υ − diag(d) Υ`.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{LordError, Result};
use crate::linalg::{center_rows, frob2, is_finite, row_sums, thin_svd, Mat, Vector};
use crate::linop::{DeflatedOp, DiagonalOp, LinOp, LordOp};
use crate::method::Recovery;
use crate::recovery::{recover, CoreSketches};
use crate::sketch::{adjoint_measure, lord_measure, SketchPair};

/// Momentum flavour, with velocity `v = X_t − X_{t−1}`.
///
/// * `Nesterov`: `Y = X + μ v`, then `X ← P_λ(Y − η ∇ℒ₂(Y))`.
/// * `HeavyBall`: `X ← P_λ(X − η ∇ℒ₂(X) + μ v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Momentum {
    #[default]
    Nesterov,
    HeavyBall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmConfig {
    /// Gradient step size, `0 < eta < 2`.
    pub eta: f64,
    /// Absolute singular-value shrinkage threshold per iteration.
    pub lambda: f64,
    /// Momentum in `[0, 1)`.
    pub mu: f64,
    pub momentum: Momentum,
    /// Decay of the moving average of `|Δ‖X‖_*|`.
    pub ema_decay: f64,
    /// Stop once the moving average drops below `ema_tol * ‖X‖_*`.
    pub ema_tol: f64,
    /// Iterations before the early-termination test is armed.
    pub warmup: usize,
    pub max_iters: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            eta: 1.0,
            lambda: 0.0125,
            mu: 0.95,
            momentum: Momentum::Nesterov,
            ema_decay: 0.9,
            ema_tol: 1e-5,
            warmup: 10,
            max_iters: 5000,
        }
    }
}

impl AdmmConfig {
    pub fn with_step(mut self, eta: f64, lambda: f64, mu: f64) -> Self {
        self.eta = eta;
        self.lambda = lambda;
        self.mu = mu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LordError::Config(msg));
        if !(self.eta > 0.0 && self.eta < 2.0) {
            return bad(format!("eta must lie in (0, 2), got {}", self.eta));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return bad(format!("mu must lie in [0, 1), got {}", self.mu));
        }
        if !(self.ema_decay > 0.0 && self.ema_decay < 1.0) {
            return bad(format!("ema_decay must lie in (0, 1), got {}", self.ema_decay));
        }
        if self.ema_tol.is_nan() || self.ema_tol <= 0.0 {
            return bad(format!("ema_tol must be positive, got {}", self.ema_tol));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub l2_loss: f64,
    pub nuclear_norm: f64,
    pub ema: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    EarlyStop,
    FixedPoint,
    MaxIters,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmTrace {
    pub records: Vec<IterRecord>,
    pub iterations: usize,
    pub termination: Termination,
}

impl AdmmTrace {
    /// One line per iteration: `iter,l2_loss,nuclear_norm,ema,elapsed_s`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,l2_loss,nuclear_norm,ema,elapsed_s")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:.6}",
                r.iter, r.l2_loss, r.nuclear_norm, r.ema, r.elapsed_s
            )?;
        }
        Ok(())
    }

    pub fn final_nuclear_norm(&self) -> Option<f64> {
        self.records.last().map(|r| r.nuclear_norm)
    }
}

fn check_same_shape(context: &'static str, a: &Mat, b: &Mat) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(LordError::shape(context, a.shape(), b.shape()));
    }
    Ok(())
}

/// `½ ‖(M − X ∘ Ω̄)(I − 11ᵀ/p)‖²_F`.
pub fn l2_loss(x: &Mat, m: &Mat, omega_bar: &Mat) -> Result<f64> {
    check_same_shape("l2_loss", m, x)?;
    check_same_shape("l2_loss", m, omega_bar)?;
    Ok(0.5 * frob2(&center_rows(&(m - x.component_mul(omega_bar)))))
}

/// `[((X ∘ Ω̄) − M)(I − 11ᵀ/p)] ∘ Ω̄`.
pub fn l2_gradient(x: &Mat, m: &Mat, omega_bar: &Mat) -> Result<Mat> {
    check_same_shape("l2_gradient", m, x)?;
    check_same_shape("l2_gradient", m, omega_bar)?;
    Ok(center_rows(&(x.component_mul(omega_bar) - m)).component_mul(omega_bar))
}

/// Soft-thresholds the singular values of `x`. Returns the shrunk matrix and
/// its nuclear norm.
pub fn spectral_shrink(x: &Mat, threshold: f64) -> Result<(Mat, f64)> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(LordError::InvalidInput(format!(
            "shrinkage threshold must be non-negative, got {threshold}"
        )));
    }
    let svd = thin_svd(x)?;
    if threshold == 0.0 {
        return Ok((x.clone(), svd.s.sum()));
    }
    let kept = svd.s.iter().take_while(|&&s| s > threshold).count();
    let mut u = svd.u.columns(0, kept).into_owned();
    let mut nuclear = 0.0;
    for (j, mut col) in u.column_iter_mut().enumerate() {
        let s = svd.s[j] - threshold;
        nuclear += s;
        col *= s;
    }
    Ok((u * svd.vt.rows(0, kept), nuclear))
}

/// `X = M ∘ Ω`, the zero-loss point of the measurement fit.
pub fn optimal_init(m: &Mat, omega: &Mat) -> Result<Mat> {
    check_same_shape("optimal_init", m, omega)?;
    Ok(m.component_mul(omega))
}

/// `d = (1/p) (M − X ∘ Ω̄) 1`.
pub fn recover_diagonal(m: &Mat, x: &Mat, omega_bar: &Mat) -> Result<Vector> {
    check_same_shape("recover_diagonal", m, x)?;
    check_same_shape("recover_diagonal", m, omega_bar)?;
    Ok(row_sums(&(m - x.component_mul(omega_bar))) / m.ncols() as f64)
}

/// Blow-up factor, relative to `½‖M‖²_F`, at which the loss counts as diverged.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Momentum-accelerated projected gradient on the sketched Lagrangian,
/// started from [`optimal_init`].
pub fn admm_solve(m: &Mat, omega: &Mat, omega_bar: &Mat, cfg: &AdmmConfig) -> Result<(Mat, AdmmTrace)> {
    cfg.validate()?;
    check_same_shape("admm_solve", m, omega)?;
    check_same_shape("admm_solve", m, omega_bar)?;
    if !is_finite(m) {
        return Err(LordError::InvalidInput("non-finite measurements".into()));
    }

    let start = Instant::now();
    let mut x = optimal_init(m, omega)?;
    let mut velocity = Mat::zeros(m.nrows(), m.ncols());
    let mut nuc_prev = thin_svd(&x)?.s.sum();
    let loss_scale = 0.5 * frob2(m);
    let mut ema = 0.0;
    let mut trace = AdmmTrace {
        records: Vec::new(),
        iterations: 0,
        termination: Termination::MaxIters,
    };

    for iter in 1..=cfg.max_iters {
        let candidate = match cfg.momentum {
            Momentum::Nesterov => {
                let look = &x + &velocity * cfg.mu;
                let grad = l2_gradient(&look, m, omega_bar)?;
                look - grad * cfg.eta
            }
            Momentum::HeavyBall => {
                let grad = l2_gradient(&x, m, omega_bar)?;
                &x - grad * cfg.eta + &velocity * cfg.mu
            }
        };

        if !is_finite(&candidate) {
            trace.iterations = iter;
            trace.termination = Termination::Diverged;
            return Err(LordError::Diverged {
                iteration: iter,
                reason: "non-finite iterate".into(),
                trace: Box::new(trace),
            });
        }
        let (x_new, nuc) = spectral_shrink(&candidate, cfg.lambda)?;
        let loss = l2_loss(&x_new, m, omega_bar)?;

        let delta = (nuc - nuc_prev).abs();
        ema = if iter == 1 {
            delta
        } else {
            cfg.ema_decay * ema + (1.0 - cfg.ema_decay) * delta
        };
        trace.records.push(IterRecord {
            iter,
            l2_loss: loss,
            nuclear_norm: nuc,
            ema,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
        trace.iterations = iter;

        if !loss.is_finite() || loss > DIVERGENCE_FACTOR * loss_scale.max(f64::MIN_POSITIVE) {
            trace.termination = Termination::Diverged;
            return Err(LordError::Diverged {
                iteration: iter,
                reason: format!("loss {loss:e} exceeded {DIVERGENCE_FACTOR:e} x {loss_scale:e}"),
                trace: Box::new(trace),
            });
        }

        velocity = &x_new - &x;
        let moved = frob2(&velocity);
        x = x_new;
        nuc_prev = nuc;
        if moved <= (f64::EPSILON * f64::EPSILON) * frob2(&x) {
            trace.termination = Termination::FixedPoint;
            break;
        }
        if iter >= cfg.warmup && ema <= cfg.ema_tol * nuc {
            trace.termination = Termination::EarlyStop;
            break;
        }
    }
    Ok((x, trace))
}

/// Full joint recovery: one lord measurement round, the ADMM solve, diagonal
/// isolation, one deflated adjoint round and a low-rank recovery from `X`.
/// Never forms an `N×N` matrix.
pub fn sketchlord<A: LinOp + ?Sized>(
    a: &A,
    omega: &SketchPair,
    upsilon: &SketchPair,
    cfg: &AdmmConfig,
    recovery: Recovery,
    core: Option<CoreSketches<'_>>,
) -> Result<(LordOp, AdmmTrace)> {
    if omega.omega.shape() != upsilon.omega.shape() {
        return Err(LordError::shape(
            "sketchlord",
            omega.omega.shape(),
            upsilon.omega.shape(),
        ));
    }
    let m = lord_measure(a, omega)?.matrix;
    let (x, trace) = admm_solve(&m, &omega.omega, &omega.omega_bar, cfg)?;
    let d = recover_diagonal(&m, &x, &omega.omega_bar)?;
    let deflated = DeflatedOp::new(a, DiagonalOp::new(d.clone()))?;
    let w = adjoint_measure(&deflated, &upsilon.omega)?.matrix;
    let factors = recover(recovery, &deflated, &x, &omega.omega, &w, core)?;
    Ok((LordOp::new(factors, d)?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::{make_rademacher, stream};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn omega(n: usize, p: usize, seed: u64) -> SketchPair {
        make_rademacher(n, p, seed, stream::OMEGA).unwrap()
    }

    #[test]
    fn loss_is_zero_at_optimal_init() {
        let s = omega(10, 4, 1);
        let m = gaussian(10, 4, 2);
        let x = optimal_init(&m, &s.omega).unwrap();
        assert_eq!(x.component_mul(&s.omega_bar), m);
        assert!(l2_loss(&x, &m, &s.omega_bar).unwrap() <= 1e-24 * frob2(&m));
        assert!(l2_gradient(&x, &m, &s.omega_bar).unwrap().amax() == 0.0);
        assert_eq!(optimal_init(&Mat::zeros(10, 4), &s.omega).unwrap(), Mat::zeros(10, 4));
    }

    #[test]
    fn centering_annihilates_pure_diagonal_measurements() {
        let s = omega(6, 5, 3);
        let d = Vector::from_vec(vec![1.0, -2.0, 0.5, 4.0, 3.0, -1.0]);
        let m = Mat::from_fn(6, 5, |i, _| d[i]);
        assert_abs_diff_eq!(l2_loss(&Mat::zeros(6, 5), &m, &s.omega_bar).unwrap(), 0.0, epsilon = 1e-24);
    }

    #[test]
    fn centered_measurements_give_half_squared_norm() {
        let s = omega(5, 4, 4);
        let m = center_rows(&gaussian(5, 4, 5));
        let loss = l2_loss(&Mat::zeros(5, 4), &m, &s.omega_bar).unwrap();
        assert_abs_diff_eq!(loss, 0.5 * frob2(&m), epsilon = 1e-12);
    }

    #[test]
    fn gradient_vanishes_on_sign_matrix_with_zero_measurements() {
        let s = omega(7, 3, 6);
        let g = l2_gradient(&s.omega, &Mat::zeros(7, 3), &s.omega_bar).unwrap();
        assert!(g.amax() < 1e-15);
    }

    #[test]
    fn shrink_examples() {
        let mut x = Mat::zeros(5, 3);
        x[(0, 0)] = 3.0;
        x[(1, 1)] = 1.0;
        x[(2, 2)] = 0.5;
        let (y, nuc) = spectral_shrink(&x, 1.0).unwrap();
        let s = thin_svd(&y).unwrap().s;
        assert_abs_diff_eq!(s[0], 2.0, epsilon = 1e-12);
        assert!(s[1] < 1e-12 && s[2] < 1e-12);
        assert_abs_diff_eq!(nuc, 2.0, epsilon = 1e-12);

        let (same, nuc0) = spectral_shrink(&x, 0.0).unwrap();
        assert_eq!(same, x);
        assert_abs_diff_eq!(nuc0, 4.5, epsilon = 1e-12);

        let (zero, nuc_z) = spectral_shrink(&x, 3.5).unwrap();
        assert_eq!(zero.amax(), 0.0);
        assert_eq!(nuc_z, 0.0);
        assert!(spectral_shrink(&x, -1.0).is_err());
    }

    #[test]
    fn diagonal_recovery_cases() {
        let n = 32;
        let p = 8;
        let s = omega(n, p, 7);
        let l = gaussian(n, 2, 8) * gaussian(2, n, 9);
        let d = gaussian(n, 1, 10).column(0).into_owned();
        let a = &l + Mat::from_diagonal(&d);
        let m = (&a * &s.omega).component_mul(&s.omega_bar);
        let x = &l * &s.omega;
        let rec = recover_diagonal(&m, &x, &s.omega_bar).unwrap();
        assert_abs_diff_eq!((rec - &d).amax(), 0.0, epsilon = 1e-10);

        let md = (Mat::from_diagonal(&d) * &s.omega).component_mul(&s.omega_bar);
        let rec = recover_diagonal(&md, &Mat::zeros(n, p), &s.omega_bar).unwrap();
        assert_abs_diff_eq!((rec - &d).amax(), 0.0, epsilon = 1e-12);

        let xr = gaussian(n, p, 11);
        let mr = xr.component_mul(&s.omega_bar);
        assert!(recover_diagonal(&mr, &xr, &s.omega_bar).unwrap().amax() == 0.0);
    }

    #[test]
    fn zero_lambda_zero_mu_is_a_fixed_point() {
        let s = omega(12, 4, 12);
        let m = gaussian(12, 4, 13);
        let cfg = AdmmConfig::default().with_step(1.0, 0.0, 0.0);
        let (x, trace) = admm_solve(&m, &s.omega, &s.omega_bar, &cfg).unwrap();
        assert_eq!(trace.termination, Termination::FixedPoint);
        assert_eq!(trace.iterations, 1);
        assert_eq!(x, optimal_init(&m, &s.omega).unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(AdmmConfig::default().validate().is_ok());
        assert!(AdmmConfig::default().with_step(2.0, 0.01, 0.9).validate().is_err());
        assert!(AdmmConfig::default().with_step(1.0, -0.1, 0.9).validate().is_err());
        assert!(AdmmConfig::default().with_step(1.0, 0.1, 1.0).validate().is_err());
        let cfg = AdmmConfig { max_iters: 0, ..AdmmConfig::default() };
        assert!(matches!(cfg.validate(), Err(LordError::Config(_))));
    }

    #[test]
    fn trace_csv_has_one_line_per_iteration() {
        let s = omega(20, 6, 14);
        let m = gaussian(20, 6, 15);
        let cfg = AdmmConfig { max_iters: 7, warmup: 100, ..AdmmConfig::default() };
        let (_, trace) = admm_solve(&m, &s.omega, &s.omega_bar, &cfg).unwrap();
        assert_eq!(trace.termination, Termination::MaxIters);
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 8);
        assert!(text.starts_with("iter,l2_loss,nuclear_norm,ema,elapsed_s"));
    }

    #[test]
    fn non_finite_measurements_are_rejected() {
        let s = omega(5, 2, 16);
        let mut m = gaussian(5, 2, 17);
        m[(0, 0)] = f64::INFINITY;
        assert!(admm_solve(&m, &s.omega, &s.omega_bar, &AdmmConfig::default()).is_err());
    }
}
