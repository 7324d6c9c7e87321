use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sketchlord::linalg::{frob2, thin_svd};
use sketchlord::*;

fn gaussian(rows: usize, cols: usize, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

fn nuclear(m: &Mat) -> f64 {
    thin_svd(m).unwrap().s.sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjoint_is_consistent(n in 1usize..10, p in 1usize..5, seed in any::<u64>()) {
        let a = DenseOp::new(gaussian(n, n, seed));
        let x = gaussian(n, p, seed ^ 1);
        let y = gaussian(n, p, seed ^ 2);
        let lhs = (a.apply(&x).unwrap().transpose() * &y).trace();
        let rhs = (x.transpose() * a.adjoint_apply(&y).unwrap()).trace();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn deflation_matches_dense_difference(n in 1usize..10, seed in any::<u64>()) {
        let a = gaussian(n, n, seed);
        let d = gaussian(n, 1, seed ^ 3).column(0).into_owned();
        let op = DeflatedOp::new(DenseOp::new(a.clone()), DiagonalOp::new(d.clone())).unwrap();
        let want = &a - Mat::from_diagonal(&d);
        prop_assert!((op.materialize().unwrap() - &want).norm() < 1e-12 * (1.0 + want.norm()));
        let back = op.adjoint_apply(&Mat::identity(n, n)).unwrap();
        prop_assert!((back - want.transpose()).norm() < 1e-12 * (1.0 + want.norm()));
    }

    #[test]
    fn gradient_matches_central_differences(n in 2usize..16, p in 2usize..6, seed in any::<u64>()) {
        let om = make_rademacher(n, p, seed, stream::OMEGA).unwrap();
        let m = gaussian(n, p, seed ^ 4);
        let x = gaussian(n, p, seed ^ 5);
        let g = l2_gradient(&x, &m, &om.omega_bar).unwrap();
        let h = 1e-5;
        let mut fd = Mat::zeros(n, p);
        for i in 0..n {
            for j in 0..p {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[(i, j)] += h;
                xm[(i, j)] -= h;
                fd[(i, j)] = (l2_loss(&xp, &m, &om.omega_bar).unwrap()
                    - l2_loss(&xm, &m, &om.omega_bar).unwrap()) / (2.0 * h);
            }
        }
        let scale = g.norm().max(1e-8);
        prop_assert!((&fd - &g).norm() / scale < 1e-5);
    }

    #[test]
    fn optimal_init_is_feasible(n in 1usize..20, p in 1usize..8, seed in any::<u64>()) {
        let om = make_rademacher(n, p, seed, stream::OMEGA).unwrap();
        let m = gaussian(n, p, seed ^ 6);
        let x = optimal_init(&m, &om.omega).unwrap();
        prop_assert!(l2_loss(&x, &m, &om.omega_bar).unwrap() <= 1e-12 * frob2(&m));
        prop_assert!(x.component_mul(&om.omega_bar) == m);
    }
}

/// Grid search over diagonal candidates for `½‖Y − X‖² + t‖Y‖_*`.
fn diagonal_prox_search(x: &[f64], t: f64) -> f64 {
    let grid: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.1).collect();
    let mut best = f64::INFINITY;
    let objective = |y: &[f64]| -> f64 {
        y.iter().zip(x).map(|(a, b)| 0.5 * (a - b).powi(2) + t * a.abs()).sum()
    };
    let mut y = vec![0.0; x.len()];
    let mut idx = vec![0usize; x.len()];
    loop {
        for (k, &i) in idx.iter().enumerate() {
            y[k] = grid[i];
        }
        best = best.min(objective(&y));
        let mut k = 0;
        while k < idx.len() {
            idx[k] += 1;
            if idx[k] < grid.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == idx.len() {
            return best;
        }
    }
}

#[test]
fn shrink_minimizes_the_prox_objective() {
    let cases: [(&[f64], f64); 4] = [
        (&[3.0, 1.0, 0.5], 1.0),
        (&[2.0, -1.5, 0.3], 0.5),
        (&[0.7, 0.2], 0.3),
        (&[-2.5], 2.0),
    ];
    for (diag, t) in cases {
        let x = Mat::from_diagonal(&Vector::from_column_slice(diag));
        let (y, nuc) = spectral_shrink(&x, t).unwrap();
        let ours = 0.5 * frob2(&(&y - &x)) + t * nuc;
        let searched = diagonal_prox_search(diag, t);
        // The grid contains the exact soft threshold for these inputs.
        assert!(ours <= searched + 1e-12, "{diag:?}: {ours} vs {searched}");
        assert!(searched - ours < 1e-9);
    }
}

fn exp_measurements() -> (Mat, SketchPair) {
    let n = 120;
    let a = sample(&SynthSpec::new(Family::Exp, 0.5, n, 3, 1.0, 21)).unwrap().a;
    let omega = make_rademacher(n, 24, 3, stream::OMEGA).unwrap();
    let m = (&a * &omega.omega).component_mul(&omega.omega_bar);
    (m, omega)
}

#[test]
fn nuclear_norm_is_monotone_without_momentum() {
    let (m, omega) = exp_measurements();
    let cfg = AdmmConfig::default().with_step(1.0, 0.0125, 0.0);
    let (_, trace) = admm_solve(&m, &omega.omega, &omega.omega_bar, &cfg).unwrap();
    let mut prev = nuclear(&optimal_init(&m, &omega.omega).unwrap());
    for r in &trace.records {
        assert!(r.nuclear_norm <= prev * (1.0 + 1e-6), "iter {}: {} > {prev}", r.iter, r.nuclear_norm);
        prev = r.nuclear_norm;
    }
}

#[test]
fn nuclear_norm_settles_monotonically_with_momentum() {
    let (m, omega) = exp_measurements();
    let start = nuclear(&optimal_init(&m, &omega.omega).unwrap());
    for mu in [0.9, 0.95, 0.99] {
        let cfg = AdmmConfig::default().with_step(1.0, 0.0125, mu);
        let (_, trace) = admm_solve(&m, &omega.omega, &omega.omega_bar, &cfg).unwrap();
        let norms: Vec<f64> = trace.records.iter().map(|r| r.nuclear_norm).collect();
        assert!(*norms.last().unwrap() < start);
        let tail = &norms[norms.len() / 2..];
        for w in tail.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6), "mu {mu}: {} > {}", w[1], w[0]);
        }
    }
}

#[test]
fn equal_lambda_over_eta_gives_similar_error() {
    let a = sample(&SynthSpec::new(Family::Exp, 0.5, 200, 5, 1.0, 8)).unwrap().a;
    let op = DenseOp::new(a);
    let run = |eta: f64, lambda: f64| {
        let cfg = AdmmConfig::default().with_step(eta, lambda, 0.95);
        let out = run_method(&op, Method::Sketchlord, Recovery::Compact, 72, 4, &cfg).unwrap();
        residual_energy(&op, &out.approx).unwrap()
    };
    let (big, small) = (run(1.0, 0.0125), run(0.25, 0.003125));
    let ratio = big.max(small) / big.min(small);
    assert!(ratio < 2.0, "{big:e} vs {small:e}");
}

#[test]
fn pure_diagonal_is_recovered() {
    let n = 64;
    let d = gaussian(n, 1, 31).column(0).map(|v| v + 2.0);
    let op = DiagonalOp::new(d.clone());
    let out = run_method(&op, Method::Sketchlord, Recovery::Compact, 24, 2, &AdmmConfig::default()).unwrap();
    assert!(diag_residual_energy(&d, &out.approx.diagonal()).unwrap() < 1e-6);
    let lowrank = out.approx.to_dense() - Mat::from_diagonal(&out.approx.diagonal());
    assert!(lowrank.norm() < 1e-3 * d.norm());
}

#[test]
fn rank_one_is_recovered_exactly_by_ssvd() {
    let n = 50;
    let a = gaussian(n, 1, 40) * gaussian(1, n, 41);
    let op = DenseOp::new(a);
    for recovery in Recovery::ALL {
        let out = run_method(&op, Method::Ssvd, recovery, 24, 0, &AdmmConfig::default()).unwrap();
        assert!(residual_energy(&op, &out.approx).unwrap() < 1e-10, "{recovery}");
    }
}
