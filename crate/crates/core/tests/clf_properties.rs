mod common;

use std::sync::Arc;

use common::{grid_min_planar, grid_step, rng, uniform};
use polystab::builtin;
use polystab::clf::{self, grid_points, LyapunovCandidate, SCP_TOL};
use polystab::gauge::{triangle_box, triangle_gauge, Hyperbox};
use polystab::stabilizer::StabilizerParams;

fn grid_without_origin(half: f64, count: usize) -> Vec<Vec<f64>> {
    grid_points(&[-half, -half], &[half, half], &[count, count])
        .unwrap()
        .into_iter()
        .filter(|x| x.iter().any(|v| *v != 0.0))
        .collect()
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut r = rng(1);
    let points: Vec<Vec<f64>> = (0..100).map(|_| uniform(&mut r, 2, 5.0)).collect();
    let (_, quad) = builtin::triangle_example_vdot();
    assert!(quad.gradient_error(&points, 1e-5).unwrap() <= 1e-6);

    // a non-quadratic candidate exercises the check for real
    let quartic = LyapunovCandidate::new(
        2,
        Arc::new(|x: &[f64]| 0.5 * x[0] * x[0] + 0.25 * x[1].powi(4) + x[1] * x[1]),
        Arc::new(|x: &[f64]| vec![x[0], x[1].powi(3) + 2.0 * x[1]]),
    )
    .unwrap();
    assert!(quartic.gradient_error(&points, 1e-5).unwrap() <= 1e-6);
    assert!(quartic.is_positive_on(&points).unwrap());

    let wrong = LyapunovCandidate::new(
        2,
        Arc::new(|x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1])),
        Arc::new(|x: &[f64]| vec![x[0], 2.0 * x[1]]),
    )
    .unwrap();
    assert!(wrong.gradient_error(&points, 1e-5).unwrap() > 1e-2);
}

#[test]
fn lie_derivatives_are_linear_in_the_input() {
    let (sys, lyap) = builtin::triangle_example_vdot();
    let mut r = rng(2);
    for _ in 0..100 {
        let x = uniform(&mut r, 2, 5.0);
        let u = uniform(&mut r, 2, 3.0);
        let lie = clf::lie_derivatives(&sys, &lyap, &x).unwrap();
        let lhs = lie.a + lie.beta[0] * u[0] + lie.beta[1] * u[1];
        let g = lyap.gradient(&x).unwrap();
        let v = sys.velocity(&x, &u).unwrap();
        let rhs = g[0] * v[0] + g[1] * v[1];
        assert!((lhs - rhs).abs() <= 1e-10, "{lhs} vs {rhs}");
    }
}

#[test]
fn hand_evaluated_lie_data() {
    let (sys, lyap) = builtin::triangle_example_vdot();
    let mut r = rng(9);
    for _ in 0..50 {
        let x = uniform(&mut r, 2, 4.0);
        let (x1, x2) = (x[0], x[1]);
        let a = x1 * (common::SQRT_3 * x2 / (1.0 + x2 * x2))
            + x2 * (x1 / (1.0 + x1 * x1) + x2 * x2 / (1.0 + x2 * x2));
        let lie = clf::lie_derivatives(&sys, &lyap, &x).unwrap();
        assert!((lie.a - a).abs() <= 1e-12);
        assert_eq!(lie.beta, x);
    }
}

#[test]
fn analytic_box_minimum_matches_brute_force() {
    let (sys, lyap) = builtin::triangle_example_vdot();
    let h = triangle_box();
    let step = grid_step(&h, 200);
    let mut r = rng(4);
    for _ in 0..50 {
        let x = uniform(&mut r, 2, 3.0);
        let lie = clf::lie_derivatives(&sys, &lyap, &x).unwrap();
        let (brute, _) = grid_min_planar(lie.a, &lie.beta, &h, 200);
        let resolution = lie.beta[0].abs() * step[0] + lie.beta[1].abs() * step[1];
        assert!((lie.best_decrease(&h) - brute).abs() <= resolution.max(1e-12));
    }
}

#[test]
fn triangle_example_is_a_box_clf() {
    let (sys, lyap) = builtin::triangle_example_vdot();
    let h = triangle_box();
    let samples = grid_without_origin(3.0, 10);
    assert_eq!(samples.len(), 100);
    let rep = clf::verify_clf(&sys, &lyap, &h, &samples).unwrap();
    assert!(rep.passed(), "{:?}", rep.violations);
    for x in &samples {
        let lie = clf::lie_derivatives(&sys, &lyap, x).unwrap();
        let (brute, _) = grid_min_planar(lie.a, &lie.beta, &h, 200);
        assert!(brute < 0.0, "brute-force oracle disagrees at {x:?}");
    }
}

#[test]
fn drift_variant_fails_away_from_origin() {
    let (sys, lyap) = builtin::triangle_example_f();
    let rep = clf::verify_clf(&sys, &lyap, &triangle_box(), &grid_without_origin(3.0, 10)).unwrap();
    assert!(!rep.passed());
    for v in &rep.violations {
        let (brute, _) = grid_min_planar(v.a, &v.beta, &triangle_box(), 200);
        assert!(brute >= -0.05);
    }
}

#[test]
fn small_box_is_not_enough() {
    let (sys, lyap) = builtin::triangle_example_vdot();
    let small = Hyperbox::symmetric(vec![0.1, 0.1]).unwrap();
    let rep = clf::verify_clf(&sys, &lyap, &small, &grid_without_origin(3.0, 10)).unwrap();
    assert!(!rep.passed());
    for v in &rep.violations {
        let (brute, _) = grid_min_planar(v.a, &v.beta, &small, 200);
        assert!(brute >= 0.0);
    }
}

#[test]
fn triangle_example_has_small_control_property() {
    let (sys, lyap) = builtin::triangle_example_vdot();
    let rep = clf::verify_scp(
        &sys,
        &lyap,
        &triangle_box(),
        &[1.0, 0.1, 0.01, 0.001],
        64,
        SCP_TOL,
    )
    .unwrap();
    assert!(rep.passed(), "{rep:?}");
    let ratios: Vec<f64> = rep.shells.iter().map(|s| s.ratio).collect();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]));
    assert!(ratios[3] < 1e-3);
}

#[test]
fn tradeoff_holds_at_k_equal_m() {
    let (sys, lyap) = builtin::triangle_example_vdot();
    let params = StabilizerParams::new(1.0).unwrap();
    let samples = grid_without_origin(3.0, 10);
    for k in [2.5, 5.0, 1e6] {
        let rep = clf::verify_tradeoff(
            &sys,
            &lyap,
            &triangle_gauge(),
            &triangle_box(),
            &params,
            k,
            &samples,
        )
        .unwrap();
        assert_eq!(rep.box_max, 2.5);
        assert!(rep.passed(), "k = {k}: {:?}", rep.violations);
        assert!(rep.worst_margin < 0.0);
    }
}
