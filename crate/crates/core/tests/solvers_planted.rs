mod common;

use nalgebra::DVector;
use sparse_damage::solvers::{
    default_residual_tol, norms, solve_l0, solve_l1_eq, solve_l1_ineq, solve_lp_irls, support,
    IrlsOptions, SparseProblem, SupportThresholds,
};

fn problem(p: &common::Planted) -> SparseProblem<f64> {
    SparseProblem::new(p.a.clone(), p.b.clone()).unwrap()
}

#[test]
fn l1_recovers_planted_two_sparse() {
    let mut hits = 0;
    for seed in 0..200 {
        let p = common::planted(seed, 9, 20, 2);
        let s = solve_l1_eq(&problem(&p)).unwrap();
        if support(&s.x, SupportThresholds::default()) == p.support {
            assert!(common::max_abs_diff(&s.x, &p.x) < 1e-6, "seed {seed}");
            hits += 1;
        }
    }
    assert!(hits >= 190, "{hits}/200");
}

#[test]
fn l0_finds_planted_and_agrees_with_l1() {
    for seed in 0..40 {
        let p = common::planted(seed, 9, 20, 2);
        let prob = problem(&p);
        let l0 = solve_l0(&prob, default_residual_tol(&prob)).unwrap();
        assert_eq!(l0.support, p.support, "seed {seed}");
        assert!(common::max_abs_diff(&l0.x, &p.x) < 1e-8);
        let l1 = solve_l1_eq(&prob).unwrap();
        if l1.support == p.support {
            assert!(common::max_abs_diff(&l0.x, &l1.x) < 1e-6, "seed {seed}");
        }
    }
}

#[test]
fn irls_recovers_planted_two_sparse() {
    let mut hits = 0;
    for seed in 0..200 {
        let p = common::planted(seed, 9, 20, 2);
        let s = solve_lp_irls(&problem(&p), 0.5, &IrlsOptions::default()).unwrap();
        if common::max_abs_diff(&s.x, &p.x) < 1e-5 {
            hits += 1;
        }
    }
    assert!(hits >= 190, "{hits}/200");
}

#[test]
fn surrogate_ordering() {
    // the L1 minimizer can't have a larger L1 norm than any other feasible point
    for seed in 300..330 {
        let p = common::planted(seed, 9, 20, 3);
        let prob = problem(&p);
        let l1 = solve_l1_eq(&prob).unwrap();
        let lp = solve_lp_irls(&prob, 0.5, &IrlsOptions::default()).unwrap();
        let me = sparse_damage::linalg::min_energy_solution(&p.a, &p.b);
        let n1 = norms(&l1.x, 1.0);
        for other in [&p.x, &lp.x, &me] {
            assert!(n1 <= norms(other, 1.0) + 1e-7, "seed {seed}");
        }
    }
}

#[test]
fn l1_ineq_is_feasible_and_monotone_in_epsilon() {
    for seed in 500..520 {
        let (a, b) = common::gaussian(seed, 9, 20);
        let base = SparseProblem::new(a, b).unwrap();
        let mut last = f64::INFINITY;
        for eps in [0.1, 0.2, 0.5, 1.0] {
            let s = solve_l1_ineq(&base.clone().with_epsilon(eps).unwrap()).unwrap();
            assert!(s.residual_norm <= eps * (1.0 + 1e-8));
            assert!(s.objective <= last + 1e-8, "seed {seed} eps {eps}");
            last = s.objective;
        }
    }
}

#[test]
fn l1_ineq_below_bound_returns_zero() {
    let p = common::planted(7, 9, 20, 2);
    let eps = p.b.norm() * 1.01;
    let s = solve_l1_ineq(&problem(&p).with_epsilon(eps).unwrap()).unwrap();
    assert_eq!(s.x, DVector::zeros(20));
}

#[test]
fn solutions_scale_with_right_hand_side() {
    // x(αb) = α x(b) for the equality solvers
    for seed in 700..710 {
        let p = common::planted(seed, 9, 20, 2);
        let prob = problem(&p);
        let scaled = SparseProblem::new(p.a.clone(), &p.b * 3.0).unwrap();
        let x1 = solve_l1_eq(&prob).unwrap().x;
        let x3 = solve_l1_eq(&scaled).unwrap().x;
        assert!(common::max_abs_diff(&(x1 * 3.0), &x3) < 1e-6);
        let l0 = solve_l0(&prob, default_residual_tol(&prob)).unwrap().x;
        let l03 = solve_l0(&scaled, default_residual_tol(&scaled)).unwrap().x;
        assert!(common::max_abs_diff(&(l0 * 3.0), &l03) < 1e-8);
    }
}
