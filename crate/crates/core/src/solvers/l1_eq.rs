//! Basis pursuit as a standard-form LP.
//!
//! `x = u − v` with `u, v ≥ 0` turns `min ‖x‖₁ s.t. Ax = b` into
//! `min 1ᵀz s.t. Bz = b, z ≥ 0` with `B = [A, −A]`. Under the nonpositive
//! sign constraint only `v` is kept (`B = −A`). The LP is solved by an
//! infeasible-start primal-dual path-following method on the normal
//! equations `B D Bᵀ Δy = r`.

use nalgebra::{DMatrix, DVector};

use super::{check_consistent, Feasibility, Method, SignConstraint, SolverError, SparseProblem, SparseSolution};
use crate::linalg::regularized_cholesky;
use crate::scalar::Real;

const MAX_ITERATIONS: usize = 200;
const CENTERING: f64 = 0.1;
const STEP_FRACTION: f64 = 0.99;
const GAP_TOL: f64 = 1e-9;
/// Iterates this large mean the LP is unbounded or infeasible.
const DIVERGENCE: f64 = 1e14;

pub fn solve_l1_eq<T: Real>(problem: &SparseProblem<T>) -> Result<SparseSolution<T>, SolverError> {
    if problem.epsilon.is_some_and(|e| e > T::zero()) {
        return Err(SolverError::InvalidProblem(
            "equality-constrained solve given a positive epsilon".into(),
        ));
    }
    let x_me = check_consistent(problem)?;
    let (m, n) = problem.a.shape();
    let signed = problem.sign_constraint == SignConstraint::Nonpositive;

    let b_mat = if signed {
        -&problem.a
    } else {
        let mut b = DMatrix::zeros(m, 2 * n);
        b.view_mut((0, 0), (m, n)).copy_from(&problem.a);
        b.view_mut((0, n), (m, n)).copy_from(&(-&problem.a));
        b
    };
    let big_n = b_mat.ncols();
    let rhs = &problem.b;
    let c = DVector::from_element(big_n, T::one());

    // start near the minimum-energy point, pushed into the interior
    let shift = T::lit(0.1) * crate::linalg::inf_norm(&x_me).max(T::tol(1e-3));
    let mut z = DVector::from_fn(big_n, |i, _| {
        let xi = x_me[i % n];
        let part = if signed || i >= n { (-xi).max(T::zero()) } else { xi.max(T::zero()) };
        part + shift
    });
    let mut y = DVector::<T>::zeros(m);
    let mut s = DVector::from_element(big_n, T::one());

    let feas_tol = problem.equality_tol();
    let dual_tol = T::tol(1e-8) * (T::one() + c.norm());
    let gap_tol = T::tol(GAP_TOL);
    let sigma = T::lit(CENTERING);
    let frac = T::lit(STEP_FRACTION);
    let nt = T::count(big_n);
    let b_t = b_mat.transpose();

    for iter in 1..=MAX_ITERATIONS {
        let r_p = rhs - &b_mat * &z;
        let r_d = &c - &b_t * &y - &s;
        let mu = z.dot(&s) / nt;
        let primal_obj = c.dot(&z);
        // complementarity; the objective difference also carries r_pᵀy,
        // which stalls at the roundoff level of r_p when y is large
        let gap = z.dot(&s);
        if r_p.norm() <= feas_tol
            && r_d.norm() <= dual_tol
            && gap <= gap_tol * (T::one() + primal_obj.abs())
        {
            return finish(problem, &z, n, signed, iter);
        }
        if z.amax() > T::lit(DIVERGENCE) || y.amax() > T::lit(DIVERGENCE) {
            return Err(if signed {
                SolverError::InfeasibleSign
            } else {
                SolverError::NoConvergence {
                    method: Method::L1Eq,
                    iterations: iter,
                }
            });
        }

        let d = z.component_div(&s);
        let target = DVector::from_fn(big_n, |i, _| sigma * mu - z[i] * s[i]);
        let scaled = DMatrix::from_fn(m, big_n, |r, col| b_mat[(r, col)] * d[col]);
        let normal = &scaled * &b_t;
        let chol = regularized_cholesky(&normal, T::tol(1e-12)).ok_or(SolverError::NoConvergence {
            method: Method::L1Eq,
            iterations: iter,
        })?;
        let t_over_s = target.component_div(&s);
        let dy = chol.solve(&(&r_p - &b_mat * &t_over_s + &scaled * &r_d));
        let ds = &r_d - &b_t * &dy;
        let dz = &t_over_s - d.component_mul(&ds);

        let alpha_p = frac * max_step(&z, &dz);
        let alpha_d = frac * max_step(&s, &ds);
        z += &dz * alpha_p;
        y += &dy * alpha_d;
        s += &ds * alpha_d;
    }
    Err(SolverError::NoConvergence {
        method: Method::L1Eq,
        iterations: MAX_ITERATIONS,
    })
}

/// Largest step in `[0, 1]` keeping `v + α·dv ≥ 0`.
fn max_step<T: Real>(v: &DVector<T>, dv: &DVector<T>) -> T {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < T::zero())
        .fold(T::one(), |acc, (vi, di)| acc.min(-*vi / *di))
}

fn finish<T: Real>(
    problem: &SparseProblem<T>,
    z: &DVector<T>,
    n: usize,
    signed: bool,
    iterations: usize,
) -> Result<SparseSolution<T>, SolverError> {
    let x = if signed {
        -z.clone()
    } else {
        DVector::from_fn(n, |i, _| z[i] - z[i + n])
    };
    let objective = super::norms(&x, T::one());
    SparseSolution::checked(
        problem,
        x,
        objective,
        Method::L1Eq,
        iterations,
        true,
        Feasibility::Equality(problem.equality_tol()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn problem(rows: usize, cols: usize, a: &[f64], b: &[f64]) -> SparseProblem<f64> {
        SparseProblem::new(DMatrix::from_row_slice(rows, cols, a), DVector::from_row_slice(b)).unwrap()
    }

    #[test]
    fn identity_unique_point() {
        let s = solve_l1_eq(&problem(2, 2, &[1.0, 0.0, 0.0, 1.0], &[3.0, -4.0])).unwrap();
        assert_relative_eq!(s.x[0], 3.0, epsilon = 1e-8);
        assert_relative_eq!(s.x[1], -4.0, epsilon = 1e-8);
        assert_relative_eq!(s.objective, 7.0, epsilon = 1e-8);
    }

    #[test]
    fn one_row_prefers_larger_column() {
        // oracle: on the line x1 = 2 − 2 x2, |2 − 2 x2| + |x2| over a dense grid
        let (mut best, mut best_x2) = (f64::INFINITY, 0.0);
        for k in -4000..=4000 {
            let x2 = k as f64 * 1e-3;
            let v = (2.0 - 2.0 * x2).abs() + x2.abs();
            if v < best {
                best = v;
                best_x2 = x2;
            }
        }
        assert_eq!(best_x2, 1.0);
        let s = solve_l1_eq(&problem(1, 2, &[1.0, 2.0], &[2.0])).unwrap();
        assert_relative_eq!(s.x[0], 2.0 - 2.0 * best_x2, epsilon = 1e-7);
        assert_relative_eq!(s.x[1], best_x2, epsilon = 1e-7);
        assert_relative_eq!(s.objective, best, epsilon = 1e-7);
    }

    #[test]
    fn inconsistent_system_rejected() {
        let p = problem(2, 1, &[1.0, 1.0], &[1.0, -1.0]);
        assert_eq!(solve_l1_eq(&p).unwrap_err(), SolverError::Inconsistent);
    }

    #[test]
    fn nonpositive_constraint() {
        // x1 + 2 x2 = -2 with x ≤ 0: optimum (0, -1)
        let p = problem(1, 2, &[1.0, 2.0], &[-2.0]).with_sign(SignConstraint::Nonpositive);
        let s = solve_l1_eq(&p).unwrap();
        assert_relative_eq!(s.x[1], -1.0, epsilon = 1e-7);
        assert!(s.x.iter().all(|v| *v <= 0.0));
        // positive right-hand side cannot be reached with x ≤ 0 and A > 0
        let p = problem(1, 2, &[1.0, 2.0], &[2.0]).with_sign(SignConstraint::Nonpositive);
        assert!(solve_l1_eq(&p).is_err());
    }
}
