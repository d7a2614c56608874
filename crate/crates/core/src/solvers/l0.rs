use nalgebra::DVector;

use super::{Feasibility, Method, SignConstraint, SolverError, SparseProblem, SparseSolution};
use crate::linalg::{least_squares, select_columns};
use crate::scalar::Real;

const MAX_UNKNOWNS: usize = 25;

/// `1e-8·(1 + ‖b‖₂)`
pub fn default_residual_tol<T: Real>(problem: &SparseProblem<T>) -> T {
    problem.equality_tol()
}

/// Minimum-cardinality solution by enumeration.
///
/// Supports are tried by increasing size and, within a size, in
/// lexicographic order; the first whose least-squares fit reaches
/// `residual_tol` wins. `iterations` counts the supports tried.
pub fn solve_l0<T: Real>(
    problem: &SparseProblem<T>,
    residual_tol: T,
) -> Result<SparseSolution<T>, SolverError> {
    let (m, n) = problem.a.shape();
    if n > MAX_UNKNOWNS {
        return Err(SolverError::TooLarge(n));
    }
    if problem.sign_constraint != SignConstraint::None {
        return Err(SolverError::UnsupportedSign(Method::L0));
    }
    if !(residual_tol >= T::zero()) {
        return Err(SolverError::InvalidProblem("residual_tol must be nonnegative".into()));
    }

    let mut tried = 0;
    if problem.b.norm() <= residual_tol {
        return finish(problem, DVector::zeros(n), 0, 1, residual_tol);
    }
    tried += 1;

    for k in 1..=m.min(n) {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            tried += 1;
            let sub = select_columns(&problem.a, &combo);
            let coef = least_squares(&sub, &problem.b);
            let resid = (&sub * &coef - &problem.b).norm();
            if resid <= residual_tol {
                let mut x = DVector::zeros(n);
                for (c, &col) in combo.iter().enumerate() {
                    x[col] = coef[c];
                }
                return finish(problem, x, k, tried, residual_tol);
            }
            if !next_combination(&mut combo, n) {
                break;
            }
        }
    }
    Err(SolverError::InfeasibleAtTolerance)
}

fn finish<T: Real>(
    problem: &SparseProblem<T>,
    x: DVector<T>,
    k: usize,
    tried: usize,
    tol: T,
) -> Result<SparseSolution<T>, SolverError> {
    SparseSolution::checked(
        problem,
        x,
        T::count(k),
        Method::L0,
        tried,
        true,
        Feasibility::Equality(tol),
    )
}

/// Advances `combo` to the next k-subset of `0..n` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in (i + 1)..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn combinations_are_lexicographic() {
        let mut c = vec![0, 1];
        let mut seen = vec![c.clone()];
        while next_combination(&mut c, 4) {
            seen.push(c.clone());
        }
        assert_eq!(
            seen,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
    }

    #[test]
    fn identity_system() {
        let p = SparseProblem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let s = solve_l0(&p, 1e-10).unwrap();
        assert_eq!(s.x, DVector::from_vec(vec![1.0, 0.0]));
        assert_eq!(s.objective, 1.0);
    }

    #[test]
    fn lexicographic_tie_break() {
        let p = SparseProblem::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
            DVector::from_vec(vec![2.0]),
        )
        .unwrap();
        let s = solve_l0(&p, 1e-10).unwrap();
        assert!((s.x[0] - 2.0f64).abs() < 1e-12 && s.x[1] == 0.0);
        assert_eq!(s.support, vec![0]);
    }

    #[test]
    fn zero_rhs_gives_empty_support() {
        let p = SparseProblem::new(DMatrix::identity(2, 3), DVector::zeros(2)).unwrap();
        let s = solve_l0(&p, 1e-10).unwrap();
        assert_eq!(s.objective, 0.0);
        assert!(s.support.is_empty());
    }

    #[test]
    fn infeasible_and_guards() {
        // overdetermined inconsistent
        let p = SparseProblem::new(
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            DVector::from_vec(vec![1.0, -1.0]),
        )
        .unwrap();
        assert_eq!(solve_l0(&p, 1e-10).unwrap_err(), SolverError::InfeasibleAtTolerance);
        let big = SparseProblem::new(DMatrix::<f64>::identity(2, 26), DVector::zeros(2)).unwrap();
        assert_eq!(solve_l0(&big, 1e-10).unwrap_err(), SolverError::TooLarge(26));
    }
}
