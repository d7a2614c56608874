//! Lp minimization (`0 < p < 1`) by iteratively reweighted least squares.
//!
//! Each step solves `min Σ w_i x_i² s.t. Ax = b` with
//! `w_i = (x_i² + ε)^{p/2 − 1}`, i.e. `x = Q Aᵀ (A Q Aᵀ)⁻¹ b` with
//! `Q = W⁻¹`. The smoothing `ε` starts at 1 and is divided by 10 whenever
//! the iterate moves less than `√ε / 100`, down to `eps_min`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_consistent, Feasibility, Method, SignConstraint, SolverError, SparseProblem, SparseSolution};
use crate::linalg::{inf_norm, regularized_cholesky};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrlsOptions {
    pub eps0: f64,
    pub eps_min: f64,
    pub eps_decay: f64,
    /// Stop once the step is below this and `ε` has reached `eps_min`.
    pub step_tol: f64,
    pub max_iterations: usize,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            eps0: 1.0,
            eps_min: 1e-10,
            eps_decay: 10.0,
            step_tol: 1e-8,
            max_iterations: 100,
        }
    }
}

/// Smoothed objective values recorded during one fixed-`ε` phase.
#[derive(Clone, Debug, PartialEq)]
pub struct IrlsPhaseRecord {
    pub eps: f64,
    /// `Σ (x_i² + ε)^{p/2}` at the phase's starting point and after each step.
    pub objective: Vec<f64>,
}

pub fn solve_lp_irls<T: Real>(
    problem: &SparseProblem<T>,
    p: T,
    options: &IrlsOptions,
) -> Result<SparseSolution<T>, SolverError> {
    solve_lp_irls_traced(problem, p, options).map(|(s, _)| s)
}

/// [`solve_lp_irls`] that also returns the per-phase objective history.
pub fn solve_lp_irls_traced<T: Real>(
    problem: &SparseProblem<T>,
    p: T,
    options: &IrlsOptions,
) -> Result<(SparseSolution<T>, Vec<IrlsPhaseRecord>), SolverError> {
    if !(p > T::zero() && p < T::one()) {
        return Err(SolverError::InvalidProblem(format!(
            "p must lie in (0, 1), got {}",
            p.as_f64()
        )));
    }
    if problem.sign_constraint != SignConstraint::None {
        return Err(SolverError::UnsupportedSign(Method::LpIrls));
    }
    if options.max_iterations == 0 || !(options.eps0 > 0.0) || !(options.eps_min > 0.0) {
        return Err(SolverError::InvalidProblem("invalid IRLS options".into()));
    }

    let mut x = check_consistent(problem)?;
    let a = &problem.a;
    let exponent = T::one() - p / T::lit(2.0);
    let eps_min = T::lit(options.eps_min);
    let decay = T::lit(options.eps_decay);
    let step_tol = T::tol(options.step_tol);
    let hundred = T::lit(100.0);
    let mut eps = T::lit(options.eps0).max(eps_min);

    let smoothed = |x: &DVector<T>, eps: T| -> f64 {
        x.iter()
            .fold(T::zero(), |acc, v| acc + (*v * *v + eps).powf(p / T::lit(2.0)))
            .as_f64()
    };
    let mut trace = vec![IrlsPhaseRecord {
        eps: eps.as_f64(),
        objective: vec![smoothed(&x, eps)],
    }];

    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        let q = x.map(|v| (v * v + eps).powf(exponent));
        let aq = DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| a[(r, c)] * q[c]);
        let gram = &aq * a.transpose();
        let chol = regularized_cholesky(&gram, T::tol(1e-12)).ok_or(SolverError::NoConvergence {
            method: Method::LpIrls,
            iterations,
        })?;
        let x_next = aq.transpose() * chol.solve(&problem.b);
        let step = inf_norm(&(&x_next - &x));
        x = x_next;
        if let Some(phase) = trace.last_mut() {
            phase.objective.push(smoothed(&x, eps));
        }

        if step < step_tol && eps <= eps_min {
            converged = true;
            break;
        }
        if step < eps.sqrt() / hundred && eps > eps_min {
            eps = (eps / decay).max(eps_min);
            trace.push(IrlsPhaseRecord {
                eps: eps.as_f64(),
                objective: vec![smoothed(&x, eps)],
            });
        }
    }

    let objective = super::norms(&x, p);
    let solution = SparseSolution::checked(
        problem,
        x,
        objective,
        Method::LpIrls,
        iterations,
        converged,
        Feasibility::Equality(problem.equality_tol()),
    )?;
    Ok((solution, trace))
}
