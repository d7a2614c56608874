//! Sparse solutions of under-determined systems `A x = b`.
//!
//! * [`solve_l0`]: minimum cardinality by exhaustive support enumeration.
//! * [`solve_l1_eq`]: basis pursuit, `min ‖x‖₁ s.t. Ax = b`, as a split LP
//!   solved by a primal-dual interior-point method.
//! * [`solve_l1_ineq`]: `min ‖x‖₁ s.t. ‖Ax − b‖₂ ≤ ε` by a log-barrier method.
//! * [`solve_lp_irls`]: `min ‖x‖_p s.t. Ax = b`, `0 < p < 1`, by iteratively
//!   reweighted least squares with smoothing continuation.

mod irls;
mod l0;
mod l1_eq;
mod l1_ineq;
mod nnls;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

pub use irls::{solve_lp_irls, solve_lp_irls_traced, IrlsOptions, IrlsPhaseRecord};
pub use l0::{default_residual_tol, solve_l0};
pub use l1_eq::solve_l1_eq;
pub use l1_ineq::solve_l1_ineq;
pub use nnls::nnls;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("enumeration limited to 25 unknowns, problem has {0}")]
    TooLarge(usize),
    #[error("infeasible at tolerance")]
    InfeasibleAtTolerance,
    #[error("inconsistent system: b is not in the range of A")]
    Inconsistent,
    #[error("infeasible under the sign constraint")]
    InfeasibleSign,
    #[error("{method} did not converge within {iterations} iterations")]
    NoConvergence { method: Method, iterations: usize },
    #[error("{method} returned a point violating its constraint (residual {residual:e}, bound {bound:e})")]
    ConstraintViolated {
        method: Method,
        residual: f64,
        bound: f64,
    },
    #[error("{0} does not support the nonpositive sign constraint")]
    UnsupportedSign(Method),
    #[error("epsilon must be positive")]
    InvalidEpsilon,
}

impl SolverError {
    /// Whether the failure is numerical (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            SolverError::InvalidProblem(_)
                | SolverError::TooLarge(_)
                | SolverError::UnsupportedSign(_)
                | SolverError::InvalidEpsilon
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    L0,
    L1Eq,
    L1Ineq,
    LpIrls,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::L0, Method::L1Eq, Method::L1Ineq, Method::LpIrls];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::L0 => "l0",
            Method::L1Eq => "l1_eq",
            Method::L1Ineq => "l1_ineq",
            Method::LpIrls => "lp_irls",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method '{s}' (expected l0, l1_eq, l1_ineq or lp_irls)"))
    }
}

/// Optional sign restriction on the solution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConstraint {
    #[default]
    None,
    /// `x ≤ 0`: stiffness can only decrease.
    Nonpositive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseProblem<T: Real> {
    pub a: DMatrix<T>,
    pub b: DVector<T>,
    pub epsilon: Option<T>,
    pub sign_constraint: SignConstraint,
}

impl<T: Real> SparseProblem<T> {
    pub fn new(a: DMatrix<T>, b: DVector<T>) -> Result<Self, SolverError> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(SolverError::InvalidProblem("A must be at least 1x1".into()));
        }
        if b.len() != a.nrows() {
            return Err(SolverError::InvalidProblem(format!(
                "A has {} rows but b has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidProblem("non-finite entry".into()));
        }
        Ok(Self {
            a,
            b,
            epsilon: None,
            sign_constraint: SignConstraint::None,
        })
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Result<Self, SolverError> {
        if !(epsilon >= T::zero()) {
            return Err(SolverError::InvalidEpsilon);
        }
        self.epsilon = Some(epsilon);
        Ok(self)
    }

    pub fn with_sign(mut self, sign: SignConstraint) -> Self {
        self.sign_constraint = sign;
        self
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    /// Same system with `b` multiplied by `alpha`.
    pub fn scaled(&self, alpha: T) -> Self {
        Self {
            b: &self.b * alpha,
            epsilon: self.epsilon.map(|e| e * alpha),
            ..self.clone()
        }
    }

    fn residual_norm(&self, x: &DVector<T>) -> T {
        (&self.a * x - &self.b).norm()
    }

    /// Default equality feasibility tolerance `1e-8·(1 + ‖b‖₂)`.
    pub fn equality_tol(&self) -> T {
        T::tol(1e-8) * (T::one() + self.b.norm())
    }
}

/// Thresholds of the nonzero test used to extract a support.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportThresholds {
    pub tau_rel: f64,
    pub tau_abs: f64,
}

impl Default for SupportThresholds {
    fn default() -> Self {
        Self {
            tau_rel: 0.05,
            tau_abs: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseSolution<T: Real> {
    pub x: DVector<T>,
    /// Support under the default [`SupportThresholds`].
    pub support: Vec<usize>,
    pub objective: T,
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
    pub residual_norm: T,
}

/// How a returned point is checked against its problem.
enum Feasibility<T> {
    Equality(T),
    Ball(T),
}

impl<T: Real> SparseSolution<T> {
    /// Builds a solution after checking it satisfies the problem's constraint.
    fn checked(
        problem: &SparseProblem<T>,
        x: DVector<T>,
        objective: T,
        method: Method,
        iterations: usize,
        converged: bool,
        feasibility: Feasibility<T>,
    ) -> Result<Self, SolverError> {
        let residual_norm = problem.residual_norm(&x);
        let bound = match feasibility {
            Feasibility::Equality(tol) => tol,
            Feasibility::Ball(eps) => eps * (T::one() + T::tol(1e-8)),
        };
        if !(residual_norm <= bound) {
            return Err(SolverError::ConstraintViolated {
                method,
                residual: residual_norm.as_f64(),
                bound: bound.as_f64(),
            });
        }
        if problem.sign_constraint == SignConstraint::Nonpositive
            && x.iter().any(|v| *v > T::zero())
        {
            return Err(SolverError::ConstraintViolated {
                method,
                residual: residual_norm.as_f64(),
                bound: bound.as_f64(),
            });
        }
        let support = support(&x, SupportThresholds::default());
        Ok(Self {
            x,
            support,
            objective,
            method,
            iterations,
            converged,
            residual_norm,
        })
    }
}

/// `p = 0`: number of nonzero entries; `p = 1`: `Σ|x_i|`;
/// otherwise `(Σ|x_i|^p)^{1/p}`.
pub fn norms<T: Real>(x: &DVector<T>, p: T) -> T {
    if p == T::zero() {
        T::count(x.iter().filter(|v| **v != T::zero()).count())
    } else if p == T::one() {
        x.iter().fold(T::zero(), |acc, v| acc + v.abs())
    } else {
        let s = x.iter().fold(T::zero(), |acc, v| acc + v.abs().powf(p));
        s.powf(T::one() / p)
    }
}

/// `{ i : |x_i| > max(tau_abs, tau_rel·‖x‖∞) }`
pub fn support<T: Real>(x: &DVector<T>, thresholds: SupportThresholds) -> Vec<usize> {
    let peak = crate::linalg::inf_norm(x);
    let cut = T::lit(thresholds.tau_abs).max(T::lit(thresholds.tau_rel) * peak);
    x.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > cut)
        .map(|(i, _)| i)
        .collect()
}

/// Dispatches to the solver for `method`; `p` is only used by `LpIrls`.
pub fn solve<T: Real>(
    problem: &SparseProblem<T>,
    method: Method,
    p: T,
) -> Result<SparseSolution<T>, SolverError> {
    match method {
        Method::L0 => solve_l0(problem, default_residual_tol(problem)),
        Method::L1Eq => solve_l1_eq(problem),
        Method::L1Ineq => solve_l1_ineq(problem),
        Method::LpIrls => solve_lp_irls(problem, p, &IrlsOptions::default()),
    }
}

/// Rejects systems whose right-hand side is outside the range of `A`.
fn check_consistent<T: Real>(problem: &SparseProblem<T>) -> Result<DVector<T>, SolverError> {
    let x = crate::linalg::min_energy_solution(&problem.a, &problem.b);
    if problem.residual_norm(&x) > problem.equality_tol() {
        return Err(SolverError::Inconsistent);
    }
    Ok(x)
}

/// Dense row-major problem document for standalone solves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub rows: usize,
    pub cols: usize,
    /// `rows × cols` entries, row-major.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub sign_constraint: SignConstraint,
}

impl ProblemDocument {
    pub fn from_problem<T: Real>(problem: &SparseProblem<T>) -> Self {
        let (rows, cols) = problem.a.shape();
        let mut a = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                a.push(problem.a[(r, c)].as_f64());
            }
        }
        Self {
            rows,
            cols,
            a,
            b: problem.b.iter().map(|v| v.as_f64()).collect(),
            epsilon: problem.epsilon.map(|e| e.as_f64()),
            sign_constraint: problem.sign_constraint,
        }
    }

    pub fn to_problem<T: Real>(&self) -> Result<SparseProblem<T>, SolverError> {
        if self.a.len() != self.rows * self.cols {
            return Err(SolverError::InvalidProblem(format!(
                "a has {} entries, expected {}x{}",
                self.a.len(),
                self.rows,
                self.cols
            )));
        }
        if self.a.iter().chain(&self.b).any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidProblem("non-finite entry".into()));
        }
        let a = DMatrix::from_row_iterator(self.rows, self.cols, self.a.iter().map(|&v| T::lit(v)));
        let b = DVector::from_iterator(self.b.len(), self.b.iter().map(|&v| T::lit(v)));
        let mut problem = SparseProblem::new(a, b)?.with_sign(self.sign_constraint);
        if let Some(eps) = self.epsilon {
            problem = problem.with_epsilon(T::lit(eps))?;
        }
        Ok(problem)
    }
}
