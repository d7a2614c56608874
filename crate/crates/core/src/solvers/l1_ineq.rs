//! `min ‖x‖₁ s.t. ‖Ax − b‖₂ ≤ ε` by a log-barrier method.
//!
//! With auxiliary bounds `|x_i| ≤ u_i` the problem is
//! `min Σu s.t. x − u ≤ 0, −x − u ≤ 0, ½(‖Ax − b‖² − ε²) ≤ 0`.
//! Each outer step minimizes `τ·Σu − Σ log(−f_k)` by damped Newton, then
//! multiplies `τ` by 10. The duality gap after centering is `(2n + 1)/τ`.
//! Under the nonpositive sign constraint `u` is dropped and the bounds
//! become `x ≤ 0` with objective `−Σx`.

use nalgebra::{DMatrix, DVector};

use super::{nnls, Feasibility, Method, SignConstraint, SolverError, SparseProblem, SparseSolution};
use crate::linalg::{least_squares, regularized_cholesky};
use crate::scalar::Real;

const TAU_GROWTH: f64 = 10.0;
const NEWTON_TOL: f64 = 1e-8;
const GAP_TOL: f64 = 1e-9;
const MAX_NEWTON: usize = 60;
const MAX_OUTER: usize = 40;
const ARMIJO: f64 = 0.01;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACK: usize = 80;

pub fn solve_l1_ineq<T: Real>(problem: &SparseProblem<T>) -> Result<SparseSolution<T>, SolverError> {
    let eps = match problem.epsilon {
        Some(e) if e > T::zero() => e,
        _ => return Err(SolverError::InvalidEpsilon),
    };
    let n = problem.cols();
    if problem.b.norm() <= eps {
        return finish(problem, DVector::zeros(n), 0, true, eps);
    }
    let mut state = Barrier::new(problem, eps);
    match problem.sign_constraint {
        SignConstraint::None => {
            let x0 = least_squares(&problem.a, &problem.b);
            if !(state.residual(&x0).norm() < eps) {
                return Err(SolverError::InvalidProblem(
                    "no point satisfies the residual bound".into(),
                ));
            }
            let peak = crate::linalg::inf_norm(&x0);
            let u0 = x0.map(|v| T::lit(0.95) * v.abs() + T::lit(0.1) * peak);
            state.run(x0, Some(u0))
        }
        SignConstraint::Nonpositive => {
            let x0 = nonpositive_start(problem, eps)?;
            state.run(x0, None)
        }
    }
}

/// A strictly feasible start with `x < 0`, from the nonnegative least-squares
/// fit of `−A v ≈ b` pulled slightly into the interior.
fn nonpositive_start<T: Real>(problem: &SparseProblem<T>, eps: T) -> Result<DVector<T>, SolverError> {
    let v = nnls(&(-&problem.a), &problem.b);
    let base = -v;
    let r0 = (&problem.a * &base - &problem.b).norm();
    if !(r0 < eps) {
        return Err(SolverError::InfeasibleSign);
    }
    let ones = DVector::from_element(problem.cols(), T::one());
    let mut delta = T::lit(0.1) * (crate::linalg::inf_norm(&base) + eps);
    for _ in 0..200 {
        let x = &base - &ones * delta;
        if (&problem.a * &x - &problem.b).norm() < eps {
            return Ok(x);
        }
        delta *= T::lit(0.5);
    }
    Err(SolverError::InfeasibleSign)
}

struct Barrier<'a, T: Real> {
    problem: &'a SparseProblem<T>,
    eps: T,
    ata: DMatrix<T>,
}

/// Newton direction in the stacked `(x, u)` variables.
struct Direction<T: Real> {
    dx: DVector<T>,
    du: Option<DVector<T>>,
    /// `gᵀΔ`, negative for a descent direction.
    slope: T,
}

impl<'a, T: Real> Barrier<'a, T> {
    fn new(problem: &'a SparseProblem<T>, eps: T) -> Self {
        Self {
            problem,
            eps,
            ata: problem.a.transpose() * &problem.a,
        }
    }

    fn residual(&self, x: &DVector<T>) -> DVector<T> {
        &self.problem.a * x - &self.problem.b
    }

    fn cone(&self, r: &DVector<T>) -> T {
        T::lit(0.5) * (r.norm_squared() - self.eps * self.eps)
    }

    /// Barrier objective, `None` outside the strict interior.
    fn value(&self, x: &DVector<T>, u: Option<&DVector<T>>, tau: T) -> Option<T> {
        let fe = self.cone(&self.residual(x));
        if !(fe < T::zero()) {
            return None;
        }
        let mut val = -(-fe).ln();
        match u {
            Some(u) => {
                for (xi, ui) in x.iter().zip(u.iter()) {
                    let f1 = *xi - *ui;
                    let f2 = -*xi - *ui;
                    if !(f1 < T::zero() && f2 < T::zero()) {
                        return None;
                    }
                    val += tau * *ui - (-f1).ln() - (-f2).ln();
                }
            }
            None => {
                for xi in x.iter() {
                    if !(*xi < T::zero()) {
                        return None;
                    }
                    val += -tau * *xi - (-*xi).ln();
                }
            }
        }
        Some(val)
    }

    fn direction(
        &self,
        x: &DVector<T>,
        u: Option<&DVector<T>>,
        tau: T,
    ) -> Option<Direction<T>> {
        let n = x.len();
        let r = self.residual(x);
        let fe = self.cone(&r);
        let atr = self.problem.a.transpose() * &r;
        // Hessian of −log(−fe)
        let mut h = &self.ata * (-T::one() / fe) + (&atr * atr.transpose()) * (T::one() / (fe * fe));
        let g_cone = &atr * (-T::one() / fe);

        match u {
            Some(u) => {
                let mut gx = g_cone;
                let mut gu = DVector::zeros(n);
                let mut sig11 = DVector::zeros(n);
                let mut sig12 = DVector::zeros(n);
                for i in 0..n {
                    let f1 = x[i] - u[i];
                    let f2 = -x[i] - u[i];
                    gx[i] += -T::one() / f1 + T::one() / f2;
                    gu[i] = tau + T::one() / f1 + T::one() / f2;
                    let (a1, a2) = (T::one() / (f1 * f1), T::one() / (f2 * f2));
                    sig11[i] = a1 + a2;
                    sig12[i] = a2 - a1;
                    // sig11 − sig12²/sig11, in cancellation-free form
                    h[(i, i)] += T::lit(4.0) / (f1 * f1 + f2 * f2);
                }
                let rhs = DVector::from_fn(n, |i, _| -gx[i] + sig12[i] / sig11[i] * gu[i]);
                let dx = regularized_cholesky(&h, T::tol(1e-14))?.solve(&rhs);
                let du = DVector::from_fn(n, |i, _| (-gu[i] - sig12[i] * dx[i]) / sig11[i]);
                let slope = gx.dot(&dx) + gu.dot(&du);
                Some(Direction {
                    dx,
                    du: Some(du),
                    slope,
                })
            }
            None => {
                let mut g = g_cone;
                for i in 0..n {
                    g[i] += -tau - T::one() / x[i];
                    h[(i, i)] += T::one() / (x[i] * x[i]);
                }
                let dx = regularized_cholesky(&h, T::tol(1e-14))?.solve(&(-&g));
                let slope = g.dot(&dx);
                Some(Direction { dx, du: None, slope })
            }
        }
    }

    /// Largest step keeping every constraint strictly satisfied.
    fn max_step(&self, x: &DVector<T>, u: Option<&DVector<T>>, d: &Direction<T>) -> T {
        let mut s = T::one();
        let mut limit = |f: T, df: T| {
            if df > T::zero() {
                s = s.min(-f / df);
            }
        };
        match (u, &d.du) {
            (Some(u), Some(du)) => {
                for i in 0..x.len() {
                    limit(x[i] - u[i], d.dx[i] - du[i]);
                    limit(-x[i] - u[i], -d.dx[i] - du[i]);
                }
            }
            _ => {
                for i in 0..x.len() {
                    limit(x[i], d.dx[i]);
                }
            }
        }
        let r = self.residual(x);
        let adx = &self.problem.a * &d.dx;
        let aq = adx.norm_squared();
        if aq > T::zero() {
            let bq = T::lit(2.0) * r.dot(&adx);
            let cq = r.norm_squared() - self.eps * self.eps;
            let disc = (bq * bq - T::lit(4.0) * aq * cq).max(T::zero());
            s = s.min((-bq + disc.sqrt()) / (T::lit(2.0) * aq));
        }
        s
    }

    fn run(
        &mut self,
        mut x: DVector<T>,
        mut u: Option<DVector<T>>,
    ) -> Result<SparseSolution<T>, SolverError> {
        let n = x.len();
        let n_constraints = T::count(if u.is_some() { 2 * n + 1 } else { n + 1 });
        let l1 = super::norms(&x, T::one());
        let mut tau = (n_constraints / l1.max(T::tol(1e-12))).max(T::one());
        let mut newton_total = 0;

        for _ in 0..MAX_OUTER {
            for _ in 0..MAX_NEWTON {
                let Some(dir) = self.direction(&x, u.as_ref(), tau) else {
                    return Err(self.stalled(newton_total));
                };
                newton_total += 1;
                if -dir.slope / T::lit(2.0) < T::tol(NEWTON_TOL) {
                    break;
                }
                let f0 = self
                    .value(&x, u.as_ref(), tau)
                    .ok_or_else(|| self.stalled(newton_total))?;
                let mut step = T::lit(0.99) * self.max_step(&x, u.as_ref(), &dir);
                let mut accepted = false;
                for _ in 0..MAX_BACKTRACK {
                    let xn = &x + &dir.dx * step;
                    let un = u.as_ref().zip(dir.du.as_ref()).map(|(u, du)| u + du * step);
                    if let Some(f) = self.value(&xn, un.as_ref(), tau) {
                        if f <= f0 + T::lit(ARMIJO) * step * dir.slope {
                            x = xn;
                            u = un;
                            accepted = true;
                            break;
                        }
                    }
                    step *= T::lit(BACKTRACK);
                }
                if !accepted {
                    // no progress possible at this precision
                    break;
                }
            }
            let objective = super::norms(&x, T::one());
            if n_constraints / tau < T::tol(GAP_TOL) * (T::one() + objective) {
                return finish(self.problem, x, newton_total, true, self.eps);
            }
            tau *= T::lit(TAU_GROWTH);
        }
        finish(self.problem, x, newton_total, false, self.eps)
    }

    fn stalled(&self, iterations: usize) -> SolverError {
        SolverError::NoConvergence {
            method: Method::L1Ineq,
            iterations,
        }
    }
}

fn finish<T: Real>(
    problem: &SparseProblem<T>,
    x: DVector<T>,
    iterations: usize,
    converged: bool,
    eps: T,
) -> Result<SparseSolution<T>, SolverError> {
    let objective = super::norms(&x, T::one());
    SparseSolution::checked(
        problem,
        x,
        objective,
        Method::L1Ineq,
        iterations,
        converged,
        Feasibility::Ball(eps),
    )
}
