//! Iterative sensitivity-based model updating.
//!
//! Each iteration linearizes the measured-frequency residual at the current
//! stiffness multipliers, solves the sparse problem for the parameter change
//! and re-solves the model. The sparse penalty is applied to the cumulative
//! change from the nominal state by default (see [`Regularization`]).

use nalgebra::DVector;
use thiserror::Error;

use crate::fem::{StiffnessParams, TrussModel};
use crate::linalg::inf_norm;
use crate::scalar::Real;
use crate::sensitivity::{feature_residual, jacobian_from_modes, modes_at, SensitivityError};
use crate::solvers::{
    self, default_residual_tol, IrlsOptions, Method, SignConstraint, SolverError, SparseProblem,
    SupportThresholds,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UpdateError {
    #[error("invalid update configuration: {0}")]
    Config(String),
    #[error("iteration {iteration}: {source}")]
    Sensitivity {
        iteration: usize,
        #[source]
        source: SensitivityError,
    },
    #[error("iteration {iteration}: {source}")]
    Solver {
        iteration: usize,
        #[source]
        source: SolverError,
    },
    #[error("iteration {0}: non-finite parameter update")]
    NonFinite(usize),
}

impl UpdateError {
    /// Whether the failure is numerical (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            UpdateError::Config(_) => false,
            UpdateError::Sensitivity { source, .. } => source.is_numerical(),
            UpdateError::Solver { source, .. } => source.is_numerical(),
            UpdateError::NonFinite(_) => true,
        }
    }
}

/// Residual bound for the `l1_ineq` method.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsilonRule<T: Real> {
    Fixed(T),
    /// `ε = (percent / 100)·√m`: the Euclidean bound of `m` relative
    /// frequency errors each at most `percent` %.
    NoiseDerived { assumed_percent: T },
}

impl<T: Real> EpsilonRule<T> {
    pub fn epsilon(&self, m: usize) -> T {
        match *self {
            EpsilonRule::Fixed(e) => e,
            EpsilonRule::NoiseDerived { assumed_percent } => {
                assumed_percent / T::lit(100.0) * T::count(m).sqrt()
            }
        }
    }
}

/// Which vector the sparsity penalty acts on at each linearization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Regularization {
    /// The total change `θ_k + x − θ₀`; the step solves
    /// `min ‖y‖ s.t. A y = b + A(θ_k − θ₀)` and takes `x = y − (θ_k − θ₀)`.
    #[default]
    Cumulative,
    /// The increment `x` alone.
    Increment,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdateConfig<T: Real> {
    pub method: Method,
    /// Number of (lowest) frequencies used as features.
    pub m: usize,
    pub epsilon_rule: Option<EpsilonRule<T>>,
    /// Exponent for `lp_irls`.
    pub p: T,
    pub max_iterations: usize,
    pub step_tol: T,
    pub residual_tol: T,
    pub theta_floor: T,
    pub sign_constraint: SignConstraint,
    pub regularization: Regularization,
    pub irls: IrlsOptions,
    pub thresholds: SupportThresholds,
}

impl<T: Real> UpdateConfig<T> {
    pub fn new(method: Method, m: usize) -> Self {
        Self {
            method,
            m,
            epsilon_rule: None,
            p: T::lit(0.5),
            max_iterations: 20,
            step_tol: T::lit(1e-6),
            residual_tol: T::tol(1e-8),
            theta_floor: T::lit(0.05),
            sign_constraint: SignConstraint::None,
            regularization: Regularization::Cumulative,
            irls: IrlsOptions::default(),
            thresholds: SupportThresholds::default(),
        }
    }

    fn validate(&self) -> Result<(), UpdateError> {
        if self.max_iterations == 0 {
            return Err(UpdateError::Config("max_iterations must be at least 1".into()));
        }
        if !(self.theta_floor > T::zero() && self.theta_floor < T::one()) {
            return Err(UpdateError::Config("theta_floor must lie in (0, 1)".into()));
        }
        if self.method == Method::L1Ineq && self.epsilon_rule.is_none() {
            return Err(UpdateError::Config("l1_ineq needs an epsilon rule".into()));
        }
        if let Some(rule) = self.epsilon_rule {
            if !(rule.epsilon(self.m) >= T::zero()) {
                return Err(UpdateError::Config("epsilon must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord<T: Real> {
    /// 1-based.
    pub iteration: usize,
    /// Parameter increment `Δθ` applied in this iteration (before clamping).
    pub x: DVector<T>,
    /// Support of the cumulative change `θ_{k+1} − θ₀`.
    pub support: Vec<usize>,
    /// `1 − θ_{k+1}`
    pub damage: DVector<T>,
    pub residual_before: T,
    pub residual_after: T,
    pub solver_iterations: usize,
    pub solver_converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdateResult<T: Real> {
    pub theta_final: StiffnessParams<T>,
    /// `1 − θ_final`, positive for stiffness loss.
    pub damage_estimates: DVector<T>,
    pub per_iteration: Vec<IterationRecord<T>>,
    pub converged: bool,
    pub iterations_used: usize,
    pub support_changed_after_first: bool,
}

impl<T: Real> UpdateResult<T> {
    /// `θ_final − 1`, the change vector whose support localizes damage.
    pub fn parameter_change(&self) -> DVector<T> {
        self.theta_final.theta.map(|t| t - T::one())
    }

    pub fn first(&self) -> &IterationRecord<T> {
        &self.per_iteration[0]
    }
}

/// Runs the updating loop from the nominal state `θ = 1`.
pub fn run_update<T: Real>(
    model: &TrussModel<T>,
    f_measured: &[T],
    config: &UpdateConfig<T>,
) -> Result<UpdateResult<T>, UpdateError> {
    config.validate()?;
    let m = config.m;
    if f_measured.len() < m {
        return Err(UpdateError::Config(format!(
            "{} measured frequencies given, m = {m}",
            f_measured.len()
        )));
    }
    let n = model.n_elements();
    let nominal = DVector::from_element(n, T::one());
    let mut theta = nominal.clone();
    let sens = |iteration| move |source| UpdateError::Sensitivity { iteration, source };

    let mut modal = modes_at(model, &StiffnessParams::new(theta.clone()), m).map_err(sens(1))?;
    let mut records: Vec<IterationRecord<T>> = Vec::new();
    let mut converged = false;

    for iteration in 1..=config.max_iterations {
        let b = feature_residual(f_measured, &modal, m).map_err(sens(iteration))?;
        let residual_before = b.norm();

        let (x, solver_iterations, solver_converged) = if inf_norm(&b) < config.residual_tol {
            (DVector::zeros(n), 0, true)
        } else {
            let a = jacobian_from_modes(model, &modal, m).map_err(sens(iteration))?;
            let deviation = &theta - &nominal;
            let rhs = match config.regularization {
                Regularization::Cumulative => &b + &a * &deviation,
                Regularization::Increment => b.clone(),
            };
            let solution = solve_step(a, rhs, config)
                .map_err(|source| UpdateError::Solver { iteration, source })?;
            let x = match config.regularization {
                Regularization::Cumulative => solution.x - deviation,
                Regularization::Increment => solution.x,
            };
            (x, solution.iterations, solution.converged)
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(UpdateError::NonFinite(iteration));
        }

        theta = DVector::from_fn(n, |i, _| (theta[i] + x[i]).max(config.theta_floor));
        modal = modes_at(model, &StiffnessParams::new(theta.clone()), m).map_err(sens(iteration))?;
        let b_after = feature_residual(f_measured, &modal, m).map_err(sens(iteration))?;

        let change = &theta - &nominal;
        let step = inf_norm(&x);
        records.push(IterationRecord {
            iteration,
            support: solvers::support(&change, config.thresholds),
            damage: theta.map(|t| T::one() - t),
            residual_before,
            residual_after: b_after.norm(),
            solver_iterations,
            solver_converged,
            x,
        });
        if step < config.step_tol || inf_norm(&b_after) < config.residual_tol {
            converged = true;
            break;
        }
    }

    let support_changed_after_first = records
        .iter()
        .skip(1)
        .any(|r| r.support != records[0].support);
    Ok(UpdateResult {
        damage_estimates: theta.map(|t| T::one() - t),
        theta_final: StiffnessParams::new(theta),
        iterations_used: records.len(),
        per_iteration: records,
        converged,
        support_changed_after_first,
    })
}

/// Single linearization at the nominal state: `run_update` capped at one
/// iteration.
pub fn one_shot<T: Real>(
    model: &TrussModel<T>,
    f_measured: &[T],
    config: &UpdateConfig<T>,
) -> Result<UpdateResult<T>, UpdateError> {
    let single = UpdateConfig {
        max_iterations: 1,
        ..config.clone()
    };
    run_update(model, f_measured, &single)
}

fn solve_step<T: Real>(
    a: nalgebra::DMatrix<T>,
    b: DVector<T>,
    config: &UpdateConfig<T>,
) -> Result<solvers::SparseSolution<T>, SolverError> {
    let problem = SparseProblem::new(a, b)?.with_sign(config.sign_constraint);
    match config.method {
        Method::L0 => solvers::solve_l0(&problem, default_residual_tol(&problem)),
        Method::L1Eq => solvers::solve_l1_eq(&problem),
        Method::L1Ineq => {
            let eps = config
                .epsilon_rule
                .map(|r| r.epsilon(config.m))
                .unwrap_or_else(T::zero);
            if eps > T::zero() {
                solvers::solve_l1_ineq(&problem.with_epsilon(eps)?)
            } else {
                // a zero error bound is the equality-constrained problem
                solvers::solve_l1_eq(&problem)
            }
        }
        Method::LpIrls => solvers::solve_lp_irls(&problem, config.p, &config.irls),
    }
}
