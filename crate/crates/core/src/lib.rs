//! Damage identification in planar trusses by sparse recovery.
//!
//! The crate builds a bar-truss finite-element model, solves its natural
//! frequencies, linearizes the frequencies with respect to per-element
//! stiffness multipliers, and recovers sparse stiffness changes from a few
//! measured frequencies with L0, L1 or Lp (IRLS) regularization inside an
//! iterative model-updating loop. A Monte Carlo harness measures how often
//! the damaged elements are localized under multiplicative frequency noise.
//!
//! Numerical modules are generic over [`Real`] (`f32`/`f64`); the aliases
//! below fix the scalar to `f64`, which is what the experiments and the
//! command-line tool use.


pub mod experiments;
pub mod fem;
pub mod linalg;
pub mod modal;
pub mod scalar;
pub mod sensitivity;
pub mod solvers;
pub mod updating;


pub use scalar::Real;

pub type TrussModel = fem::TrussModel<f64>;
pub type StiffnessParams = fem::StiffnessParams<f64>;
pub type ModalData = modal::ModalData<f64>;
pub type SensitivitySystem = sensitivity::SensitivitySystem<f64>;
pub type SparseProblem = solvers::SparseProblem<f64>;
pub type SparseSolution = solvers::SparseSolution<f64>;
pub type UpdateConfig = updating::UpdateConfig<f64>;
pub type UpdateResult = updating::UpdateResult<f64>;



pub type TrussModelF32 = fem::TrussModel<f32>;
pub type SparseProblemF32 = solvers::SparseProblem<f32>;
