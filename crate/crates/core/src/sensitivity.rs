//! Linearized feature/parameter system `b ≈ A x` at a parameter point.
//!
//! Features are the `m` lowest natural frequencies, expressed relative to
//! the frequencies of the model at the linearization point. With
//! mass-normalized modes the exact derivative is
//! `∂(f_j/f_j⁰)/∂θ_i = φ_jᵀ K_i φ_j / (2 λ_j)`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::fem::{assemble_mass, assemble_stiffness, ModelError, StiffnessParams, TrussModel};
use crate::modal::{solve_modes, ModalData, ModalError};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensitivityError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Modal(#[from] ModalError),
    #[error("derivative undefined at degenerate eigenvalue (modes {0} and {1})")]
    Degenerate(usize, usize),
    #[error("feature count {m} must be between 1 and {available}")]
    FeatureCount { m: usize, available: usize },
    #[error("need {needed} measured frequencies, got {got}")]
    LengthMismatch { needed: usize, got: usize },
    #[error("measured frequencies must be ascending (entry {0})")]
    NotAscending(usize),
}

impl SensitivityError {
    /// Whether the failure is numerical (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SensitivityError::Modal(_)
                | SensitivityError::Degenerate(..)
                | SensitivityError::Model(ModelError::Mechanism)
        )
    }
}

/// Relative gap below which two eigenvalues are treated as repeated.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivitySystem<T: Real> {
    /// `m × n`, rows in ascending frequency order.
    pub jacobian: DMatrix<T>,
    pub residual: DVector<T>,
    pub linearization_point: StiffnessParams<T>,
}

impl<T: Real> SensitivitySystem<T> {
    pub fn feature_count(&self) -> usize {
        self.jacobian.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.jacobian.ncols()
    }
}

/// Modes of the model at `params`, with one extra mode when available so
/// the degeneracy check can see the gap above mode `m`.
pub fn modes_at<T: Real>(
    model: &TrussModel<T>,
    params: &StiffnessParams<T>,
    m: usize,
) -> Result<ModalData<T>, SensitivityError> {
    let n_dof = model.n_dof();
    if m == 0 || m > n_dof {
        return Err(SensitivityError::FeatureCount {
            m,
            available: n_dof,
        });
    }
    let k = assemble_stiffness(model, params)?;
    let mass = assemble_mass(model);
    Ok(solve_modes(&k, &mass, (m + 1).min(n_dof))?)
}

/// Jacobian of the `m` lowest relative frequencies with respect to the
/// element stiffness multipliers at `params`.
pub fn eigen_jacobian<T: Real>(
    model: &TrussModel<T>,
    params: &StiffnessParams<T>,
    m: usize,
) -> Result<DMatrix<T>, SensitivityError> {
    let modal = modes_at(model, params, m)?;
    jacobian_from_modes(model, &modal, m)
}

/// Same as [`eigen_jacobian`] given already-solved modes.
pub fn jacobian_from_modes<T: Real>(
    model: &TrussModel<T>,
    modal: &ModalData<T>,
    m: usize,
) -> Result<DMatrix<T>, SensitivityError> {
    if m == 0 || m > modal.count() {
        return Err(SensitivityError::FeatureCount {
            m,
            available: modal.count(),
        });
    }
    let tol = T::lit(DEGENERACY_TOL);
    let lam = &modal.eigenvalues;
    for j in 0..m.min(modal.count() - 1) {
        if (lam[j + 1] - lam[j]).abs() <= tol * lam[j].abs() {
            return Err(SensitivityError::Degenerate(j, j + 1));
        }
    }

    let n = model.n_elements();
    let two = T::lit(2.0);
    let mut a = DMatrix::zeros(m, n);
    for j in 0..m {
        let phi: Vec<T> = modal.mode(j).iter().copied().collect();
        let denom = two * lam[j];
        for i in 0..n {
            a[(j, i)] = model.element_energy(i, &phi) / denom;
        }
    }
    Ok(a)
}

/// `b_j = (f_measured,j − f_current,j) / f_current,j` for the first `m` modes.
pub fn feature_residual<T: Real>(
    f_measured: &[T],
    modal_current: &ModalData<T>,
    m: usize,
) -> Result<DVector<T>, SensitivityError> {
    if f_measured.len() < m {
        return Err(SensitivityError::LengthMismatch {
            needed: m,
            got: f_measured.len(),
        });
    }
    if modal_current.count() < m {
        return Err(SensitivityError::LengthMismatch {
            needed: m,
            got: modal_current.count(),
        });
    }
    if let Some(i) = (1..m).find(|&i| f_measured[i] < f_measured[i - 1]) {
        return Err(SensitivityError::NotAscending(i));
    }
    let f = &modal_current.frequencies;
    Ok(DVector::from_fn(m, |j, _| (f_measured[j] - f[j]) / f[j]))
}

/// Builds `A` and `b` at `params` for the measured frequencies.
pub fn linearize<T: Real>(
    model: &TrussModel<T>,
    params: &StiffnessParams<T>,
    f_measured: &[T],
    m: usize,
) -> Result<(SensitivitySystem<T>, ModalData<T>), SensitivityError> {
    let modal = modes_at(model, params, m)?;
    let residual = feature_residual(f_measured, &modal, m)?;
    let jacobian = jacobian_from_modes(model, &modal, m)?;
    Ok((
        SensitivitySystem {
            jacobian,
            residual,
            linearization_point: params.clone(),
        },
        modal,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{canonical_truss, BarElement, Node, Support};
    use approx::assert_relative_eq;

    fn spring_model(theta: f64) -> (TrussModel<f64>, StiffnessParams<f64>) {
        // one free DOF: node 1 slides in x on a single bar
        let model = TrussModel::new(
            vec![Node { id: 0, x: 0.0, y: 0.0 }, Node { id: 1, x: 1.0, y: 0.0 }],
            vec![BarElement {
                id: 0,
                node_i: 0,
                node_j: 1,
                elastic_modulus: 1.0,
                area: 1.0,
                density: 2.0,
            }],
            vec![
                Support { node: 0, fixed_x: true, fixed_y: true },
                Support { node: 1, fixed_x: false, fixed_y: true },
            ],
        )
        .unwrap();
        (model, StiffnessParams::from_slice(&[theta]))
    }

    #[test]
    fn single_dof_half() {
        let (model, p) = spring_model(1.0);
        let a = eigen_jacobian(&model, &p, 1).unwrap();
        assert_relative_eq!(a[(0, 0)], 0.5, epsilon = 1e-14);
        let (model, p) = spring_model(0.25);
        let a = eigen_jacobian(&model, &p, 1).unwrap();
        assert_relative_eq!(a[(0, 0)], 2.0, epsilon = 1e-13);
    }

    #[test]
    fn canonical_row_sums_are_half() {
        let model = canonical_truss::<f64>();
        let a = eigen_jacobian(&model, &StiffnessParams::nominal(20), 16).unwrap();
        for j in 0..16 {
            assert_relative_eq!(a.row(j).sum(), 0.5, epsilon = 1e-12);
        }
        assert!(a.iter().all(|&v| v >= -1e-14));
    }

    #[test]
    fn residual_cases() {
        let model = canonical_truss::<f64>();
        let modal = modes_at(&model, &StiffnessParams::nominal(20), 9).unwrap();
        let f: Vec<f64> = modal.frequencies.iter().copied().collect();
        let b = feature_residual(&f, &modal, 9).unwrap();
        assert!(b.iter().all(|&v| v == 0.0));
        let shifted: Vec<f64> = f.iter().map(|v| v * 1.01).collect();
        let b = feature_residual(&shifted, &modal, 9).unwrap();
        for v in b.iter() {
            assert_relative_eq!(*v, 0.01, epsilon = 1e-14);
        }
        assert!(matches!(
            feature_residual(&f[..5], &modal, 9),
            Err(SensitivityError::LengthMismatch { needed: 9, got: 5 })
        ));
    }

    #[test]
    fn degenerate_spectrum_rejected() {
        let modal = ModalData {
            eigenvalues: DVector::from_vec(vec![1.0, 1.0]),
            frequencies: DVector::from_vec(vec![1.0, 1.0]),
            mode_shapes: DMatrix::identity(2, 2),
        };
        let (model, _) = spring_model(1.0);
        let err = jacobian_from_modes(&model, &modal, 1).unwrap_err();
        assert!(err.to_string().contains("degenerate eigenvalue"));
    }
}
