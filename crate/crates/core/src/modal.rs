//! Generalized symmetric eigenproblem `K φ = λ M φ` for lumped-mass models.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::fem::LumpedMass;
use crate::linalg::jacobi_eigen;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModalError {
    #[error("requested {count} modes from a model with {n_dof} DOFs")]
    InvalidCount { count: usize, n_dof: usize },
    #[error("stiffness is {k_rows}x{k_cols} but mass has {m_len} entries")]
    DimensionMismatch {
        k_rows: usize,
        k_cols: usize,
        m_len: usize,
    },
    #[error("mass entry {0} is not positive")]
    NonPositiveMass(usize),
    #[error("stiffness matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("eigensolver did not converge in {0} sweeps")]
    NoConvergence(usize),
    #[error("eigenpair check failed for mode {mode}: {what}")]
    InvariantViolation { mode: usize, what: &'static str },
    #[error("mode counts differ ({0} vs {1})")]
    CountMismatch(usize, usize),
    #[error("reference frequency {0} is zero")]
    ZeroFrequency(usize),
}

const MAX_SWEEPS: usize = 100;

/// Lowest eigenpairs of a model state.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalData<T: Real> {
    /// rad²/s², ascending
    pub eigenvalues: DVector<T>,
    /// Hz
    pub frequencies: DVector<T>,
    /// Mass-normalized mode shapes, one per column.
    pub mode_shapes: DMatrix<T>,
}

impl<T: Real> ModalData<T> {
    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mode(&self, j: usize) -> nalgebra::DVectorView<'_, T> {
        self.mode_shapes.column(j)
    }

    /// Residual and M-orthonormality checks against the matrices the modes
    /// were computed from.
    pub fn check(&self, k: &DMatrix<T>, mass: &LumpedMass<T>) -> Result<(), ModalError> {
        let tol = T::tol(1e-8);
        let m = mass.diagonal();
        let k_norm = k.norm();
        for j in 0..self.count() {
            let phi = self.mode_shapes.column(j);
            let k_phi = k * phi;
            let m_phi = phi.component_mul(m);
            let resid = (&k_phi - &m_phi * self.eigenvalues[j]).norm();
            // backward error: relative to ‖K‖‖φ‖, not ‖Kφ‖, so low modes
            // aren't held to a tighter standard than the matrix allows
            if !(resid <= tol * k_norm * phi.norm()) {
                return Err(ModalError::InvariantViolation {
                    mode: j,
                    what: "eigen-residual",
                });
            }
            for i in 0..=j {
                let dot = self.mode_shapes.column(i).dot(&m_phi);
                let target = if i == j { T::one() } else { T::zero() };
                if !((dot - target).abs() < tol) {
                    return Err(ModalError::InvariantViolation {
                        mode: j,
                        what: "mass orthonormality",
                    });
                }
            }
        }
        Ok(())
    }
}

/// First `count` eigenpairs of `K φ = λ M φ`, ascending.
///
/// The problem is reduced to `M^{-1/2} K M^{-1/2} y = λ y`, solved by cyclic
/// Jacobi, and mapped back as `φ = M^{-1/2} y`. Each mode's largest-magnitude
/// entry is made positive.
pub fn solve_modes<T: Real>(
    k: &DMatrix<T>,
    mass: &LumpedMass<T>,
    count: usize,
) -> Result<ModalData<T>, ModalError> {
    let m = mass.diagonal();
    let n = m.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(ModalError::DimensionMismatch {
            k_rows: k.nrows(),
            k_cols: k.ncols(),
            m_len: n,
        });
    }
    if count == 0 || count > n {
        return Err(ModalError::InvalidCount { count, n_dof: n });
    }
    if let Some(i) = m.iter().position(|v| !(*v > T::zero())) {
        return Err(ModalError::NonPositiveMass(i));
    }

    let inv_sqrt = m.map(|v| T::one() / v.sqrt());
    let reduced = DMatrix::from_fn(n, n, |r, c| inv_sqrt[r] * k[(r, c)] * inv_sqrt[c]);
    let eig = jacobi_eigen(&reduced, T::tol(1e-12), MAX_SWEEPS)
        .ok_or(ModalError::NoConvergence(MAX_SWEEPS))?;
    if !(eig.eigenvalues[0] > T::zero()) {
        return Err(ModalError::NotPositiveDefinite);
    }

    let eigenvalues = eig.eigenvalues.rows(0, count).into_owned();
    let two_pi = T::two_pi();
    let frequencies = eigenvalues.map(|l| l.sqrt() / two_pi);
    let mut mode_shapes = DMatrix::from_fn(n, count, |r, c| inv_sqrt[r] * eig.eigenvectors[(r, c)]);
    for mut col in mode_shapes.column_iter_mut() {
        let mut pivot = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < T::zero() {
            col.neg_mut();
        }
    }

    let data = ModalData {
        eigenvalues,
        frequencies,
        mode_shapes,
    };
    data.check(k, mass)?;
    Ok(data)
}

/// Elementwise relative frequency change `(f_b − f_a) / f_a`.
pub fn frequency_changes<T: Real>(
    modal_a: &ModalData<T>,
    modal_b: &ModalData<T>,
) -> Result<DVector<T>, ModalError> {
    relative_change(&modal_a.frequencies, &modal_b.frequencies)
}

pub(crate) fn relative_change<T: Real>(
    reference: &DVector<T>,
    other: &DVector<T>,
) -> Result<DVector<T>, ModalError> {
    if reference.len() != other.len() {
        return Err(ModalError::CountMismatch(reference.len(), other.len()));
    }
    if let Some(i) = reference.iter().position(|f| *f == T::zero()) {
        return Err(ModalError::ZeroFrequency(i));
    }
    Ok(DVector::from_fn(reference.len(), |i, _| {
        (other[i] - reference[i]) / reference[i]
    }))
}
