//! Dense linear-algebra helpers used across the crate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::scalar::Real;

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T: Real> {
    pub eigenvalues: DVector<T>,
    /// Orthonormal eigenvectors, one per column, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<T>,
    pub sweeps: usize,
}

/// Cyclic Jacobi eigensolver.
///
/// Sweeps over all off-diagonal pairs until the off-diagonal Frobenius norm
/// drops below `tol` times the Frobenius norm of the input. Returns `None`
/// if `max_sweeps` is exhausted first.
pub fn jacobi_eigen<T: Real>(
    matrix: &DMatrix<T>,
    tol: T,
    max_sweeps: usize,
) -> Option<SymmetricEigen<T>> {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols(), "jacobi_eigen needs a square matrix");
    let mut a = matrix.clone();
    let mut v = DMatrix::<T>::identity(n, n);
    let scale = a.norm();
    let two = T::lit(2.0);

    let off_norm = |a: &DMatrix<T>| {
        let mut s = T::zero();
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    s += a[(p, q)] * a[(p, q)];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&a) > tol * scale {
        if sweeps == max_sweeps {
            return None;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                let t = if theta.abs() > T::lit(1e30) {
                    T::one() / (two * theta)
                } else {
                    let sgn = if theta >= T::zero() { T::one() } else { -T::one() };
                    sgn / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;

                a[(p, p)] -= t * apq;
                a[(q, q)] += t * apq;
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        a[(r, p)] = c * arp - s * arq;
                        a[(p, r)] = a[(r, p)];
                        a[(r, q)] = c * arq + s * arp;
                        a[(q, r)] = a[(r, q)];
                    }
                }
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = c * vrq + s * vrp;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[(i, i)]
            .partial_cmp(&a[(j, j)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Some(SymmetricEigen {
        eigenvalues,
        eigenvectors,
        sweeps,
    })
}

/// Cholesky factorization, retrying once with a diagonal shift of
/// `shift_rel * trace / n` when the plain factorization fails.
pub fn regularized_cholesky<T: Real>(
    matrix: &DMatrix<T>,
    shift_rel: T,
) -> Option<Cholesky<T, Dyn>> {
    if let Some(ch) = Cholesky::new(matrix.clone()) {
        return Some(ch);
    }
    let n = matrix.nrows();
    let shift = shift_rel * matrix.trace().abs() / T::count(n.max(1));
    let mut shifted = matrix.clone();
    for i in 0..n {
        shifted[(i, i)] += shift;
    }
    Cholesky::new(shifted)
}

/// Minimum-energy solution `Aᵀ(AAᵀ)⁻¹b` of an under-determined system.
///
/// Falls back to the SVD pseudo-inverse when `AAᵀ` is not positive definite
/// (rank-deficient `A`); the result is then the minimum-norm least-squares
/// solution.
pub fn min_energy_solution<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> DVector<T> {
    let gram = a * a.transpose();
    match Cholesky::new(gram) {
        Some(ch) => a.transpose() * ch.solve(b),
        None => least_squares(a, b),
    }
}

/// Minimum-norm least-squares solution via SVD.
pub fn least_squares<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> DVector<T> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * T::default_epsilon() * T::count(a.nrows().max(a.ncols()));
    svd.solve(b, cutoff).expect("U and V were computed")
}

/// Columns of `a` selected by `cols`, in order.
pub fn select_columns<T: Real>(a: &DMatrix<T>, cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(a.nrows(), cols.len(), |r, c| a[(r, cols[c])])
}

pub fn inf_norm<T: Real>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jacobi_matches_closed_form_2x2() {
        let k = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0]);
        let eig = jacobi_eigen(&k, 1e-14, 50).unwrap();
        let s5 = 5f64.sqrt();
        assert_relative_eq!(eig.eigenvalues[0], (3.0 - s5) / 2.0, epsilon = 1e-14);
        assert_relative_eq!(eig.eigenvalues[1], (3.0 + s5) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn jacobi_agrees_with_nalgebra_on_random_symmetric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 12;
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let s = &b + b.transpose();
        let ours = jacobi_eigen(&s, 1e-13, 100).unwrap();
        let mut reference: Vec<f64> = s.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, y) in ours.eigenvalues.iter().zip(&reference) {
            assert_relative_eq!(*x, *y, epsilon = 1e-11);
        }
        let vtv = ours.eigenvectors.transpose() * &ours.eigenvectors;
        assert_relative_eq!(vtv, DMatrix::identity(n, n), epsilon = 1e-12);
    }

    #[test]
    fn min_energy_is_feasible_and_orthogonal_to_nullspace() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let b = DVector::from_vec(vec![2.0]);
        let x = min_energy_solution(&a, &b);
        assert_relative_eq!(x[0], 0.4, epsilon = 1e-14);
        assert_relative_eq!(x[1], 0.8, epsilon = 1e-14);
    }
}
