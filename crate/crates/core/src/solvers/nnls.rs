use nalgebra::{DMatrix, DVector};

use crate::linalg::{least_squares, select_columns};
use crate::scalar::Real;

/// Nonnegative least squares `min ‖Ax − b‖₂ s.t. x ≥ 0` (Lawson–Hanson
/// active set).
pub fn nnls<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> DVector<T> {
    let n = a.ncols();
    let mut x = DVector::<T>::zeros(n);
    let mut passive = vec![false; n];
    let tol = T::tol(1e-12) * a.amax().max(T::one()) * b.amax().max(T::one());
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap_or(std::cmp::Ordering::Equal));
        let Some(j) = candidate else { break };
        passive[j] = true;

        loop {
            let cols: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let coef = least_squares(&select_columns(a, &cols), b);
            let mut s = DVector::<T>::zeros(n);
            for (k, &c) in cols.iter().enumerate() {
                s[c] = coef[k];
            }
            if cols.iter().all(|&c| s[c] > T::zero()) {
                x = s;
                break;
            }
            let mut alpha = T::one();
            for &c in &cols {
                if s[c] <= T::zero() {
                    let denom = x[c] - s[c];
                    if denom > T::zero() {
                        alpha = alpha.min(x[c] / denom);
                    }
                }
            }
            x += (&s - &x) * alpha;
            for &c in &cols {
                if x[c] <= tol {
                    x[c] = T::zero();
                    passive[c] = false;
                }
            }
            if passive.iter().all(|p| !p) {
                break;
            }
        }
    }
    x
}
