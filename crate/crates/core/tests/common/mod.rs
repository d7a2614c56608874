#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Gaussian `rows × cols` matrix with unit-norm columns and a planted
/// `k`-sparse solution whose nonzeros have magnitude in `[0.5, 1.5]` and
/// random sign.
pub struct Planted {
    pub a: DMatrix<f64>,
    pub x: DVector<f64>,
    pub b: DVector<f64>,
    pub support: Vec<usize>,
}

pub fn planted(seed: u64, rows: usize, cols: usize, k: usize) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    for mut col in a.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    let mut support = rand::seq::index::sample(&mut rng, cols, k).into_vec();
    support.sort_unstable();
    let mut x = DVector::zeros(cols);
    for &i in &support {
        let mag = rng.random_range(0.5..1.5);
        x[i] = if rng.random_bool(0.5) { mag } else { -mag };
    }
    let b = &a * &x;
    Planted { a, x, b, support }
}

pub fn gaussian(seed: u64, rows: usize, cols: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = DVector::from_fn(rows, |_, _| rng.sample::<f64, _>(StandardNormal));
    (a, b)
}

/// Uniform random stiffness multipliers in `[lo, hi]`.
pub fn random_theta(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(lo..=hi)).collect()
}

pub fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}
