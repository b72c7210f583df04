//! Shared helpers for the integration and acceptance suites: independent
//! finite-difference oracles and small sampling utilities.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Central second-difference Hessian oracle `-d2k/dx_i dx_j` of a scalar
/// kernel in its first argument; independent of the closed forms under test.
pub fn neg_hessian_fd<F>(kernel: F, x: &DVector<f64>, step: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let n = x.len();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let value = if i == j {
                let mut plus = x.clone();
                plus[i] += step;
                let mut minus = x.clone();
                minus[i] -= step;
                (kernel(&plus) - 2.0 * kernel(x) + kernel(&minus)) / (step * step)
            } else {
                let mut pp = x.clone();
                pp[i] += step;
                pp[j] += step;
                let mut pm = x.clone();
                pm[i] += step;
                pm[j] -= step;
                let mut mp = x.clone();
                mp[i] -= step;
                mp[j] += step;
                let mut mm = x.clone();
                mm[i] -= step;
                mm[j] -= step;
                (kernel(&pp) - kernel(&pm) - kernel(&mp) + kernel(&mm)) / (4.0 * step * step)
            };
            out[(i, j)] = -value;
        }
    }
    out
}

/// Central-difference gradient oracle of a scalar function.
pub fn gradient_fd<F>(f: F, x: &DVector<f64>, step: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let n = x.len();
    let mut grad = DVector::zeros(n);
    for i in 0..n {
        let mut plus = x.clone();
        plus[i] += step;
        let mut minus = x.clone();
        minus[i] -= step;
        grad[i] = (f(&plus) - f(&minus)) / (2.0 * step);
    }
    grad
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

/// `||a - b|| / max(1, ||b||)`: relative for O(1)-or-larger references,
/// absolute below that.
pub fn relative_error(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}
