//! Finite-difference verification of analytic gradients. Directional
//! checks project the full gradient onto a handful of random directions,
//! so whole subnetworks can be verified without perturbing every scalar.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::rng;
use crate::tensor::Tensor;
#[allow(unused_imports)]
use num_traits::Float;

/// Default central-difference step for f64 checks.
pub const DEFAULT_EPS: f64 = 1e-5;

/// Relative error between an analytic directional derivative and its
/// central finite difference.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-12);
    (analytic - numeric).abs() / denom
}

/// Per-coordinate central finite differences of a scalar function of one
/// tensor. O(2 * len) evaluations; use on small tensors only.
pub fn fd_grad(
    eval: &mut dyn FnMut(&Tensor<f64>) -> f64,
    at: &Tensor<f64>,
    eps: f64,
) -> Tensor<f64> {
    let mut grad = Tensor::zeros(at.shape());
    for i in 0..at.len() {
        let mut plus = at.clone();
        plus.data_mut()[i] += eps;
        let mut minus = at.clone();
        minus.data_mut()[i] -= eps;
        grad.data_mut()[i] = (eval(&plus) - eval(&minus)) / (2.0 * eps);
    }
    grad
}

/// Check analytic gradients of a scalar function over a set of tensors
/// by random directional derivatives.
///
/// Returns the maximum relative error over `dirs` random directions.
pub fn directional_check(
    eval: &mut dyn FnMut(&[Tensor<f64>]) -> f64,
    at: &[Tensor<f64>],
    analytic: &[Tensor<f64>],
    dirs: usize,
    eps: f64,
    seed: u64,
) -> f64 {
    assert_eq!(at.len(), analytic.len());
    let mut rng: ChaCha8Rng = rng::stream(seed, "gradcheck");
    let mut worst = 0.0f64;
    for _ in 0..dirs {
        let direction: Vec<Tensor<f64>> = at
            .iter()
            .map(|t| {
                Tensor::from_vec(
                    t.shape(),
                    (0..t.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                )
            })
            .collect();
        let mut proj = 0.0f64;
        for (g, d) in analytic.iter().zip(&direction) {
            assert_eq!(g.shape(), d.shape());
            proj += g
                .data()
                .iter()
                .zip(d.data())
                .map(|(&a, &b)| a * b)
                .sum::<f64>();
        }
        let plus: Vec<Tensor<f64>> = at
            .iter()
            .zip(&direction)
            .map(|(t, d)| {
                let mut p = t.clone();
                p.axpy(eps, d);
                p
            })
            .collect();
        let minus: Vec<Tensor<f64>> = at
            .iter()
            .zip(&direction)
            .map(|(t, d)| {
                let mut p = t.clone();
                p.axpy(-eps, d);
                p
            })
            .collect();
        let numeric = (eval(&plus) - eval(&minus)) / (2.0 * eps);
        worst = worst.max(relative_error(proj, numeric));
    }
    worst
}
