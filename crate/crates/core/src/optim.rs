//! Adam with the standard moment coefficients, plus global-norm gradient
//! clipping and the halving learning-rate schedule.

use alloc::vec::Vec;

use crate::nn::Param;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
#[allow(unused_imports)]
use num_traits::Float;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Optimizer state covering a dense parameter id range. Parameters that
/// never receive gradients (e.g. the flow estimator during pretraining)
/// are never moved.
#[derive(Clone)]
pub struct Adam<S: Scalar> {
    pub m: Vec<Option<Tensor<S>>>,
    pub v: Vec<Option<Tensor<S>>>,
    pub t: u64,
}

impl<S: Scalar> Adam<S> {
    pub fn new(num_params: usize) -> Self {
        Adam {
            m: alloc::vec![None; num_params],
            v: alloc::vec![None; num_params],
            t: 0,
        }
    }

    /// Grow state to cover late-added parameters (joint phase adds the
    /// flow estimator after pretraining).
    pub fn resize(&mut self, num_params: usize) {
        while self.m.len() < num_params {
            self.m.push(None);
            self.v.push(None);
        }
    }

    /// One update over `params` with gradients indexed by param id.
    /// `lr` comes from the schedule; `clip` is an optional global-norm
    /// bound applied across all present gradients.
    pub fn step(
        &mut self,
        params: &mut [&mut Param<S>],
        grads: &mut [Option<Tensor<S>>],
        lr: f64,
        clip: Option<f64>,
    ) {
        self.t += 1;
        let scale = match clip {
            Some(c) => {
                let sq: f64 = grads
                    .iter()
                    .flatten()
                    .map(|g| g.sq_norm_f64())
                    .sum();
                let norm = sq.sqrt();
                if norm > c && norm > 0.0 {
                    c / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        let b1 = S::scalar_from_f64(ADAM_BETA1);
        let b2 = S::scalar_from_f64(ADAM_BETA2);
        let one = S::one();
        let bias1 = S::scalar_from_f64(1.0 - ADAM_BETA1.powi(self.t as i32));
        let bias2 = S::scalar_from_f64(1.0 - ADAM_BETA2.powi(self.t as i32));
        let eps = S::scalar_from_f64(ADAM_EPS);
        let lr_s = S::scalar_from_f64(lr);
        let clip_s = S::scalar_from_f64(scale);
        for p in params.iter_mut() {
            let id = p.id;
            let Some(g) = grads.get_mut(id).and_then(|g| g.take()) else {
                continue;
            };
            let m = self.m[id].get_or_insert_with(|| Tensor::zeros(g.shape()));
            let v = self.v[id].get_or_insert_with(|| Tensor::zeros(g.shape()));
            let md = m.data_mut();
            let vd = v.data_mut();
            let pd = p.value.data_mut();
            for ((pi, mi_vi), &gi_raw) in pd
                .iter_mut()
                .zip(md.iter_mut().zip(vd.iter_mut()))
                .zip(g.data())
            {
                let (mi, vi) = mi_vi;
                let gi = gi_raw * clip_s;
                *mi = b1 * *mi + (one - b1) * gi;
                *vi = b2 * *vi + (one - b2) * gi * gi;
                let mhat = *mi / bias1;
                let vhat = *vi / bias2;
                *pi = *pi - lr_s * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
