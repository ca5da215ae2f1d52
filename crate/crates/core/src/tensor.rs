//! Dense 4-D tensors in NCHW layout.
//!
//! Data is shared behind an `Arc` so tensors clone in O(1); the autograd
//! tape stores every intermediate value and parameters are re-bound onto
//! a fresh tape each step, so cheap clones matter. Mutation goes through
//! [`Tensor::data_mut`], which copies on write when the buffer is shared.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::scalar::Scalar;
#[allow(unused_imports)]
use num_traits::Float;

/// NCHW dimensions.
pub type Shape = [usize; 4];

#[derive(Clone, Debug)]
pub struct Tensor<S> {
    shape: Shape,
    data: Arc<Vec<S>>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, S::zero())
    }

    pub fn full(shape: Shape, value: S) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: Arc::new(alloc::vec![value; len]),
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<S>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor data length does not match shape"
        );
        Tensor {
            shape,
            data: Arc::new(data),
        }
    }

    /// Build from a function of (n, c, h, w).
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> S) -> Self {
        let [n, c, h, w] = shape;
        let mut data = Vec::with_capacity(n * c * h * w);
        for ni in 0..n {
            for ci in 0..c {
                for hi in 0..h {
                    for wi in 0..w {
                        data.push(f(ni, ci, hi, wi));
                    }
                }
            }
        }
        Tensor::from_vec(shape, data)
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }
    #[inline]
    pub fn n(&self) -> usize {
        self.shape[0]
    }
    #[inline]
    pub fn c(&self) -> usize {
        self.shape[1]
    }
    #[inline]
    pub fn h(&self) -> usize {
        self.shape[2]
    }
    #[inline]
    pub fn w(&self) -> usize {
        self.shape[3]
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[S] {
        &self.data
    }

    /// Mutable access; copies the buffer if it is shared.
    #[inline]
    pub fn data_mut(&mut self) -> &mut [S] {
        Arc::make_mut(&mut self.data).as_mut_slice()
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> S {
        self.data[self.idx(n, c, h, w)]
    }

    #[inline]
    pub fn idx(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        debug_assert!(n < self.shape[0] && c < self.shape[1] && h < self.shape[2] && w < self.shape[3]);
        ((n * self.shape[1] + c) * self.shape[2] + h) * self.shape[3] + w
    }

    /// Elementwise map into a new tensor.
    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Tensor::from_vec(self.shape, self.data.iter().map(|&x| f(x)).collect())
    }

    /// Elementwise combination of two same-shaped tensors.
    pub fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Self {
        assert_eq!(self.shape, other.shape, "zip_map shape mismatch");
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Tensor::from_vec(self.shape, data)
    }

    /// self += alpha * other (in place).
    pub fn axpy(&mut self, alpha: S, other: &Self) {
        assert_eq!(self.shape, other.shape, "axpy shape mismatch");
        let dst = self.data_mut();
        for (d, &s) in dst.iter_mut().zip(other.data.iter()) {
            *d = *d + alpha * s;
        }
    }

    pub fn scale_in_place(&mut self, alpha: S) {
        for v in self.data_mut() {
            *v = *v * alpha;
        }
    }

    pub fn sum(&self) -> S {
        self.data.iter().copied().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Squared L2 norm, accumulated in f64.
    pub fn sq_norm_f64(&self) -> f64 {
        self.data
            .iter()
            .map(|v| {
                let x = v.to_f64_();
                x * x
            })
            .sum()
    }

    /// Cast elementwise to another scalar type through f64.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor::from_vec(
            self.shape,
            self.data.iter().map(|&x| T::scalar_from_f64(x.to_f64_())).collect(),
        )
    }

    /// Maximum absolute difference against another tensor of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| (a.to_f64_() - b.to_f64_()).abs())
            .fold(0.0, f64::max)
    }
}

impl<S: Scalar> PartialEq for Tensor<S> {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.data.iter().zip(other.data.iter()).all(|(a, b)| a == b)
    }
}
