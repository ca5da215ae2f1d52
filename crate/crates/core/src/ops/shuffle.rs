//! Sub-pixel shuffle: rearrange C*r^2 channels into an r x larger grid.
//!
//! out(r*y+dy, r*x+dx, c) = in(y, x, c*r^2 + dy*r + dx) — a bijective
//! index permutation, no arithmetic.

use alloc::boxed::Box;
use alloc::vec::Vec;

use super::{shape_bail, ShapeError};
use crate::autograd::{NodeId, Op, Tape};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub(crate) fn shuffle_forward<S: Scalar>(t: &Tensor<S>, r: usize) -> Tensor<S> {
    let [n, c_in, h, w] = t.shape();
    let c_out = c_in / (r * r);
    let mut out = Tensor::zeros([n, c_out, h * r, w * r]);
    {
        let dst = out.data_mut();
        let src = t.data();
        let (oh, ow) = (h * r, w * r);
        for ni in 0..n {
            for co in 0..c_out {
                for dy in 0..r {
                    for dx in 0..r {
                        let ci = co * r * r + dy * r + dx;
                        let sbase = (ni * c_in + ci) * h * w;
                        let obase = (ni * c_out + co) * oh * ow;
                        for y in 0..h {
                            for x in 0..w {
                                dst[obase + (r * y + dy) * ow + r * x + dx] =
                                    src[sbase + y * w + x];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Inverse rearrangement, used by the backward pass (and tests).
pub(crate) fn unshuffle<S: Scalar>(t: &Tensor<S>, r: usize) -> Tensor<S> {
    let [n, c, oh, ow] = t.shape();
    let (h, w) = (oh / r, ow / r);
    let c_in = c * r * r;
    let mut out = Tensor::zeros([n, c_in, h, w]);
    {
        let dst = out.data_mut();
        let src = t.data();
        for ni in 0..n {
            for co in 0..c {
                for dy in 0..r {
                    for dx in 0..r {
                        let ci = co * r * r + dy * r + dx;
                        let dbase = (ni * c_in + ci) * h * w;
                        let sbase = (ni * c + co) * oh * ow;
                        for y in 0..h {
                            for x in 0..w {
                                dst[dbase + y * w + x] =
                                    src[sbase + (r * y + dy) * ow + r * x + dx];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

struct PixelShuffle {
    r: usize,
}

impl<S: Scalar> Op<S> for PixelShuffle {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        _inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        alloc::vec![Some(unshuffle(grad_out, self.r))]
    }
}

impl<S: Scalar> Tape<S> {
    /// (N, C*r^2, H, W) -> (N, C, r*H, r*W).
    pub fn pixel_shuffle(&mut self, x: NodeId, r: usize) -> Result<NodeId, ShapeError> {
        let t = self.value(x);
        let [_, c_in, _, _] = t.shape();
        if r == 0 || c_in % (r * r) != 0 {
            shape_bail!("pixel_shuffle: {c_in} channels not divisible by r^2 = {}", r * r);
        }
        let out = shuffle_forward(t, r);
        Ok(self.push(out, alloc::vec![x], Box::new(PixelShuffle { r })))
    }
}

/// Non-graph helpers for tests and tools.
pub mod raw {
    use super::*;

    pub fn pixel_shuffle<S: Scalar>(t: &Tensor<S>, r: usize) -> Result<Tensor<S>, ShapeError> {
        if r == 0 || t.c() % (r * r) != 0 {
            shape_bail!("pixel_shuffle: {} channels not divisible by r^2 = {}", t.c(), r * r);
        }
        Ok(shuffle_forward(t, r))
    }

    pub fn pixel_unshuffle<S: Scalar>(t: &Tensor<S>, r: usize) -> Result<Tensor<S>, ShapeError> {
        if r == 0 || t.h() % r != 0 || t.w() % r != 0 {
            shape_bail!("pixel_unshuffle: size {}x{} not divisible by {r}", t.h(), t.w());
        }
        Ok(unshuffle(t, r))
    }
}
