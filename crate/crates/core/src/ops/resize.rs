//! Bilinear resize (align_corners = false), used for the x r base-image
//! upsampling, pyramid merging and flow upscaling.
//!
//! Sampling uses the lerp form `a + t*(b-a)` so constant inputs resize to
//! exactly the same constant and integral source positions reproduce
//! source values bit-exactly.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::autograd::{NodeId, Op, Tape};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
#[allow(unused_imports)]
use num_traits::Float;

/// Per-output-coordinate source index pair and interpolation weight.
struct Axis {
    i0: Vec<usize>,
    i1: Vec<usize>,
    t: Vec<f64>,
}

fn axis_map(in_len: usize, out_len: usize) -> Axis {
    let scale = in_len as f64 / out_len as f64;
    let mut i0 = Vec::with_capacity(out_len);
    let mut i1 = Vec::with_capacity(out_len);
    let mut t = Vec::with_capacity(out_len);
    for o in 0..out_len {
        // align_corners=false convention, clamped to the edges
        let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f64);
        let f = src.floor();
        let a = f as usize;
        let b = (a + 1).min(in_len - 1);
        i0.push(a);
        i1.push(b);
        t.push(src - f);
    }
    Axis { i0, i1, t }
}

struct ResizeBilinear {
    in_h: usize,
    in_w: usize,
}

impl<S: Scalar> Op<S> for ResizeBilinear {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        _inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        let [n, c, oh, ow] = grad_out.shape();
        let ya = axis_map(self.in_h, oh);
        let xa = axis_map(self.in_w, ow);
        let mut g = Tensor::zeros([n, c, self.in_h, self.in_w]);
        {
            let dst = g.data_mut();
            let src = grad_out.data();
            for nc in 0..n * c {
                let ibase = nc * self.in_h * self.in_w;
                let obase = nc * oh * ow;
                for y in 0..oh {
                    let (y0, y1) = (ya.i0[y], ya.i1[y]);
                    let ty = S::scalar_from_f64(ya.t[y]);
                    for x in 0..ow {
                        let (x0, x1) = (xa.i0[x], xa.i1[x]);
                        let tx = S::scalar_from_f64(xa.t[x]);
                        let gv = src[obase + y * ow + x];
                        let w00 = (S::one() - ty) * (S::one() - tx);
                        let w01 = (S::one() - ty) * tx;
                        let w10 = ty * (S::one() - tx);
                        let w11 = ty * tx;
                        dst[ibase + y0 * self.in_w + x0] =
                            dst[ibase + y0 * self.in_w + x0] + gv * w00;
                        dst[ibase + y0 * self.in_w + x1] =
                            dst[ibase + y0 * self.in_w + x1] + gv * w01;
                        dst[ibase + y1 * self.in_w + x0] =
                            dst[ibase + y1 * self.in_w + x0] + gv * w10;
                        dst[ibase + y1 * self.in_w + x1] =
                            dst[ibase + y1 * self.in_w + x1] + gv * w11;
                    }
                }
            }
        }
        alloc::vec![Some(g)]
    }
}

impl<S: Scalar> Tape<S> {
    /// Resize to (out_h, out_w) with bilinear interpolation.
    pub fn resize_bilinear(&mut self, x: NodeId, out_h: usize, out_w: usize) -> NodeId {
        let t = self.value(x);
        let [n, c, h, w] = t.shape();
        let ya = axis_map(h, out_h);
        let xa = axis_map(w, out_w);
        let mut out = Tensor::zeros([n, c, out_h, out_w]);
        {
            let dst = out.data_mut();
            let src = t.data();
            for nc in 0..n * c {
                let ibase = nc * h * w;
                let obase = nc * out_h * out_w;
                for y in 0..out_h {
                    let (y0, y1) = (ya.i0[y], ya.i1[y]);
                    let ty = S::scalar_from_f64(ya.t[y]);
                    for x_ in 0..out_w {
                        let (x0, x1) = (xa.i0[x_], xa.i1[x_]);
                        let tx = S::scalar_from_f64(xa.t[x_]);
                        let p00 = src[ibase + y0 * w + x0];
                        let p01 = src[ibase + y0 * w + x1];
                        let p10 = src[ibase + y1 * w + x0];
                        let p11 = src[ibase + y1 * w + x1];
                        let top = p00 + tx * (p01 - p00);
                        let bot = p10 + tx * (p11 - p10);
                        dst[obase + y * out_w + x_] = top + ty * (bot - top);
                    }
                }
            }
        }
        self.push(
            out,
            alloc::vec![x],
            Box::new(ResizeBilinear { in_h: h, in_w: w }),
        )
    }
}
