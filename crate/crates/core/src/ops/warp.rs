//! Backward warping: sample a source raster at positions displaced by a
//! dense flow field, bilinearly, with edge clamping. Differentiable with
//! respect to both the source and the flow.

use alloc::boxed::Box;
use alloc::vec::Vec;

use super::{shape_bail, ShapeError};
use crate::autograd::{NodeId, Op, Tape};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
#[allow(unused_imports)]
use num_traits::Float;

struct Warp;

#[inline]
fn sample_setup(pos: f64, len: usize) -> (usize, usize, f64, bool) {
    // returns (i0, i1, fraction, clamped); clamped positions have zero
    // derivative with respect to the flow component
    if pos <= 0.0 {
        (0, 0, 0.0, true)
    } else if pos >= (len - 1) as f64 {
        (len - 1, len - 1, 0.0, true)
    } else {
        let f = pos.floor();
        let i0 = f as usize;
        (i0, i0 + 1, pos - f, false)
    }
}

impl<S: Scalar> Op<S> for Warp {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        let src = inputs[0];
        let flow = inputs[1];
        let [n, c, h, w] = src.shape();
        let plane = h * w;
        let mut g_src = needs[0].then(|| Tensor::zeros([n, c, h, w]));
        let mut g_flow = needs[1].then(|| Tensor::zeros([n, 2, h, w]));
        let fd = flow.data();
        let sd = src.data();
        let gd = grad_out.data();
        for ni in 0..n {
            let fu = &fd[(ni * 2) * plane..(ni * 2 + 1) * plane];
            let fv = &fd[(ni * 2 + 1) * plane..(ni * 2 + 2) * plane];
            for y in 0..h {
                for x in 0..w {
                    let p = y * w + x;
                    let sx = x as f64 + fu[p].to_f64_();
                    let sy = y as f64 + fv[p].to_f64_();
                    let (x0, x1, tx, cx) = sample_setup(sx, w);
                    let (y0, y1, ty, cy) = sample_setup(sy, h);
                    let (txs, tys) = (S::scalar_from_f64(tx), S::scalar_from_f64(ty));
                    let w00 = (S::one() - tys) * (S::one() - txs);
                    let w01 = (S::one() - tys) * txs;
                    let w10 = tys * (S::one() - txs);
                    let w11 = tys * txs;
                    let mut du = S::zero();
                    let mut dv = S::zero();
                    for ci in 0..c {
                        let base = (ni * c + ci) * plane;
                        let g = gd[base + p];
                        let p00 = sd[base + y0 * w + x0];
                        let p01 = sd[base + y0 * w + x1];
                        let p10 = sd[base + y1 * w + x0];
                        let p11 = sd[base + y1 * w + x1];
                        if let Some(gs) = g_src.as_mut() {
                            let dst = gs.data_mut();
                            dst[base + y0 * w + x0] = dst[base + y0 * w + x0] + g * w00;
                            dst[base + y0 * w + x1] = dst[base + y0 * w + x1] + g * w01;
                            dst[base + y1 * w + x0] = dst[base + y1 * w + x0] + g * w10;
                            dst[base + y1 * w + x1] = dst[base + y1 * w + x1] + g * w11;
                        }
                        if g_flow.is_some() {
                            if !cx {
                                let top = p01 - p00;
                                let bot = p11 - p10;
                                du = du + g * ((S::one() - tys) * top + tys * bot);
                            }
                            if !cy {
                                let left = p10 - p00;
                                let right = p11 - p01;
                                dv = dv + g * ((S::one() - txs) * left + txs * right);
                            }
                        }
                    }
                    if let Some(gf) = g_flow.as_mut() {
                        let dst = gf.data_mut();
                        dst[(ni * 2) * plane + p] = du;
                        dst[(ni * 2 + 1) * plane + p] = dv;
                    }
                }
            }
        }
        alloc::vec![g_src, g_flow]
    }
}

impl<S: Scalar> Tape<S> {
    /// out(x, y) = bilinear_sample(src, (x, y) + flow(x, y)).
    ///
    /// `flow` is [N, 2, H, W]: channel 0 is the horizontal displacement
    /// (+x right), channel 1 vertical (+y down). Out-of-bounds samples
    /// clamp to the edge.
    pub fn warp(&mut self, src: NodeId, flow: NodeId) -> Result<NodeId, ShapeError> {
        let ss = self.value(src).shape();
        let fs = self.value(flow).shape();
        let [n, c, h, w] = ss;
        if fs != [n, 2, h, w] {
            shape_bail!("warp: flow shape {fs:?} does not match source [{n},{c},{h},{w}]");
        }
        let mut out = Tensor::zeros([n, c, h, w]);
        {
            let plane = h * w;
            let src_t = self.value(src).clone();
            let flow_t = self.value(flow).clone();
            let sd = src_t.data();
            let fd = flow_t.data();
            let dst = out.data_mut();
            for ni in 0..n {
                let fu = &fd[(ni * 2) * plane..(ni * 2 + 1) * plane];
                let fv = &fd[(ni * 2 + 1) * plane..(ni * 2 + 2) * plane];
                for y in 0..h {
                    for x in 0..w {
                        let p = y * w + x;
                        let sx = x as f64 + fu[p].to_f64_();
                        let sy = y as f64 + fv[p].to_f64_();
                        let (x0, x1, tx, _) = sample_setup(sx, w);
                        let (y0, y1, ty, _) = sample_setup(sy, h);
                        let (txs, tys) = (S::scalar_from_f64(tx), S::scalar_from_f64(ty));
                        for ci in 0..c {
                            let base = (ni * c + ci) * plane;
                            let p00 = sd[base + y0 * w + x0];
                            let p01 = sd[base + y0 * w + x1];
                            let p10 = sd[base + y1 * w + x0];
                            let p11 = sd[base + y1 * w + x1];
                            let top = p00 + txs * (p01 - p00);
                            let bot = p10 + txs * (p11 - p10);
                            dst[base + p] = top + tys * (bot - top);
                        }
                    }
                }
            }
        }
        Ok(self.push(out, alloc::vec![src, flow], Box::new(Warp)))
    }
}
