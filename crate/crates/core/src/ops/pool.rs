//! 2x2 stride-2 average and max pooling (floor semantics on odd sizes).

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::autograd::{NodeId, Op, Tape};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

struct AvgPool2 {
    in_h: usize,
    in_w: usize,
}

impl<S: Scalar> Op<S> for AvgPool2 {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        _inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        let [n, c, oh, ow] = grad_out.shape();
        let quarter = S::scalar_from_f64(0.25);
        let mut g = Tensor::zeros([n, c, self.in_h, self.in_w]);
        {
            let dst = g.data_mut();
            let src = grad_out.data();
            for nc in 0..n * c {
                let ibase = nc * self.in_h * self.in_w;
                let obase = nc * oh * ow;
                for y in 0..oh {
                    for x in 0..ow {
                        let gv = src[obase + y * ow + x] * quarter;
                        for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                            dst[ibase + (2 * y + dy) * self.in_w + 2 * x + dx] =
                                dst[ibase + (2 * y + dy) * self.in_w + 2 * x + dx] + gv;
                        }
                    }
                }
            }
        }
        alloc::vec![Some(g)]
    }
}

struct MaxPool2 {
    in_h: usize,
    in_w: usize,
    /// flat input index of the winning element per output element
    argmax: Vec<u32>,
}

impl<S: Scalar> Op<S> for MaxPool2 {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        _inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        let [n, c, _, _] = grad_out.shape();
        let mut g = Tensor::zeros([n, c, self.in_h, self.in_w]);
        {
            let dst = g.data_mut();
            for (&a, &gv) in self.argmax.iter().zip(grad_out.data().iter()) {
                dst[a as usize] = dst[a as usize] + gv;
            }
        }
        alloc::vec![Some(g)]
    }
}

impl<S: Scalar> Tape<S> {
    pub fn avg_pool2(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let [n, c, h, w] = t.shape();
        let (oh, ow) = (h / 2, w / 2);
        assert!(oh >= 1 && ow >= 1, "avg_pool2 on degenerate size {h}x{w}");
        let quarter = S::scalar_from_f64(0.25);
        let mut out = Tensor::zeros([n, c, oh, ow]);
        {
            let dst = out.data_mut();
            let src = t.data();
            for nc in 0..n * c {
                let ibase = nc * h * w;
                let obase = nc * oh * ow;
                for y in 0..oh {
                    for x_ in 0..ow {
                        let p = ibase + 2 * y * w + 2 * x_;
                        let s = src[p] + src[p + 1] + src[p + w] + src[p + w + 1];
                        dst[obase + y * ow + x_] = s * quarter;
                    }
                }
            }
        }
        self.push(out, alloc::vec![x], Box::new(AvgPool2 { in_h: h, in_w: w }))
    }

    pub fn max_pool2(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let [n, c, h, w] = t.shape();
        let (oh, ow) = (h / 2, w / 2);
        assert!(oh >= 1 && ow >= 1, "max_pool2 on degenerate size {h}x{w}");
        let mut out = Tensor::zeros([n, c, oh, ow]);
        let mut argmax = alloc::vec![0u32; n * c * oh * ow];
        {
            let dst = out.data_mut();
            let src = t.data();
            for nc in 0..n * c {
                let ibase = nc * h * w;
                let obase = nc * oh * ow;
                for y in 0..oh {
                    for x_ in 0..ow {
                        let p = ibase + 2 * y * w + 2 * x_;
                        // first maximum wins on ties, scan order fixed
                        let mut best = p;
                        for q in [p + 1, p + w, p + w + 1] {
                            if src[q] > src[best] {
                                best = q;
                            }
                        }
                        dst[obase + y * ow + x_] = src[best];
                        argmax[obase + y * ow + x_] = best as u32;
                    }
                }
            }
        }
        self.push(
            out,
            alloc::vec![x],
            Box::new(MaxPool2 {
                in_h: h,
                in_w: w,
                argmax,
            }),
        )
    }
}
