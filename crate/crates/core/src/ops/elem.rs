//! Elementwise and reduction ops: arithmetic, activations, concat/slice
//! along channels, per-channel bias, scalar reductions.

use alloc::boxed::Box;
use alloc::vec::Vec;

use super::{shape_bail, ShapeError};
use crate::autograd::{NodeId, Op, Tape};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// out = ca * a + cb * b
struct LinComb<S> {
    ca: S,
    cb: S,
}

impl<S: Scalar> Op<S> for LinComb<S> {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        _inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        let ga = needs[0].then(|| grad_out.map(|g| g * self.ca));
        let gb = needs[1].then(|| grad_out.map(|g| g * self.cb));
        alloc::vec![ga, gb]
    }
}

struct Mul;

impl<S: Scalar> Op<S> for Mul {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        let ga = needs[0].then(|| grad_out.zip_map(inputs[1], |g, b| g * b));
        let gb = needs[1].then(|| grad_out.zip_map(inputs[0], |g, a| g * a));
        alloc::vec![ga, gb]
    }
}

struct Scale<S> {
    c: S,
}

impl<S: Scalar> Op<S> for Scale<S> {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        _inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        alloc::vec![Some(grad_out.map(|g| g * self.c))]
    }
}

struct LeakyRelu<S> {
    slope: S,
}

impl<S: Scalar> Op<S> for LeakyRelu<S> {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        let slope = self.slope;
        alloc::vec![Some(grad_out.zip_map(inputs[0], |g, x| {
            if x > S::zero() {
                g
            } else {
                g * slope
            }
        }))]
    }
}

struct Sigmoid;

impl<S: Scalar> Op<S> for Sigmoid {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        _inputs: &[&Tensor<S>],
        output: &Tensor<S>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        alloc::vec![Some(grad_out.zip_map(output, |g, y| g * y * (S::one() - y)))]
    }
}

struct Abs;

impl<S: Scalar> Op<S> for Abs {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        alloc::vec![Some(grad_out.zip_map(inputs[0], |g, x| {
            if x > S::zero() {
                g
            } else if x < S::zero() {
                -g
            } else {
                S::zero()
            }
        }))]
    }
}

/// Mean over all elements, producing a [1,1,1,1] scalar node.
struct Mean {
    count: usize,
}

impl<S: Scalar> Op<S> for Mean {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        let g = grad_out.data()[0] / S::scalar_from_f64(self.count as f64);
        alloc::vec![Some(Tensor::full(inputs[0].shape(), g))]
    }
}

/// Per-channel bias add: x (N,C,H,W) + b (1,C,1,1).
struct BiasAdd;

impl<S: Scalar> Op<S> for BiasAdd {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        _inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        let gx = needs[0].then(|| grad_out.clone());
        let gb = needs[1].then(|| {
            let [n, c, h, w] = grad_out.shape();
            let mut acc = Tensor::zeros([1, c, 1, 1]);
            {
                let a = acc.data_mut();
                let g = grad_out.data();
                for ni in 0..n {
                    for ci in 0..c {
                        let base = (ni * c + ci) * h * w;
                        let mut s = S::zero();
                        for &v in &g[base..base + h * w] {
                            s = s + v;
                        }
                        a[ci] = a[ci] + s;
                    }
                }
            }
            acc
        });
        alloc::vec![gx, gb]
    }
}

/// Concatenation along the channel axis.
struct ConcatC {
    channels: Vec<usize>,
}

impl<S: Scalar> Op<S> for ConcatC {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        let [n, _c_out, h, w] = grad_out.shape();
        let plane = h * w;
        let c_out: usize = self.channels.iter().sum();
        let mut grads = Vec::with_capacity(inputs.len());
        let mut c_off = 0;
        for (idx, &ci) in self.channels.iter().enumerate() {
            if !needs[idx] {
                c_off += ci;
                grads.push(None);
                continue;
            }
            let mut g = Tensor::zeros([n, ci, h, w]);
            {
                let dst = g.data_mut();
                let src = grad_out.data();
                for ni in 0..n {
                    let src_base = (ni * c_out + c_off) * plane;
                    let dst_base = ni * ci * plane;
                    dst[dst_base..dst_base + ci * plane]
                        .copy_from_slice(&src[src_base..src_base + ci * plane]);
                }
            }
            grads.push(Some(g));
            c_off += ci;
        }
        grads
    }
}

/// Batch slice: item n of an (N,C,H,W) tensor as (1,C,H,W).
struct SliceN {
    n: usize,
}

impl<S: Scalar> Op<S> for SliceN {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        let shape = inputs[0].shape();
        let item = shape[1] * shape[2] * shape[3];
        let mut g = Tensor::zeros(shape);
        g.data_mut()[self.n * item..(self.n + 1) * item].copy_from_slice(grad_out.data());
        alloc::vec![Some(g)]
    }
}

/// Channel slice [c0, c1).
struct SliceC {
    c0: usize,
    c1: usize,
}

impl<S: Scalar> Op<S> for SliceC {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        let [n, c, h, w] = inputs[0].shape();
        let plane = h * w;
        let cw = self.c1 - self.c0;
        let mut g = Tensor::zeros([n, c, h, w]);
        {
            let dst = g.data_mut();
            let src = grad_out.data();
            for ni in 0..n {
                let dst_base = (ni * c + self.c0) * plane;
                let src_base = ni * cw * plane;
                dst[dst_base..dst_base + cw * plane]
                    .copy_from_slice(&src[src_base..src_base + cw * plane]);
            }
        }
        alloc::vec![Some(g)]
    }
}

/// Dot product over the channel axis: (N,C,H,W) x (N,C,H,W) -> (N,1,H,W).
struct ChannelDot;

impl<S: Scalar> Op<S> for ChannelDot {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        let broadcast = |other: &Tensor<S>| {
            let [n, c, h, w] = other.shape();
            let plane = h * w;
            let mut g = Tensor::zeros([n, c, h, w]);
            {
                let dst = g.data_mut();
                let gj = grad_out.data();
                let o = other.data();
                for ni in 0..n {
                    for ci in 0..c {
                        let base = (ni * c + ci) * plane;
                        let gbase = ni * plane;
                        for p in 0..plane {
                            dst[base + p] = gj[gbase + p] * o[base + p];
                        }
                    }
                }
            }
            g
        };
        let ga = needs[0].then(|| broadcast(inputs[1]));
        let gb = needs[1].then(|| broadcast(inputs[0]));
        alloc::vec![ga, gb]
    }
}

/// Broadcast multiply: scores (N,1,H,W) * features (N,C,H,W).
struct BroadcastMulC;

impl<S: Scalar> Op<S> for BroadcastMulC {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        let scores = inputs[0];
        let feats = inputs[1];
        let [n, c, h, w] = feats.shape();
        let plane = h * w;
        let g_scores = needs[0].then(|| {
            let mut g = Tensor::zeros([n, 1, h, w]);
            {
                let dst = g.data_mut();
                let go = grad_out.data();
                let f = feats.data();
                for ni in 0..n {
                    for ci in 0..c {
                        let base = (ni * c + ci) * plane;
                        let sbase = ni * plane;
                        for p in 0..plane {
                            dst[sbase + p] = dst[sbase + p] + go[base + p] * f[base + p];
                        }
                    }
                }
            }
            g
        });
        let g_feats = needs[1].then(|| {
            let mut g = Tensor::zeros([n, c, h, w]);
            {
                let dst = g.data_mut();
                let go = grad_out.data();
                let s = scores.data();
                for ni in 0..n {
                    for ci in 0..c {
                        let base = (ni * c + ci) * plane;
                        let sbase = ni * plane;
                        for p in 0..plane {
                            dst[base + p] = go[base + p] * s[sbase + p];
                        }
                    }
                }
            }
            g
        });
        alloc::vec![g_scores, g_feats]
    }
}

impl<S: Scalar> Tape<S> {
    pub fn lincomb(&mut self, a: NodeId, ca: S, b: NodeId, cb: S) -> NodeId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "lincomb shape mismatch");
        let out = ta.zip_map(tb, |x, y| ca * x + cb * y);
        self.push(out, alloc::vec![a, b], Box::new(LinComb { ca, cb }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.lincomb(a, S::one(), b, S::one())
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.lincomb(a, S::one(), b, -S::one())
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(out, alloc::vec![a, b], Box::new(Mul))
    }

    pub fn scale(&mut self, a: NodeId, c: S) -> NodeId {
        let out = self.value(a).map(|x| x * c);
        self.push(out, alloc::vec![a], Box::new(Scale { c }))
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: S) -> NodeId {
        let out = self
            .value(a)
            .map(|x| if x > S::zero() { x } else { x * slope });
        self.push(out, alloc::vec![a], Box::new(LeakyRelu { slope }))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(|x| {
            let e = (-x).exp();
            S::one() / (S::one() + e)
        });
        self.push(out, alloc::vec![a], Box::new(Sigmoid))
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(|x| x.abs());
        self.push(out, alloc::vec![a], Box::new(Abs))
    }

    /// Mean over every element; result is a [1,1,1,1] node.
    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        let count = t.len();
        let mean = t.sum() / S::scalar_from_f64(count as f64);
        self.push(
            Tensor::from_vec([1, 1, 1, 1], alloc::vec![mean]),
            alloc::vec![a],
            Box::new(Mean { count }),
        )
    }

    /// x (N,C,H,W) + bias (1,C,1,1), broadcast over N,H,W.
    pub fn bias_add(&mut self, x: NodeId, b: NodeId) -> NodeId {
        let (tx, tb) = (self.value(x), self.value(b));
        let [n, c, h, w] = tx.shape();
        assert_eq!(tb.shape(), [1, c, 1, 1], "bias shape mismatch");
        let plane = h * w;
        let mut out = tx.clone();
        {
            let dst = out.data_mut();
            let bias = tb.data();
            for ni in 0..n {
                for ci in 0..c {
                    let base = (ni * c + ci) * plane;
                    let bv = bias[ci];
                    for v in &mut dst[base..base + plane] {
                        *v = *v + bv;
                    }
                }
            }
        }
        self.push(out, alloc::vec![x, b], Box::new(BiasAdd))
    }

    /// Concatenate along channels. All inputs must share N, H, W.
    pub fn concat_c(&mut self, ids: &[NodeId]) -> Result<NodeId, ShapeError> {
        if ids.is_empty() {
            shape_bail!("concat of zero tensors");
        }
        let [n, _, h, w] = self.value(ids[0]).shape();
        let mut channels = Vec::with_capacity(ids.len());
        let mut c_out = 0;
        for &id in ids {
            let s = self.value(id).shape();
            if s[0] != n || s[2] != h || s[3] != w {
                shape_bail!("concat_c operand {:?} incompatible with [{n},_,{h},{w}]", s);
            }
            channels.push(s[1]);
            c_out += s[1];
        }
        let plane = h * w;
        let mut out = Tensor::zeros([n, c_out, h, w]);
        {
            let dst = out.data_mut();
            let mut c_off = 0;
            for &id in ids {
                let t = self.value(id);
                let ci = t.shape()[1];
                let src = t.data();
                for ni in 0..n {
                    let dst_base = (ni * c_out + c_off) * plane;
                    let src_base = ni * ci * plane;
                    dst[dst_base..dst_base + ci * plane]
                        .copy_from_slice(&src[src_base..src_base + ci * plane]);
                }
                c_off += ci;
            }
        }
        Ok(self.push(out, ids.to_vec(), Box::new(ConcatC { channels })))
    }

    /// Batch item `n` as a (1,C,H,W) node.
    pub fn slice_n(&mut self, a: NodeId, n: usize) -> NodeId {
        let t = self.value(a);
        let [nn, c, h, w] = t.shape();
        assert!(n < nn, "slice_n out of range");
        let item = c * h * w;
        let out = Tensor::from_vec([1, c, h, w], t.data()[n * item..(n + 1) * item].to_vec());
        self.push(out, alloc::vec![a], Box::new(SliceN { n }))
    }

    /// Channel slice [c0, c1).
    pub fn slice_c(&mut self, a: NodeId, c0: usize, c1: usize) -> NodeId {
        let t = self.value(a);
        let [n, c, h, w] = t.shape();
        assert!(c0 < c1 && c1 <= c, "slice_c out of range");
        let plane = h * w;
        let cw = c1 - c0;
        let mut out = Tensor::zeros([n, cw, h, w]);
        {
            let dst = out.data_mut();
            let src = t.data();
            for ni in 0..n {
                let src_base = (ni * c + c0) * plane;
                let dst_base = ni * cw * plane;
                dst[dst_base..dst_base + cw * plane]
                    .copy_from_slice(&src[src_base..src_base + cw * plane]);
            }
        }
        self.push(out, alloc::vec![a], Box::new(SliceC { c0, c1 }))
    }

    /// Per-pixel dot product over channels -> single-channel map.
    pub fn channel_dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "channel_dot shape mismatch");
        let [n, c, h, w] = ta.shape();
        let plane = h * w;
        let mut out = Tensor::zeros([n, 1, h, w]);
        {
            let dst = out.data_mut();
            let x = ta.data();
            let y = tb.data();
            for ni in 0..n {
                for ci in 0..c {
                    let base = (ni * c + ci) * plane;
                    let obase = ni * plane;
                    for p in 0..plane {
                        dst[obase + p] = dst[obase + p] + x[base + p] * y[base + p];
                    }
                }
            }
        }
        self.push(out, alloc::vec![a, b], Box::new(ChannelDot))
    }

    /// scores (N,1,H,W) * features (N,C,H,W), score broadcast over channels.
    pub fn broadcast_mul_c(&mut self, scores: NodeId, feats: NodeId) -> NodeId {
        let (ts, tf) = (self.value(scores), self.value(feats));
        let [n, c, h, w] = tf.shape();
        assert_eq!(ts.shape(), [n, 1, h, w], "score map shape mismatch");
        let plane = h * w;
        let mut out = Tensor::zeros([n, c, h, w]);
        {
            let dst = out.data_mut();
            let s = ts.data();
            let f = tf.data();
            for ni in 0..n {
                for ci in 0..c {
                    let base = (ni * c + ci) * plane;
                    let sbase = ni * plane;
                    for p in 0..plane {
                        dst[base + p] = f[base + p] * s[sbase + p];
                    }
                }
            }
        }
        self.push(out, alloc::vec![scores, feats], Box::new(BroadcastMulC))
    }

    /// Mean absolute difference of two same-shaped nodes (scalar node).
    pub fn l1_mean(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let d = self.sub(a, b);
        let d = self.abs(d);
        self.mean_all(d)
    }
}
