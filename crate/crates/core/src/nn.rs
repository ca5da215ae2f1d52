//! Parameter containers and the two building blocks every subnetwork is
//! made of: stride-1 convolutions with LeakyReLU(0.1) and densely
//! connected convolution blocks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{NodeId, Tape};
use crate::config::LEAKY_SLOPE;
use crate::ops::{PadMode, ShapeError};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
#[allow(unused_imports)]
use num_traits::Float;

/// One learnable tensor. Ids are dense indices assigned at network
/// construction; they key optimizer state and tape bindings.
#[derive(Debug, Clone)]
pub struct Param<S> {
    pub id: usize,
    pub name: String,
    pub value: Tensor<S>,
}

/// Assigns dense parameter ids during network construction.
#[derive(Default)]
pub struct ParamBuilder {
    next_id: usize,
}

impl ParamBuilder {
    pub fn new() -> Self {
        ParamBuilder { next_id: 0 }
    }

    pub fn make<S: Scalar>(&mut self, name: String, value: Tensor<S>) -> Param<S> {
        let id = self.next_id;
        self.next_id += 1;
        Param { id, name, value }
    }

    pub fn count(&self) -> usize {
        self.next_id
    }
}

/// Tape nodes for every bound parameter, indexed by parameter id.
pub struct Binding {
    nodes: Vec<NodeId>,
}

impl Binding {
    /// Enter all `params` as leaves. `trainable` controls whether the
    /// graph records gradient demand for them.
    pub fn bind<S: Scalar>(tape: &mut Tape<S>, params: &[&Param<S>], trainable: bool) -> Binding {
        let mut nodes = alloc::vec![0usize; params.len()];
        for p in params {
            nodes[p.id] = tape.leaf(p.value.clone(), trainable);
        }
        Binding { nodes }
    }

    #[inline]
    pub fn node<S>(&self, p: &Param<S>) -> NodeId {
        self.nodes[p.id]
    }
}

/// Kaiming-uniform bound for LeakyReLU(0.1) fan-in scaling.
fn kaiming_bound(fan_in: usize) -> f64 {
    let gain = (2.0 / (1.0 + LEAKY_SLOPE * LEAKY_SLOPE)).sqrt();
    gain * (3.0 / fan_in as f64).sqrt()
}

/// A stride-1 same-size convolution layer with bias.
#[derive(Debug, Clone)]
pub struct Conv<S> {
    pub w: Param<S>,
    pub b: Param<S>,
    pad: PadMode,
}

impl<S: Scalar> Conv<S> {
    pub fn new(
        pb: &mut ParamBuilder,
        name: &str,
        in_c: usize,
        out_c: usize,
        k: usize,
        pad: PadMode,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = in_c * k * k;
        let bound = kaiming_bound(fan_in);
        let data: Vec<S> = (0..out_c * fan_in)
            .map(|_| S::scalar_from_f64(rng.gen_range(-bound..bound)))
            .collect();
        let w = pb.make(format!("{name}.w"), Tensor::from_vec([out_c, in_c, k, k], data));
        let b = pb.make(format!("{name}.b"), Tensor::zeros([1, out_c, 1, 1]));
        Conv { w, b, pad }
    }

    /// All-zero weights; the flow refinement heads start at zero so the
    /// initial flow field is exactly zero.
    pub fn new_zeroed(
        pb: &mut ParamBuilder,
        name: &str,
        in_c: usize,
        out_c: usize,
        k: usize,
        pad: PadMode,
    ) -> Self {
        let w = pb.make(
            format!("{name}.w"),
            Tensor::zeros([out_c, in_c, k, k]),
        );
        let b = pb.make(format!("{name}.b"), Tensor::zeros([1, out_c, 1, 1]));
        Conv { w, b, pad }
    }

    pub fn out_channels(&self) -> usize {
        self.w.value.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.w.value.shape()[1]
    }

    /// Linear application (no activation).
    pub fn apply(
        &self,
        tape: &mut Tape<S>,
        bind: &Binding,
        x: NodeId,
    ) -> Result<NodeId, ShapeError> {
        tape.conv2d(x, bind.node(&self.w), Some(bind.node(&self.b)), self.pad)
    }

    /// Convolution followed by LeakyReLU(0.1).
    pub fn apply_lrelu(
        &self,
        tape: &mut Tape<S>,
        bind: &Binding,
        x: NodeId,
    ) -> Result<NodeId, ShapeError> {
        let y = self.apply(tape, bind, x)?;
        Ok(tape.leaky_relu(y, S::scalar_from_f64(LEAKY_SLOPE)))
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<&'a Param<S>>) {
        out.push(&self.w);
        out.push(&self.b);
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<S>>) {
        out.push(&mut self.w);
        out.push(&mut self.b);
    }
}

/// Densely connected convolution block: `layers` 3x3 convolutions with
/// `growth` output channels each, every layer seeing the concatenation
/// of the block input and all previous layer outputs, closed by a 1x1
/// fusion back to `out_c` channels.
#[derive(Debug, Clone)]
pub struct DenseBlock<S> {
    pub convs: Vec<Conv<S>>,
    pub fusion: Conv<S>,
}

/// Internal growth of every dense layer.
pub const DENSE_GROWTH: usize = 32;
/// Layer counts: the decoder block is twice as deep as the encoder block.
pub const ENCODER_DENSE_LAYERS: usize = 4;
pub const DECODER_DENSE_LAYERS: usize = 8;

impl<S: Scalar> DenseBlock<S> {
    pub fn new(
        pb: &mut ParamBuilder,
        name: &str,
        in_c: usize,
        out_c: usize,
        layers: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut convs = Vec::with_capacity(layers);
        let mut c = in_c;
        for i in 0..layers {
            convs.push(Conv::new(
                pb,
                &format!("{name}.conv{i}"),
                c,
                DENSE_GROWTH,
                3,
                PadMode::Zero,
                rng,
            ));
            c += DENSE_GROWTH;
        }
        let fusion = Conv::new(pb, &format!("{name}.fuse"), c, out_c, 1, PadMode::Zero, rng);
        DenseBlock { convs, fusion }
    }

    pub fn forward(
        &self,
        tape: &mut Tape<S>,
        bind: &Binding,
        x: NodeId,
    ) -> Result<NodeId, ShapeError> {
        let mut cat = x;
        for conv in &self.convs {
            let y = conv.apply_lrelu(tape, bind, cat)?;
            cat = tape.concat_c(&[cat, y])?;
        }
        self.fusion.apply_lrelu(tape, bind, cat)
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<&'a Param<S>>) {
        for c in &self.convs {
            c.visit(out);
        }
        self.fusion.visit(out);
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<S>>) {
        for c in &mut self.convs {
            c.visit_mut(out);
        }
        self.fusion.visit_mut(out);
    }

    /// Learnable scalar count from the layer shapes.
    pub fn param_count(in_c: usize, out_c: usize, layers: usize) -> u64 {
        let mut total = 0u64;
        let mut c = in_c;
        for _ in 0..layers {
            total += (c * DENSE_GROWTH * 9 + DENSE_GROWTH) as u64;
            c += DENSE_GROWTH;
        }
        total + (c * out_c + out_c) as u64
    }
}
