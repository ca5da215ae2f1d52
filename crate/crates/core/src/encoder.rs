//! Shared-weight per-frame feature extractor: a 3x3 stem lifting RGB to
//! the base width, followed by B dense blocks. Every block's output is
//! kept, giving one feature map per block per frame.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::autograd::{NodeId, Tape};
use crate::config::ValidatedConfig;
use crate::frame::CHANNELS;
use crate::nn::{Binding, Conv, DenseBlock, Param, ParamBuilder, ENCODER_DENSE_LAYERS};
use crate::ops::{PadMode, ShapeError};
use crate::scalar::Scalar;

/// Encoder weights, shared across all time indices.
#[derive(Debug, Clone)]
pub struct Encoder<S> {
    pub stem: Conv<S>,
    pub blocks: Vec<DenseBlock<S>>,
}

/// Per-block, per-frame encoder outputs e[i][t], all at LR spatial size.
pub struct FeaturePyramid {
    /// features[block][frame] -> tape node
    pub features: Vec<Vec<NodeId>>,
}

impl FeaturePyramid {
    pub fn num_blocks(&self) -> usize {
        self.features.len()
    }

    pub fn num_frames(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Node for block i (0-based), frame t.
    pub fn at(&self, block: usize, frame: usize) -> NodeId {
        self.features[block][frame]
    }
}

impl<S: Scalar> Encoder<S> {
    pub fn new(pb: &mut ParamBuilder, cfg: &ValidatedConfig, rng: &mut ChaCha8Rng) -> Self {
        let c = cfg.base_channels;
        let stem = Conv::new(pb, "encoder.stem", CHANNELS, c, 3, PadMode::Zero, rng);
        let blocks = (0..cfg.num_blocks)
            .map(|i| {
                DenseBlock::new(
                    pb,
                    &format!("encoder.block{i}"),
                    c,
                    c,
                    ENCODER_DENSE_LAYERS,
                    rng,
                )
            })
            .collect();
        Encoder { stem, blocks }
    }

    /// Encode a batch of frames (stacked as the tensor batch axis) into a
    /// pyramid. Weight sharing across frames is the batch dimension.
    pub fn forward(
        &self,
        tape: &mut Tape<S>,
        bind: &Binding,
        frames: NodeId,
    ) -> Result<FeaturePyramid, ShapeError> {
        let n = tape.value(frames).n();
        let mut per_block_batched: Vec<NodeId> = Vec::with_capacity(self.blocks.len());
        let mut x = self.stem.apply_lrelu(tape, bind, frames)?;
        for block in &self.blocks {
            x = block.forward(tape, bind, x)?;
            per_block_batched.push(x);
        }
        // split the batch back out so downstream stages address (i, t)
        let features = per_block_batched
            .iter()
            .map(|&b| (0..n).map(|t| tape.slice_n(b, t)).collect())
            .collect();
        Ok(FeaturePyramid { features })
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<&'a Param<S>>) {
        self.stem.visit(out);
        for b in &self.blocks {
            b.visit(out);
        }
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<S>>) {
        self.stem.visit_mut(out);
        for b in &mut self.blocks {
            b.visit_mut(out);
        }
    }

    /// Closed-form learnable scalar count for a given config.
    pub fn param_count(cfg: &ValidatedConfig) -> u64 {
        let c = cfg.base_channels;
        let stem = (CHANNELS * c * 9 + c) as u64;
        stem + cfg.num_blocks as u64 * DenseBlock::<S>::param_count(c, c, ENCODER_DENSE_LAYERS)
    }
}
