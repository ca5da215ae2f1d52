//! Shared-weight decoder: per block, a 1x1 merge of [previous output,
//! base stream, skip features] feeds a deep dense block; the final
//! features are convolved to C*r^2 channels and pixel-shuffled into the
//! HR residual. The per-block outputs (the decoded features) are captured
//! so intermediate-frame passes can reuse them as skips.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::autograd::{NodeId, Tape};
use crate::config::ValidatedConfig;
use crate::frame::CHANNELS;
use crate::nn::{Binding, Conv, DenseBlock, Param, ParamBuilder, DECODER_DENSE_LAYERS};
use crate::ops::{PadMode, ShapeError};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Decoder<S> {
    pub merges: Vec<Conv<S>>,
    pub blocks: Vec<DenseBlock<S>>,
    pub head: Conv<S>,
    scale_r: usize,
}

/// Decoded features captured after every block during a pass.
pub struct DecoderTrace {
    pub features: Vec<NodeId>,
}

impl<S: Scalar> Decoder<S> {
    pub fn new(pb: &mut ParamBuilder, cfg: &ValidatedConfig, rng: &mut ChaCha8Rng) -> Self {
        let c = cfg.base_channels;
        let merges = (0..cfg.num_blocks)
            .map(|i| {
                Conv::new(
                    pb,
                    &format!("decoder.merge{i}"),
                    3 * c,
                    c,
                    1,
                    PadMode::Zero,
                    rng,
                )
            })
            .collect();
        let blocks = (0..cfg.num_blocks)
            .map(|i| {
                DenseBlock::new(
                    pb,
                    &format!("decoder.block{i}"),
                    c,
                    c,
                    DECODER_DENSE_LAYERS,
                    rng,
                )
            })
            .collect();
        // linear head (no activation) so residuals can be negative
        let head = Conv::new(
            pb,
            "decoder.head",
            c,
            CHANNELS * cfg.scale_r * cfg.scale_r,
            3,
            PadMode::Zero,
            rng,
        );
        Decoder {
            merges,
            blocks,
            head,
            scale_r: cfg.scale_r,
        }
    }

    /// Run one decoding pass.
    ///
    /// `base[i]` is the target-frame feature stream (center features for
    /// the spatial pass, warped intermediate features for interpolation
    /// passes); `skips[i]` is the per-block skip input (fused features or
    /// a previous trace). Returns the HR residual and the trace.
    pub fn forward(
        &self,
        tape: &mut Tape<S>,
        bind: &Binding,
        base: &[NodeId],
        skips: &[NodeId],
    ) -> Result<(NodeId, DecoderTrace), ShapeError> {
        if base.len() != self.blocks.len() || skips.len() != self.blocks.len() {
            return Err(ShapeError(format!(
                "decoder expects {} base/skip streams, got {}/{}",
                self.blocks.len(),
                base.len(),
                skips.len()
            )));
        }
        let first = tape.value(base[0]);
        let zero_prev = tape.leaf(Tensor::zeros(first.shape()), false);
        let mut prev = zero_prev;
        let mut trace = Vec::with_capacity(self.blocks.len());
        for (i, block) in self.blocks.iter().enumerate() {
            let cat = tape.concat_c(&[prev, base[i], skips[i]])?;
            let merged = self.merges[i].apply_lrelu(tape, bind, cat)?;
            prev = block.forward(tape, bind, merged)?;
            trace.push(prev);
        }
        let pre_shuffle = self.head.apply(tape, bind, prev)?;
        let residual = tape.pixel_shuffle(pre_shuffle, self.scale_r)?;
        Ok((residual, DecoderTrace { features: trace }))
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<&'a Param<S>>) {
        for m in &self.merges {
            m.visit(out);
        }
        for b in &self.blocks {
            b.visit(out);
        }
        self.head.visit(out);
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<S>>) {
        for m in &mut self.merges {
            m.visit_mut(out);
        }
        for b in &mut self.blocks {
            b.visit_mut(out);
        }
        self.head.visit_mut(out);
    }

    pub fn param_count(cfg: &ValidatedConfig) -> u64 {
        let c = cfg.base_channels as u64;
        let b = cfg.num_blocks as u64;
        let merges = b * (3 * c * c + c);
        let blocks = b * DenseBlock::<S>::param_count(
            cfg.base_channels,
            cfg.base_channels,
            DECODER_DENSE_LAYERS,
        );
        let head_out = (CHANNELS * cfg.scale_r * cfg.scale_r) as u64;
        let head = c * head_out * 9 + head_out;
        merges + blocks + head
    }
}

/// u(base) + residual: bilinear-upsample the LR base image by r and add
/// the decoded residual. No clamping here; clamping happens at file
/// output only.
pub fn compose_output<S: Scalar>(
    tape: &mut Tape<S>,
    lr_base: NodeId,
    residual: NodeId,
    scale_r: usize,
) -> Result<NodeId, ShapeError> {
    let lb = tape.value(lr_base).shape();
    let rs = tape.value(residual).shape();
    if rs[2] != lb[2] * scale_r || rs[3] != lb[3] * scale_r || rs[1] != lb[1] {
        return Err(ShapeError(format!(
            "residual {rs:?} does not match base {lb:?} at scale {scale_r}"
        )));
    }
    let up = tape.resize_bilinear(lr_base, lb[2] * scale_r, lb[3] * scale_r);
    Ok(tape.add(up, residual))
}
