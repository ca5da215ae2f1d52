//! Early Fusion with Spatio-Temporal weights.
//!
//! The per-frame features of one encoder block are collapsed by a 1x1
//! early-fusion convolution, re-weighted per frame by a sigmoid
//! confidence score (channel dot product between projected per-frame
//! features and the fused map), pushed through a small pooling pyramid,
//! and finally turned into an affine correction: fused = alpha * E + beta.
//! No explicit motion compensation anywhere.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::autograd::{NodeId, Tape};
use crate::config::ValidatedConfig;
use crate::nn::{Binding, Conv, Param, ParamBuilder};
use crate::ops::{PadMode, ShapeError};
use crate::scalar::Scalar;

/// Pyramid depth (capped by the spatial size at run time).
pub const PYRAMID_LEVELS: usize = 3;

/// Weights of one EFST block; one instance exists per encoder block.
///
/// When the `disable_efst` ablation is active only `early` is
/// constructed and the fused output is the early-fusion result itself.
#[derive(Debug, Clone)]
pub struct EfstBlock<S> {
    /// 1x1 early fusion: window_size * C -> C.
    pub early: Conv<S>,
    /// Score projections theta (per-frame features) and delta (fused).
    pub theta: Option<Conv<S>>,
    pub delta: Option<Conv<S>>,
    /// Pyramid: level 0 reduces the concatenated weighted maps, deeper
    /// levels see concatenated average+max pooling of the level above.
    pub pyr_down: Vec<Conv<S>>,
    /// Merge convolutions applied after upsample-and-add, finest last.
    pub pyr_up: Vec<Conv<S>>,
    /// Final head producing 2C channels, split into alpha and beta.
    pub head: Option<Conv<S>>,
}

/// Fused features plus the per-frame confidence scores (kept for
/// visualization).
pub struct EfstOutput {
    pub fused: NodeId,
    pub scores: Vec<NodeId>,
}

impl<S: Scalar> EfstBlock<S> {
    pub fn new(
        pb: &mut ParamBuilder,
        block: usize,
        cfg: &ValidatedConfig,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let c = cfg.base_channels;
        let t = cfg.window_size;
        let name = format!("efst{block}");
        let early = Conv::new(pb, &format!("{name}.early"), t * c, c, 1, PadMode::Zero, rng);
        if cfg.disable_efst {
            return EfstBlock {
                early,
                theta: None,
                delta: None,
                pyr_down: Vec::new(),
                pyr_up: Vec::new(),
                head: None,
            };
        }
        let theta = Conv::new(pb, &format!("{name}.theta"), c, c, 1, PadMode::Zero, rng);
        let delta = Conv::new(pb, &format!("{name}.delta"), c, c, 1, PadMode::Zero, rng);
        // level 0 consumes the concatenated weighted maps; levels below
        // consume avg/max pooled pairs. Replicate padding keeps constant
        // inputs spatially constant through the whole pyramid.
        let mut pyr_down = Vec::with_capacity(PYRAMID_LEVELS);
        pyr_down.push(Conv::new(
            pb,
            &format!("{name}.pyr0"),
            t * c,
            c,
            3,
            PadMode::Replicate,
            rng,
        ));
        for lvl in 1..PYRAMID_LEVELS {
            pyr_down.push(Conv::new(
                pb,
                &format!("{name}.pyr{lvl}"),
                2 * c,
                c,
                3,
                PadMode::Replicate,
                rng,
            ));
        }
        let pyr_up = (1..PYRAMID_LEVELS)
            .map(|lvl| {
                Conv::new(
                    pb,
                    &format!("{name}.merge{lvl}"),
                    c,
                    c,
                    3,
                    PadMode::Replicate,
                    rng,
                )
            })
            .collect();
        let head = Conv::new(pb, &format!("{name}.head"), c, 2 * c, 3, PadMode::Replicate, rng);
        EfstBlock {
            early,
            theta: Some(theta),
            delta: Some(delta),
            pyr_down,
            pyr_up,
            head: Some(head),
        }
    }

    /// E = Conv1x1(Concat[e_0 .. e_{T-1}]).
    pub fn early_fuse(
        &self,
        tape: &mut Tape<S>,
        bind: &Binding,
        features: &[NodeId],
    ) -> Result<NodeId, ShapeError> {
        let expected = self.early.in_channels();
        let have: usize = features.iter().map(|&f| tape.value(f).c()).sum();
        if have != expected {
            return Err(ShapeError(format!(
                "early fusion expects {expected} concatenated channels, got {have}"
            )));
        }
        let cat = tape.concat_c(features)?;
        self.early.apply(tape, bind, cat)
    }

    /// s_t = sigmoid(sum_c theta(e_t) * delta(E)), one map per frame.
    pub fn confidence_scores(
        &self,
        tape: &mut Tape<S>,
        bind: &Binding,
        fused_early: NodeId,
        features: &[NodeId],
    ) -> Result<Vec<NodeId>, ShapeError> {
        let theta = self.theta.as_ref().expect("scores need full EFST weights");
        let delta = self.delta.as_ref().expect("scores need full EFST weights");
        // delta(E) has no frame dependence, computed once per block
        let de = delta.apply(tape, bind, fused_early)?;
        features
            .iter()
            .map(|&e| {
                let te = theta.apply(tape, bind, e)?;
                let dot = tape.channel_dot(te, de);
                Ok(tape.sigmoid(dot))
            })
            .collect()
    }

    /// Weighted maps: score broadcast over channels times the features.
    pub fn temporal_weight(
        tape: &mut Tape<S>,
        features: &[NodeId],
        scores: &[NodeId],
    ) -> Vec<NodeId> {
        features
            .iter()
            .zip(scores)
            .map(|(&e, &s)| tape.broadcast_mul_c(s, e))
            .collect()
    }

    /// Pooling pyramid over the concatenated weighted maps, producing the
    /// full-resolution alpha and beta tensors (C channels each).
    pub fn spatiotemporal_weights(
        &self,
        tape: &mut Tape<S>,
        bind: &Binding,
        weighted: &[NodeId],
    ) -> Result<(NodeId, NodeId), ShapeError> {
        let head = self.head.as_ref().expect("weights need full EFST weights");
        let cat = tape.concat_c(weighted)?;
        // going down: level 0 at full resolution, then avg+max pooling
        let mut levels: Vec<NodeId> = Vec::with_capacity(PYRAMID_LEVELS);
        let mut cur = self.pyr_down[0].apply_lrelu(tape, bind, cat)?;
        levels.push(cur);
        for conv in self.pyr_down.iter().skip(1) {
            let t = tape.value(cur);
            if t.h() < 2 || t.w() < 2 {
                break; // spatial size exhausted; deeper levels are skipped
            }
            let avg = tape.avg_pool2(cur);
            let max = tape.max_pool2(cur);
            let pooled = tape.concat_c(&[avg, max])?;
            cur = conv.apply_lrelu(tape, bind, pooled)?;
            levels.push(cur);
        }
        // going up: upsample, add, convolve
        let mut up = *levels.last().expect("at least one level");
        for lvl in (0..levels.len() - 1).rev() {
            let target = tape.value(levels[lvl]);
            let (th, tw) = (target.h(), target.w());
            let resized = tape.resize_bilinear(up, th, tw);
            let summed = tape.add(resized, levels[lvl]);
            up = self.pyr_up[lvl].apply_lrelu(tape, bind, summed)?;
        }
        let ab = head.apply(tape, bind, up)?;
        let c = tape.value(ab).c() / 2;
        let alpha = tape.slice_c(ab, 0, c);
        let beta = tape.slice_c(ab, c, 2 * c);
        Ok((alpha, beta))
    }

    /// fused = alpha * E + beta.
    pub fn apply_weights(
        tape: &mut Tape<S>,
        fused_early: NodeId,
        alpha: NodeId,
        beta: NodeId,
    ) -> NodeId {
        let scaled = tape.mul(alpha, fused_early);
        tape.add(scaled, beta)
    }

    /// Full pipeline: early fusion, confidence scores, temporal
    /// weighting, spatio-temporal weights, affine compensation. With the
    /// `disable_efst` ablation only early fusion runs and `scores` is
    /// empty.
    pub fn forward(
        &self,
        tape: &mut Tape<S>,
        bind: &Binding,
        features: &[NodeId],
    ) -> Result<EfstOutput, ShapeError> {
        let fused_early = self.early_fuse(tape, bind, features)?;
        if self.head.is_none() {
            return Ok(EfstOutput {
                fused: fused_early,
                scores: Vec::new(),
            });
        }
        let scores = self.confidence_scores(tape, bind, fused_early, features)?;
        let weighted = Self::temporal_weight(tape, features, &scores);
        let (alpha, beta) = self.spatiotemporal_weights(tape, bind, &weighted)?;
        let fused = Self::apply_weights(tape, fused_early, alpha, beta);
        Ok(EfstOutput { fused, scores })
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<&'a Param<S>>) {
        self.early.visit(out);
        if let (Some(t), Some(d)) = (&self.theta, &self.delta) {
            t.visit(out);
            d.visit(out);
        }
        for c in &self.pyr_down {
            c.visit(out);
        }
        for c in &self.pyr_up {
            c.visit(out);
        }
        if let Some(h) = &self.head {
            h.visit(out);
        }
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<S>>) {
        self.early.visit_mut(out);
        if let Some(t) = &mut self.theta {
            t.visit_mut(out);
        }
        if let Some(d) = &mut self.delta {
            d.visit_mut(out);
        }
        for c in &mut self.pyr_down {
            c.visit_mut(out);
        }
        for c in &mut self.pyr_up {
            c.visit_mut(out);
        }
        if let Some(h) = &mut self.head {
            h.visit_mut(out);
        }
    }

    /// Closed-form learnable scalar count for one block.
    pub fn param_count(cfg: &ValidatedConfig) -> u64 {
        let c = cfg.base_channels as u64;
        let t = cfg.window_size as u64;
        let early = t * c * c + c;
        if cfg.disable_efst {
            return early;
        }
        let theta_delta = 2 * (c * c + c);
        let pyr0 = t * c * c * 9 + c;
        let pyr_deeper = (PYRAMID_LEVELS as u64 - 1) * (2 * c * c * 9 + c);
        let merges = (PYRAMID_LEVELS as u64 - 1) * (c * c * 9 + c);
        let head = c * 2 * c * 9 + 2 * c;
        early + theta_delta + pyr0 + pyr_deeper + merges + head
    }
}
