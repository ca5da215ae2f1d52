//! Flow estimation and time-scaled feature interpolation.
//!
//! Bidirectional flow between the two center frames is rescaled to an
//! arbitrary intermediate position T in [0,1]:
//!
//!   f_{T->3} = -(1-T)*T * f_{3->4} + T^2     * f_{4->3}
//!   f_{T->4} = (1-T)^2  * f_{3->4} - T*(1-T) * f_{4->3}
//!
//! Warped encoder features and LR frames from both sides are averaged to
//! synthesize the intermediate feature pyramid and the LR blend.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::autograd::{NodeId, Tape};
use crate::config::ValidatedConfig;
use crate::frame::{FlowField, Frame, TimeIndex};
use crate::nn::{Binding, Conv, Param, ParamBuilder};
use crate::ops::{PadMode, ShapeError};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// T_in outside [0, 1].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainError {
    pub t_in: TimeIndex,
}

impl core::fmt::Display for DomainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "T_in = {} outside [0, 1]", self.t_in)
    }
}

impl core::error::Error for DomainError {}

/// Check and convert a rational T_in to the four scaling coefficients
/// ((c34, c43) for f_{T->3}, then for f_{T->4})).
pub fn scale_coefficients(t_in: TimeIndex) -> Result<[f64; 4], DomainError> {
    if t_in < TimeIndex::from_integer(0) || t_in > TimeIndex::from_integer(1) {
        return Err(DomainError { t_in });
    }
    let t = *t_in.numer() as f64 / *t_in.denom() as f64;
    let u = 1.0 - t;
    Ok([-u * t, t * t, u * u, -t * u])
}

/// Time-scale a bidirectional flow pair to intermediate position T_in.
pub fn scale_flows(
    f34: &FlowField,
    f43: &FlowField,
    t_in: TimeIndex,
) -> Result<(FlowField, FlowField), DomainError> {
    assert_eq!(
        (f34.h(), f34.w()),
        (f43.h(), f43.w()),
        "flow pair sizes differ"
    );
    let [a34, a43, b34, b43] = scale_coefficients(t_in)?;
    let t_abs = f34.src_time + t_in * (f34.dst_time - f34.src_time);
    let comb = |ca: f64, cb: f64| -> Vec<f32> {
        f34.data()
            .iter()
            .zip(f43.data())
            .map(|(&x, &y)| (ca as f32) * x + (cb as f32) * y)
            .collect()
    };
    let f_t3 = FlowField::new(t_abs, f34.src_time, f34.h(), f34.w(), comb(a34, a43));
    let f_t4 = FlowField::new(t_abs, f34.dst_time, f34.h(), f34.w(), comb(b34, b43));
    Ok((f_t3, f_t4))
}

/// Graph version of [`scale_flows`] on tape nodes.
pub fn scale_flows_graph<S: Scalar>(
    tape: &mut Tape<S>,
    f34: NodeId,
    f43: NodeId,
    t_in: TimeIndex,
) -> Result<(NodeId, NodeId), DomainError> {
    let [a34, a43, b34, b43] = scale_coefficients(t_in)?;
    let f_t3 = tape.lincomb(f34, S::scalar_from_f64(a34), f43, S::scalar_from_f64(a43));
    let f_t4 = tape.lincomb(f34, S::scalar_from_f64(b34), f43, S::scalar_from_f64(b43));
    Ok((f_t3, f_t4))
}

/// (warp(a, fa) + warp(b, fb)) / 2.
pub fn warp_average<S: Scalar>(
    tape: &mut Tape<S>,
    a: NodeId,
    b: NodeId,
    fa: NodeId,
    fb: NodeId,
) -> Result<NodeId, ShapeError> {
    let wa = tape.warp(a, fa)?;
    let wb = tape.warp(b, fb)?;
    let half = S::scalar_from_f64(0.5);
    Ok(tape.lincomb(wa, half, wb, half))
}

/// Per-block intermediate features m_T from the two center pyramids.
pub fn interpolate_features<S: Scalar>(
    tape: &mut Tape<S>,
    e3: &[NodeId],
    e4: &[NodeId],
    f_t3: NodeId,
    f_t4: NodeId,
) -> Result<Vec<NodeId>, ShapeError> {
    if e3.len() != e4.len() {
        return Err(ShapeError(format!(
            "pyramids cover {} vs {} blocks",
            e3.len(),
            e4.len()
        )));
    }
    e3.iter()
        .zip(e4)
        .map(|(&a, &b)| warp_average(tape, a, b, f_t3, f_t4))
        .collect()
}

/// LR blend of the two center frames toward T_in.
pub fn blend_lr<S: Scalar>(
    tape: &mut Tape<S>,
    x3: NodeId,
    x4: NodeId,
    f_t3: NodeId,
    f_t4: NodeId,
) -> Result<NodeId, ShapeError> {
    warp_average(tape, x3, x4, f_t3, f_t4)
}

/// Sum over T of the mean absolute error between LR blends and LR ground
/// truth (the motion loss that finetunes the flow estimator).
pub fn motion_loss<S: Scalar>(
    tape: &mut Tape<S>,
    blends: &[NodeId],
    gts: &[NodeId],
) -> Result<NodeId, ShapeError> {
    if blends.len() != gts.len() {
        return Err(ShapeError(format!(
            "{} blends vs {} ground-truth frames",
            blends.len(),
            gts.len()
        )));
    }
    let mut total: Option<NodeId> = None;
    for (&b, &g) in blends.iter().zip(gts) {
        if tape.value(b).shape() != tape.value(g).shape() {
            return Err(ShapeError("blend/ground-truth shape mismatch".into()));
        }
        let term = tape.l1_mean(b, g);
        total = Some(match total {
            Some(t) => tape.add(t, term),
            None => term,
        });
    }
    Ok(total.unwrap_or_else(|| tape.leaf(Tensor::zeros([1, 1, 1, 1]), false)))
}

/// Frame-level flow estimation interface for plugging external
/// estimators into inference.
pub trait FlowEstimator {
    fn estimate(&self, a: &Frame, b: &Frame) -> FlowField;
    fn trainable(&self) -> bool {
        false
    }
}

/// Always-zero flow. Interpolation degenerates to plain blending.
pub struct ZeroFlow;

impl FlowEstimator for ZeroFlow {
    fn estimate(&self, a: &Frame, b: &Frame) -> FlowField {
        FlowField::zeros(a.time_index, b.time_index, a.h(), a.w())
    }
}

/// Channel width of the refinement convolutions.
const FLOW_CHANNELS: usize = 16;
/// Pyramid depth (capped by spatial size at run time).
pub const FLOW_LEVELS: usize = 3;

/// Small trainable coarse-to-fine flow network. At each pyramid level a
/// three-layer CNN refines the upsampled coarser flow from [frame a,
/// frame b warped toward a, current flow]. Refinement heads start at
/// zero so the initial estimate is the zero flow.
#[derive(Debug, Clone)]
pub struct PyramidFlow<S> {
    levels: Vec<[Conv<S>; 3]>,
}

impl<S: Scalar> PyramidFlow<S> {
    pub fn new(pb: &mut ParamBuilder, rng: &mut ChaCha8Rng) -> Self {
        let levels = (0..FLOW_LEVELS)
            .map(|l| {
                let name = format!("flow.level{l}");
                [
                    Conv::new(
                        pb,
                        &format!("{name}.conv0"),
                        2 * crate::frame::CHANNELS + 2,
                        FLOW_CHANNELS,
                        3,
                        PadMode::Replicate,
                        rng,
                    ),
                    Conv::new(
                        pb,
                        &format!("{name}.conv1"),
                        FLOW_CHANNELS,
                        FLOW_CHANNELS,
                        3,
                        PadMode::Replicate,
                        rng,
                    ),
                    Conv::new_zeroed(
                        pb,
                        &format!("{name}.delta"),
                        FLOW_CHANNELS,
                        2,
                        3,
                        PadMode::Replicate,
                    ),
                ]
            })
            .collect();
        PyramidFlow { levels }
    }

    /// Estimate flow a -> b as a [N,2,H,W] node.
    pub fn estimate(
        &self,
        tape: &mut Tape<S>,
        bind: &Binding,
        a: NodeId,
        b: NodeId,
    ) -> Result<NodeId, ShapeError> {
        if tape.value(a).shape() != tape.value(b).shape() {
            return Err(ShapeError("flow estimation on mismatched frames".into()));
        }
        // image pyramids, finest first
        let mut pyr_a = alloc::vec![a];
        let mut pyr_b = alloc::vec![b];
        for _ in 1..self.levels.len() {
            let ta = tape.value(*pyr_a.last().unwrap());
            if ta.h() < 2 || ta.w() < 2 {
                break;
            }
            let pa = tape.avg_pool2(*pyr_a.last().unwrap());
            let pb_ = tape.avg_pool2(*pyr_b.last().unwrap());
            pyr_a.push(pa);
            pyr_b.push(pb_);
        }
        let mut flow: Option<NodeId> = None;
        for lvl in (0..pyr_a.len()).rev() {
            let (la, lb) = (pyr_a[lvl], pyr_b[lvl]);
            let t = tape.value(la);
            let (h, w, n) = (t.h(), t.w(), t.n());
            let cur = match flow {
                Some(f) => {
                    let up = tape.resize_bilinear(f, h, w);
                    tape.scale(up, S::scalar_from_f64(2.0)) // displacement doubles with resolution
                }
                None => tape.leaf(Tensor::zeros([n, 2, h, w]), false),
            };
            let warped_b = tape.warp(lb, cur)?;
            let input = tape.concat_c(&[la, warped_b, cur])?;
            let convs = &self.levels[lvl.min(self.levels.len() - 1)];
            let x = convs[0].apply_lrelu(tape, bind, input)?;
            let x = convs[1].apply_lrelu(tape, bind, x)?;
            let delta = convs[2].apply(tape, bind, x)?;
            flow = Some(tape.add(cur, delta));
        }
        Ok(flow.expect("at least one pyramid level"))
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<&'a Param<S>>) {
        for level in &self.levels {
            for c in level {
                c.visit(out);
            }
        }
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<S>>) {
        for level in &mut self.levels {
            for c in level {
                c.visit_mut(out);
            }
        }
    }

    pub fn param_count(_cfg: &ValidatedConfig) -> u64 {
        let cin = (2 * crate::frame::CHANNELS + 2) as u64;
        let f = FLOW_CHANNELS as u64;
        let per_level = (cin * f * 9 + f) + (f * f * 9 + f) + (f * 2 * 9 + 2);
        FLOW_LEVELS as u64 * per_level
    }
}

/// Flow source for one window pass: the zero stub, the built-in
/// trainable pyramid network, or a fixed (f34, f43) pair precomputed by
/// an external [`FlowEstimator`].
pub enum FlowSource<'a, S: Scalar> {
    Zero,
    Pyramid(&'a PyramidFlow<S>),
    Fixed(Tensor<S>, Tensor<S>),
}

impl<'a, S: Scalar> FlowSource<'a, S> {
    /// Produce the (f34, f43) nodes for a center pair.
    pub fn bidirectional(
        &self,
        tape: &mut Tape<S>,
        bind: &Binding,
        x3: NodeId,
        x4: NodeId,
    ) -> Result<(NodeId, NodeId), ShapeError> {
        match self {
            FlowSource::Zero => {
                let [n, _, h, w] = tape.value(x3).shape();
                let f34 = tape.leaf(Tensor::zeros([n, 2, h, w]), false);
                let f43 = tape.leaf(Tensor::zeros([n, 2, h, w]), false);
                Ok((f34, f43))
            }
            FlowSource::Pyramid(net) => {
                let f34 = net.estimate(tape, bind, x3, x4)?;
                let f43 = net.estimate(tape, bind, x4, x3)?;
                Ok((f34, f43))
            }
            FlowSource::Fixed(f34, f43) => {
                let a = tape.leaf(f34.clone(), false);
                let b = tape.leaf(f43.clone(), false);
                Ok((a, b))
            }
        }
    }
}
