//! Two-phase optimization: VSR pretraining on the spatial loss, then
//! joint training on the weighted sum of motion, spatial and
//! interpolation losses. Deterministic given the seed; resumable from
//! captured state bit-exactly.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::augment::{augment_random, AugmentError};
use crate::autograd::Tape;
use crate::flow::motion_loss as motion_loss_graph;
use crate::frame::TimeIndex;
use crate::model::{ModelError, Network};
use crate::optim::Adam;
use crate::rng;
use crate::sample::{BatchSource, PatchError, SampleOptions, TrainingSample};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pretrain,
    Joint,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Pretrain => "pretrain",
            Phase::Joint => "joint",
        }
    }
}

/// Schedule constants for one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    pub phase: Phase,
    pub total_iters: u64,
    pub batch_size: usize,
    pub patch_size: usize,
    pub lr_init: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: u64,
    /// Global-norm gradient clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    pub checkpoint_every: u64,
}

impl TrainSchedule {
    /// Published pretraining schedule: 300K iterations, batch 32, 128px
    /// patches, lr 1e-4 halved every 100K.
    pub fn paper_pretrain() -> Self {
        TrainSchedule {
            phase: Phase::Pretrain,
            total_iters: 300_000,
            batch_size: 32,
            patch_size: 128,
            lr_init: 1e-4,
            lr_decay_factor: 2.0,
            lr_decay_every: 100_000,
            grad_clip: Some(10.0),
            checkpoint_every: 500,
        }
    }

    /// Published joint schedule: 400K iterations, 256px patches, lr 5e-5,
    /// same decay.
    pub fn paper_joint() -> Self {
        TrainSchedule {
            phase: Phase::Joint,
            total_iters: 400_000,
            batch_size: 32,
            patch_size: 256,
            lr_init: 5e-5,
            lr_decay_factor: 2.0,
            lr_decay_every: 100_000,
            grad_clip: Some(10.0),
            checkpoint_every: 500,
        }
    }

    /// Desk-scale smoke schedule exercising every code path.
    pub fn desk_pretrain() -> Self {
        TrainSchedule {
            phase: Phase::Pretrain,
            total_iters: 2_000,
            batch_size: 4,
            patch_size: 64,
            lr_init: 1e-4,
            lr_decay_factor: 2.0,
            lr_decay_every: 2_000,
            grad_clip: Some(10.0),
            checkpoint_every: 500,
        }
    }

    pub fn desk_joint() -> Self {
        TrainSchedule {
            phase: Phase::Joint,
            total_iters: 3_000,
            batch_size: 4,
            patch_size: 64,
            lr_init: 5e-5,
            lr_decay_factor: 2.0,
            lr_decay_every: 2_000,
            grad_clip: Some(10.0),
            checkpoint_every: 500,
        }
    }

    /// lr(i) = lr_init / factor^floor(i / decay_every), 0-based iteration.
    pub fn lr_at(&self, iter: u64) -> f64 {
        let steps = (iter / self.lr_decay_every) as i32;
        self.lr_init / self.lr_decay_factor.powi(steps)
    }
}

/// Loss values logged every iteration. `total` is the lambda-weighted sum
/// of the components by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub iteration: u64,
    pub l_m: f64,
    pub l_s: f64,
    pub l_f: f64,
    pub total: f64,
    pub lr: f64,
}

impl LossReport {
    pub fn csv_header() -> &'static str {
        "iteration,l_m,l_s,l_f,total,lr"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration, self.l_m, self.l_s, self.l_f, self.total, self.lr
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    Data(String),
    Patch(PatchError),
    Augment(AugmentError),
    Model(ModelError),
}

impl core::fmt::Display for TrainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TrainError::Data(s) => write!(f, "training data error: {s}"),
            TrainError::Patch(e) => write!(f, "{e}"),
            TrainError::Augment(e) => write!(f, "{e}"),
            TrainError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<PatchError> for TrainError {
    fn from(e: PatchError) -> Self {
        TrainError::Patch(e)
    }
}
impl From<AugmentError> for TrainError {
    fn from(e: AugmentError) -> Self {
        TrainError::Augment(e)
    }
}
impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        TrainError::Model(e)
    }
}

/// Observers for logging and checkpointing. The default implementations
/// do nothing.
pub trait TrainHooks<S: Scalar> {
    fn on_report(&mut self, _report: &LossReport) {}
    fn on_checkpoint(&mut self, _trainer: &Trainer<S>) -> Result<(), TrainError> {
        Ok(())
    }
}

/// No-op hooks.
pub struct NoHooks;
impl<S: Scalar> TrainHooks<S> for NoHooks {}

/// Everything one phase of optimization mutates, bundled so external
/// code can capture and restore it for exact resumption.
pub struct Trainer<S: Scalar> {
    pub net: Network<S>,
    pub adam: Adam<S>,
    pub schedule: TrainSchedule,
    pub iteration: u64,
    pub rng_sample: ChaCha8Rng,
    pub rng_augment: ChaCha8Rng,
}

/// Per-sample result of one forward/backward pass.
pub struct SamplePass<S: Scalar> {
    /// d(total)/d(param), indexed by parameter id.
    pub grads: Vec<Option<Tensor<S>>>,
    pub l_m: f64,
    pub l_s: f64,
    pub l_f: f64,
}

impl<S: Scalar> Trainer<S> {
    /// Fresh pretraining phase; the flow estimator is left untouched
    /// (not even instantiated).
    pub fn new_pretrain(net: Network<S>, schedule: TrainSchedule, seed: u64) -> Self {
        assert_eq!(schedule.phase, Phase::Pretrain);
        let n = net.params().len();
        Trainer {
            net,
            adam: Adam::new(n),
            schedule,
            iteration: 0,
            rng_sample: rng::stream(seed, "sample.pretrain"),
            rng_augment: rng::stream(seed, "augment.pretrain"),
        }
    }

    /// Fresh joint phase starting from pretrained (or cold-start)
    /// weights. Instantiates the trainable flow estimator if configured.
    pub fn new_joint(mut net: Network<S>, schedule: TrainSchedule, seed: u64) -> Self {
        assert_eq!(schedule.phase, Phase::Joint);
        net.ensure_flow();
        let n = net.params().len();
        Trainer {
            net,
            adam: Adam::new(n),
            schedule,
            iteration: 0,
            rng_sample: rng::stream(seed, "sample.joint"),
            rng_augment: rng::stream(seed, "augment.joint"),
        }
    }

    /// Run until the schedule completes. Safe to call on a restored
    /// trainer; it continues from `self.iteration`.
    pub fn run(
        &mut self,
        source: &mut dyn BatchSource,
        hooks: &mut dyn TrainHooks<S>,
    ) -> Result<(), TrainError> {
        while self.iteration < self.schedule.total_iters {
            let report = self.step(source)?;
            hooks.on_report(&report);
            if self.iteration % self.schedule.checkpoint_every == 0
                || self.iteration == self.schedule.total_iters
            {
                hooks.on_checkpoint(self)?;
            }
        }
        Ok(())
    }

    /// One optimization step; returns the loss report for the new
    /// iteration count.
    pub fn step(&mut self, source: &mut dyn BatchSource) -> Result<LossReport, TrainError> {
        let joint = self.schedule.phase == Phase::Joint;
        let lr = self.schedule.lr_at(self.iteration);
        let opts = SampleOptions {
            patch_size: self.schedule.patch_size,
            with_intermediates: joint,
            random_reverse: true,
        };
        let cfg = &self.net.config;
        let batch = source
            .sample(cfg, &opts, self.schedule.batch_size, &mut self.rng_sample)
            .map_err(TrainError::from)?;
        // augmentation draws happen sequentially for determinism
        let samples: Vec<TrainingSample> = batch
            .iter()
            .map(|s| augment_random(s, &mut self.rng_augment, false))
            .collect::<Result<_, _>>()?;

        let lambdas = (cfg.lambda_m, cfg.lambda_s, cfg.lambda_f);
        let net = &self.net;
        let run_one = |sample: &TrainingSample| -> Result<SamplePass<S>, TrainError> {
            sample_gradients(net, sample, joint, lambdas)
        };
        #[cfg(feature = "std")]
        let passes: Vec<SamplePass<S>> = {
            use rayon::prelude::*;
            samples
                .par_iter()
                .map(run_one)
                .collect::<Result<_, _>>()?
        };
        #[cfg(not(feature = "std"))]
        let passes: Vec<SamplePass<S>> = samples
            .iter()
            .map(run_one)
            .collect::<Result<_, _>>()?;

        // deterministic reduction in sample order
        let n = self.net.params().len();
        let inv_batch = S::scalar_from_f64(1.0 / passes.len() as f64);
        let mut grads: Vec<Option<Tensor<S>>> = alloc::vec![None; n];
        let (mut l_m, mut l_s, mut l_f) = (0.0, 0.0, 0.0);
        for pass in passes {
            for (slot, g) in grads.iter_mut().zip(pass.grads) {
                if let Some(g) = g {
                    match slot {
                        Some(acc) => acc.axpy(S::one(), &g),
                        none => *none = Some(g),
                    }
                }
            }
            l_m += pass.l_m;
            l_s += pass.l_s;
            l_f += pass.l_f;
        }
        for g in grads.iter_mut().flatten() {
            g.scale_in_place(inv_batch);
        }
        let b = self.schedule.batch_size as f64;
        l_m /= b;
        l_s /= b;
        l_f /= b;

        let mut params = self.net.params_mut();
        self.adam
            .step(&mut params, &mut grads, lr, self.schedule.grad_clip);
        self.iteration += 1;
        let total = cfg_weighted(lambdas, l_m, l_s, l_f);
        Ok(LossReport {
            iteration: self.iteration,
            l_m,
            l_s,
            l_f,
            total,
            lr,
        })
    }
}

fn cfg_weighted(lambdas: (f64, f64, f64), l_m: f64, l_s: f64, l_f: f64) -> f64 {
    lambdas.0 * l_m + lambdas.1 * l_s + lambdas.2 * l_f
}

/// Forward + backward for one sample; pure given the network.
pub fn sample_gradients<S: Scalar>(
    net: &Network<S>,
    sample: &TrainingSample,
    joint: bool,
    lambdas: (f64, f64, f64),
) -> Result<SamplePass<S>, TrainError> {
    let mut tape = Tape::new();
    let bind = net.bind(&mut tape, true);
    let window = tape.leaf(crate::model::stack_frames::<S>(&sample.lr_inputs), false);
    let t_ins: Vec<TimeIndex> = if joint {
        sample.intermediates.iter().map(|i| i.t_in).collect()
    } else {
        Vec::new()
    };
    let graph = net.forward_window_graph(&mut tape, &bind, window, &t_ins, None)?;

    // spatial loss
    let gt_center = tape.leaf(sample.hr_center.to_tensor::<S>(), false);
    let l_s_node = tape.l1_mean(graph.center, gt_center);
    let l_s = tape.scalar(l_s_node).to_f64_();

    // interpolation and motion losses
    let (mut l_f_node, mut l_m_node) = (None, None);
    let (mut l_f, mut l_m) = (0.0, 0.0);
    if joint && !sample.intermediates.is_empty() {
        let mut hr_terms = Vec::new();
        let mut lr_blend_nodes = Vec::new();
        let mut lr_gt_nodes = Vec::new();
        for ((t, pred), inter) in graph.intermediates.iter().zip(&sample.intermediates) {
            debug_assert_eq!(*t, inter.t_in);
            let gt = tape.leaf(inter.hr.to_tensor::<S>(), false);
            hr_terms.push(tape.l1_mean(*pred, gt));
            lr_gt_nodes.push(tape.leaf(inter.lr.to_tensor::<S>(), false));
        }
        for (_, blend) in &graph.lr_blends {
            lr_blend_nodes.push(*blend);
        }
        let mut f_total = hr_terms[0];
        for t in &hr_terms[1..] {
            f_total = tape.add(f_total, *t);
        }
        let m_total = motion_loss_graph(&mut tape, &lr_blend_nodes, &lr_gt_nodes)
            .map_err(|e| TrainError::Model(ModelError::Shape(e.0)))?;
        l_f = tape.scalar(f_total).to_f64_();
        l_m = tape.scalar(m_total).to_f64_();
        l_f_node = Some(f_total);
        l_m_node = Some(m_total);
    }

    // weighted total; zero-weight terms contribute no gradient
    let mut total = None;
    let mut add_term = |tape: &mut Tape<S>, node: Option<crate::autograd::NodeId>, w: f64| {
        if let Some(node) = node {
            if w != 0.0 {
                let scaled = tape.scale(node, S::scalar_from_f64(w));
                total = Some(match total {
                    Some(t) => tape.add(t, scaled),
                    None => scaled,
                });
            }
        }
    };
    add_term(&mut tape, l_m_node, lambdas.0);
    add_term(&mut tape, Some(l_s_node), lambdas.1);
    add_term(&mut tape, l_f_node, lambdas.2);
    let total = total.expect("at least one active loss term");

    let mut grads = tape.backward(total);
    let params = net.params();
    let by_param = params
        .iter()
        .map(|p| grads.take(bind.node(p)))
        .collect::<Vec<_>>();
    Ok(SamplePass {
        grads: by_param,
        l_m,
        l_s,
        l_f,
    })
}

/// Pretrain entry point per the published protocol: optimizes encoder,
/// fusion and decoder on the spatial path only.
pub fn pretrain<S: Scalar>(
    net: Network<S>,
    source: &mut dyn BatchSource,
    schedule: TrainSchedule,
    seed: u64,
    hooks: &mut dyn TrainHooks<S>,
) -> Result<Network<S>, TrainError> {
    let mut trainer = Trainer::new_pretrain(net, schedule, seed);
    trainer.run(source, hooks)?;
    Ok(trainer.net)
}

/// Joint training entry point; `init` normally comes from [`pretrain`].
pub fn train_joint<S: Scalar>(
    init: Network<S>,
    source: &mut dyn BatchSource,
    schedule: TrainSchedule,
    seed: u64,
    hooks: &mut dyn TrainHooks<S>,
) -> Result<Network<S>, TrainError> {
    let mut trainer = Trainer::new_joint(init, schedule, seed);
    trainer.run(source, hooks)?;
    Ok(trainer.net)
}
