//! The full network: shared-weight encoder, per-block EFST fusion, flow
//! scaling + feature interpolation, and the shared-weight decoder, wired
//! into single-window forward passes and sliding-window video upsampling.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::autograd::{NodeId, Tape};
use crate::config::{FlowKind, ValidatedConfig};
use crate::decoder::{compose_output, Decoder};
use crate::efst::EfstBlock;
use crate::encoder::Encoder;
use crate::flow::{
    blend_lr, interpolate_features, scale_flows_graph, DomainError, FlowEstimator, FlowSource,
    PyramidFlow,
};
use crate::frame::{Clip, FlowField, Frame, TimeIndex, CHANNELS};
use crate::nn::{Binding, Param, ParamBuilder};
use crate::ops::ShapeError;
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    Shape(String),
    Domain(TimeIndex),
    /// Interpolation requested but the trainable flow estimator has no
    /// parameters yet (it is created by joint training).
    MissingFlow,
    BadWindow(String),
}

impl core::fmt::Display for ModelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ModelError::Shape(s) => write!(f, "shape error: {s}"),
            ModelError::Domain(t) => write!(f, "T_in = {t} outside (0, 1)"),
            ModelError::MissingFlow => write!(
                f,
                "flow estimator `pyramid-lite` has no parameters; run joint training or select `zero`"
            ),
            ModelError::BadWindow(s) => write!(f, "bad window: {s}"),
        }
    }
}

impl core::error::Error for ModelError {}

impl From<ShapeError> for ModelError {
    fn from(e: ShapeError) -> Self {
        ModelError::Shape(e.0)
    }
}

impl From<DomainError> for ModelError {
    fn from(e: DomainError) -> Self {
        ModelError::Domain(e.t_in)
    }
}

/// All learnable state plus the validated configuration that shaped it.
#[derive(Clone)]
pub struct Network<S: Scalar> {
    pub config: ValidatedConfig,
    pub encoder: Encoder<S>,
    pub efst: Vec<EfstBlock<S>>,
    pub decoder: Decoder<S>,
    pub flow: Option<PyramidFlow<S>>,
    init_seed: u64,
    next_param_id: usize,
}

/// Tape nodes produced by one window pass.
pub struct WindowGraph {
    pub center: NodeId,
    pub intermediates: Vec<(TimeIndex, NodeId)>,
    pub lr_blends: Vec<(TimeIndex, NodeId)>,
    /// scores[block][frame], single-channel maps in (0,1)
    pub scores: Vec<Vec<NodeId>>,
    pub flows: Option<(NodeId, NodeId)>,
}

/// Single-channel raster extracted for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayMap {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

/// Optional extras captured during inference.
#[derive(Debug)]
pub struct Diagnostics {
    /// scores[block][frame]
    pub scores: Vec<Vec<GrayMap>>,
    pub flows: Option<(FlowField, FlowField)>,
    pub lr_blends: Vec<(TimeIndex, Frame)>,
}

/// Inference output for one window.
#[derive(Debug)]
pub struct WindowResult {
    pub hr_center: Frame,
    pub intermediates: Vec<(TimeIndex, Frame)>,
    pub diagnostics: Option<Diagnostics>,
}

/// Per-module learnable scalar counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamCount {
    pub modules: Vec<(String, u64)>,
    pub total: u64,
}

impl<S: Scalar> Network<S> {
    /// Deterministic fan-in-scaled initialization from a master seed.
    pub fn new(config: ValidatedConfig, init_seed: u64) -> Self {
        let mut pb = ParamBuilder::new();
        let mut rng = rng::stream(init_seed, "init");
        let encoder = Encoder::new(&mut pb, &config, &mut rng);
        let efst = (0..config.num_blocks)
            .map(|i| EfstBlock::new(&mut pb, i, &config, &mut rng))
            .collect();
        let decoder = Decoder::new(&mut pb, &config, &mut rng);
        Network {
            config,
            encoder,
            efst,
            decoder,
            flow: None,
            init_seed,
            next_param_id: pb.count(),
        }
    }

    /// Instantiate the trainable flow estimator if absent (joint training
    /// does this; pretraining never touches it).
    pub fn ensure_flow(&mut self) {
        if self.flow.is_none() && self.config.flow_estimator == FlowKind::PyramidLite {
            let mut pb = ParamBuilder::new();
            // continue the dense id range after the existing parameters
            for _ in 0..self.next_param_id {
                let _ = pb.make::<S>("placeholder".to_string(), Tensor::zeros([1, 1, 1, 1]));
            }
            let mut rng = rng::stream(self.init_seed, "init.flow");
            let flow = PyramidFlow::new(&mut pb, &mut rng);
            self.next_param_id = pb.count();
            self.flow = Some(flow);
        }
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn params(&self) -> Vec<&Param<S>> {
        let mut out = Vec::new();
        self.encoder.visit(&mut out);
        for b in &self.efst {
            b.visit(&mut out);
        }
        self.decoder.visit(&mut out);
        if let Some(f) = &self.flow {
            f.visit(&mut out);
        }
        debug_assert!(out.iter().enumerate().all(|(i, p)| p.id == i));
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<S>> {
        let mut out = Vec::new();
        self.encoder.visit_mut(&mut out);
        for b in &mut self.efst {
            b.visit_mut(&mut out);
        }
        self.decoder.visit_mut(&mut out);
        if let Some(f) = &mut self.flow {
            f.visit_mut(&mut out);
        }
        out
    }

    /// Parameter ids belonging to the spatial path (everything except the
    /// flow estimator); pretraining optimizes exactly these.
    pub fn spatial_param_ids(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut tmp = Vec::new();
        self.encoder.visit(&mut tmp);
        for b in &self.efst {
            b.visit(&mut tmp);
        }
        self.decoder.visit(&mut tmp);
        out.extend(tmp.iter().map(|p| p.id));
        out
    }

    pub fn find_param_mut(&mut self, name: &str) -> Option<&mut Param<S>> {
        self.params_mut().into_iter().find(|p| p.name == name)
    }

    /// Exact learnable-scalar count with a per-module breakdown.
    pub fn count_parameters(&self) -> ParamCount {
        let mut modules: Vec<(String, u64)> = alloc::vec![
            ("encoder".to_string(), 0),
            ("efst".to_string(), 0),
            ("decoder".to_string(), 0),
            ("flow".to_string(), 0),
        ];
        for p in self.params() {
            let bucket = if p.name.starts_with("encoder") {
                0
            } else if p.name.starts_with("efst") {
                1
            } else if p.name.starts_with("decoder") {
                2
            } else {
                3
            };
            modules[bucket].1 += p.value.len() as u64;
        }
        let total = modules.iter().map(|m| m.1).sum();
        ParamCount { modules, total }
    }

    /// Bind every parameter onto a fresh tape.
    pub fn bind(&self, tape: &mut Tape<S>, trainable: bool) -> Binding {
        let params = self.params();
        Binding::bind(tape, &params, trainable)
    }

    fn default_flow_source(&self) -> Result<FlowSource<'_, S>, ModelError> {
        match (self.config.flow_estimator, &self.flow) {
            (FlowKind::Zero, _) => Ok(FlowSource::Zero),
            (FlowKind::PyramidLite, Some(p)) => Ok(FlowSource::Pyramid(p)),
            (FlowKind::PyramidLite, None) => Err(ModelError::MissingFlow),
        }
    }

    /// Build the full window graph on `tape`.
    ///
    /// `window` is a [window_size, 3, H, W] leaf (time along the batch
    /// axis). The spatial pass always runs; interpolation passes run per
    /// T_in, each reusing the spatial trace as skip input (or the fused
    /// features under the `use_fused_skips` ablation).
    pub fn forward_window_graph(
        &self,
        tape: &mut Tape<S>,
        bind: &Binding,
        window: NodeId,
        t_ins: &[TimeIndex],
        flow_override: Option<FlowSource<'_, S>>,
    ) -> Result<WindowGraph, ModelError> {
        let ws = self.config.window_size;
        let shape = tape.value(window).shape();
        if shape[0] != ws || shape[1] != CHANNELS {
            return Err(ModelError::BadWindow(format!(
                "expected [{ws}, {CHANNELS}, H, W] input, got {shape:?}"
            )));
        }
        for &t in t_ins {
            if t <= TimeIndex::from_integer(0) || t >= TimeIndex::from_integer(1) {
                return Err(ModelError::Domain(t));
            }
        }
        let center = ws / 2;
        let x3 = tape.slice_n(window, center);
        let x4 = tape.slice_n(window, center + 1);

        // encode all frames once; features[block][frame]
        let pyramid = self.encoder.forward(tape, bind, window)?;

        // fuse per block
        let mut fused = Vec::with_capacity(self.efst.len());
        let mut scores = Vec::with_capacity(self.efst.len());
        for (i, block) in self.efst.iter().enumerate() {
            let out = block.forward(tape, bind, &pyramid.features[i])?;
            fused.push(out.fused);
            scores.push(out.scores);
        }

        // spatial pass: base = center features, skips = fused features
        let base: Vec<NodeId> = (0..self.config.num_blocks)
            .map(|i| pyramid.at(i, center))
            .collect();
        let (residual, trace) = self.decoder.forward(tape, bind, &base, &fused)?;
        let hr_center = compose_output(tape, x3, residual, self.config.scale_r)?;

        let mut graph = WindowGraph {
            center: hr_center,
            intermediates: Vec::new(),
            lr_blends: Vec::new(),
            scores,
            flows: None,
        };
        if t_ins.is_empty() {
            return Ok(graph);
        }

        let flow_src = match flow_override {
            Some(s) => s,
            None => self.default_flow_source()?,
        };
        let (f34, f43) = flow_src.bidirectional(tape, bind, x3, x4)?;
        graph.flows = Some((f34, f43));

        let mut t_sorted: Vec<TimeIndex> = t_ins.to_vec();
        t_sorted.sort();
        let e3: Vec<NodeId> = (0..self.config.num_blocks)
            .map(|i| pyramid.at(i, center))
            .collect();
        let e4: Vec<NodeId> = (0..self.config.num_blocks)
            .map(|i| pyramid.at(i, center + 1))
            .collect();
        let skips: &[NodeId] = if self.config.use_fused_skips {
            &fused
        } else {
            &trace.features
        };
        for t in t_sorted {
            let (f_t3, f_t4) = scale_flows_graph(tape, f34, f43, t)?;
            let m = interpolate_features(tape, &e3, &e4, f_t3, f_t4)?;
            let xhat = blend_lr(tape, x3, x4, f_t3, f_t4)?;
            let (residual_t, _) = self.decoder.forward(tape, bind, &m, skips)?;
            let hr_t = compose_output(tape, xhat, residual_t, self.config.scale_r)?;
            graph.lr_blends.push((t, xhat));
            graph.intermediates.push((t, hr_t));
        }
        Ok(graph)
    }

    /// Inference over one window of frames.
    pub fn forward_window(
        &self,
        frames: &[Frame],
        t_ins: &[TimeIndex],
        opts: &InferenceOptions<'_>,
    ) -> Result<WindowResult, ModelError> {
        if frames.len() != self.config.window_size {
            return Err(ModelError::BadWindow(format!(
                "expected {} frames, got {}",
                self.config.window_size,
                frames.len()
            )));
        }
        let (h, w) = (frames[0].h(), frames[0].w());
        if frames.iter().any(|f| f.h() != h || f.w() != w) {
            return Err(ModelError::Shape("window frames differ in size".to_string()));
        }
        let center = self.config.window_size / 2;
        let t3 = frames[center].time_index;
        let t4 = frames[center + 1].time_index;

        let mut tape = Tape::new();
        let bind = self.bind(&mut tape, false);
        let window = tape.leaf(stack_frames::<S>(frames), false);
        let flow_override = match opts.external_flow {
            Some(est) if !t_ins.is_empty() => {
                let f34 = est.estimate(&frames[center], &frames[center + 1]);
                let f43 = est.estimate(&frames[center + 1], &frames[center]);
                Some(FlowSource::Fixed(f34.to_tensor(), f43.to_tensor()))
            }
            _ => None,
        };
        let graph = self.forward_window_graph(&mut tape, &bind, window, t_ins, flow_override)?;

        let hr_center = Frame::from_tensor(tape.value(graph.center), 0, t3);
        let intermediates = graph
            .intermediates
            .iter()
            .map(|&(t, id)| {
                let abs = t3 + t * (t4 - t3);
                (t, Frame::from_tensor(tape.value(id), 0, abs))
            })
            .collect();
        let diagnostics = if opts.diagnostics {
            let scores = graph
                .scores
                .iter()
                .map(|per_frame| {
                    per_frame
                        .iter()
                        .map(|&id| {
                            let v = tape.value(id);
                            GrayMap {
                                h: v.h(),
                                w: v.w(),
                                data: v.data().iter().map(|&x| x.to_f64_() as f32).collect(),
                            }
                        })
                        .collect()
                })
                .collect();
            let flows = graph.flows.map(|(a, b)| {
                (
                    FlowField::from_tensor(tape.value(a), 0, t3, t4),
                    FlowField::from_tensor(tape.value(b), 0, t4, t3),
                )
            });
            let lr_blends = graph
                .lr_blends
                .iter()
                .map(|&(t, id)| {
                    let abs = t3 + t * (t4 - t3);
                    (t, Frame::from_tensor(tape.value(id), 0, abs))
                })
                .collect();
            Some(Diagnostics {
                scores,
                flows,
                lr_blends,
            })
        } else {
            None
        };
        Ok(WindowResult {
            hr_center,
            intermediates,
            diagnostics,
        })
    }

    /// Sliding-window whole-clip upsampling: every input frame becomes an
    /// HR output, and `n_intermediate` HR frames are synthesized per gap
    /// at T_in = k/(N+1). Boundary windows reflect frame indices.
    pub fn upsample_video(
        &self,
        clip: &Clip,
        n_intermediate: usize,
        opts: &InferenceOptions<'_>,
    ) -> Result<Clip, ModelError> {
        if clip.len() < 2 {
            return Err(ModelError::BadWindow(
                "clip must have at least 2 frames".to_string(),
            ));
        }
        let n = clip.len();
        let ws = self.config.window_size;
        let center = ws / 2;
        let t_ins: Vec<TimeIndex> = (1..=n_intermediate)
            .map(|k| TimeIndex::new(k as i64, (n_intermediate + 1) as i64))
            .collect();
        let mut out = Vec::new();
        for t in 0..n {
            let window: Vec<Frame> = (0..ws)
                .map(|k| clip.frames[reflect_index(t as isize + k as isize - center as isize, n)].clone())
                .collect();
            // the final frame has no following gap
            let t_now: &[TimeIndex] = if t + 1 < n { &t_ins } else { &[] };
            let result = self.forward_window(&window, t_now, opts)?;
            let mut hr_center = result.hr_center;
            hr_center.time_index = clip.frames[t].time_index;
            out.push(hr_center);
            let (t3, t4) = if t + 1 < n {
                (clip.frames[t].time_index, clip.frames[t + 1].time_index)
            } else {
                (clip.frames[t].time_index, clip.frames[t].time_index)
            };
            for (tin, mut frame) in result.intermediates {
                frame.time_index = t3 + tin * (t4 - t3);
                out.push(frame);
            }
        }
        Clip::new(out, clip.fps_label.clone())
            .map_err(|e| ModelError::BadWindow(format!("output clip invalid: {e}")))
    }
}

/// Options for frame-level inference.
#[derive(Default)]
pub struct InferenceOptions<'a> {
    pub diagnostics: bool,
    pub external_flow: Option<&'a dyn FlowEstimator>,
}

/// Reflect an index into [0, len): ..2 1 | 0 1 2 .. len-1 | len-2 ..
pub fn reflect_index(i: isize, len: usize) -> usize {
    let n = len as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut m = i % period;
    if m < 0 {
        m += period;
    }
    if m >= n {
        m = period - m;
    }
    m as usize
}

/// Stack frames along the batch axis as a [T, 3, H, W] tensor.
pub fn stack_frames<S: Scalar>(frames: &[Frame]) -> Tensor<S> {
    let (h, w) = (frames[0].h(), frames[0].w());
    let mut data = Vec::with_capacity(frames.len() * CHANNELS * h * w);
    for f in frames {
        data.extend(f.data().iter().map(|&v| S::scalar_from_f64(v as f64)));
    }
    Tensor::from_vec([frames.len(), CHANNELS, h, w], data)
}
