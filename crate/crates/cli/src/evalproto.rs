//! The odd/even evaluation protocol.
//!
//! Odd-numbered frames of a test clip are withheld as interpolation
//! ground truth; only the even-numbered frames are degraded and fed to
//! the model. The center output of each sliding window is scored against
//! the HR even frame, the T_in = 1/2 output against the withheld odd
//! frame. PSNR/SSIM are RGB by default (a luma mode exists behind a
//! flag), runtime is measured over model inference alone.

use std::path::Path;
use std::time::Instant;

use stvu_core::autograd::Tape;
use stvu_core::degrade::degrade;
use stvu_core::frame::{Clip, Frame, TimeIndex};
use stvu_core::losses::format_metric;
use stvu_core::metrics::{psnr, ssim};
use stvu_core::model::{InferenceOptions, Network};
use stvu_core::tensor::Tensor;

use crate::error::CliError;
use crate::pngio::{quantize_u8, write_atomic};

/// What produces the outputs under evaluation.
pub enum EvalModel<'a> {
    Network(&'a Network<f32>),
    /// Harness sanity check: ground truth fed back as the output.
    IdentityOracle,
    /// Residuals zeroed and zero flow: bilinear upsampling of the center
    /// frame; plain blended upsampling for intermediates.
    BilinearBaseline,
}

impl<'a> EvalModel<'a> {
    pub fn name(&self) -> &'static str {
        match self {
            EvalModel::Network(_) => "trained",
            EvalModel::IdentityOracle => "identity-oracle",
            EvalModel::BilinearBaseline => "bilinear",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// Border shave (pixels per side) before metrics.
    pub crop_border: usize,
    /// Score on BT.601 luma instead of RGB.
    pub luma: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            crop_border: 0,
            luma: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrameScore {
    pub clip: String,
    pub window: usize,
    pub kind: &'static str, // "center" | "intermediate"
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone)]
pub struct ClipSummary {
    pub clip: String,
    pub center_psnr: f64,
    pub center_ssim: f64,
    pub inter_psnr: f64,
    pub inter_ssim: f64,
    pub windows: usize,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub method: String,
    pub per_frame: Vec<FrameScore>,
    pub per_clip: Vec<ClipSummary>,
    pub mean_center: (f64, f64),
    pub mean_intermediate: (f64, f64),
    pub params: u64,
    pub runtime_per_frame: f64,
    /// HR resolution the runtime was measured at.
    pub resolution: (usize, usize),
}

fn luma(frame: &Frame) -> Frame {
    Frame::from_fn(frame.time_index, frame.h(), frame.w(), |_, y, x| {
        0.299 * frame.at(0, y, x) + 0.587 * frame.at(1, y, x) + 0.114 * frame.at(2, y, x)
    })
}

fn crop(frame: &Frame, border: usize) -> Frame {
    if border == 0 {
        return frame.clone();
    }
    let (h, w) = (frame.h() - 2 * border, frame.w() - 2 * border);
    Frame::from_fn(frame.time_index, h, w, |c, y, x| {
        frame.at(c, y + border, x + border)
    })
}

fn score(pred: &Frame, gt: &Frame, opts: &EvalOptions) -> Result<(f64, f64), CliError> {
    let (mut p, mut g) = (crop(pred, opts.crop_border), crop(gt, opts.crop_border));
    if opts.luma {
        p = luma(&p);
        g = luma(&g);
    }
    let ps = psnr(&p, &g).map_err(|e| CliError::Validation(e.to_string()))?;
    let ss = ssim(&p, &g).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok((ps, ss))
}

/// Bilinear x r upsampling of a single frame.
pub fn bilinear_upsample(frame: &Frame, r: usize) -> Frame {
    let mut tape: Tape<f32> = Tape::new();
    let x = tape.leaf(frame.to_tensor(), false);
    let up = tape.resize_bilinear(x, frame.h() * r, frame.w() * r);
    Frame::from_tensor(tape.value(up), 0, frame.time_index)
}

fn average(a: &Frame, b: &Frame) -> Frame {
    Frame::from_fn(a.time_index, a.h(), a.w(), |c, y, x| {
        0.5 * (a.at(c, y, x) + b.at(c, y, x))
    })
}

/// Run the protocol over loaded HR clips.
pub fn evaluate_protocol(
    model: &EvalModel<'_>,
    testset: &[(String, Clip)],
    cfg: &stvu_core::ValidatedConfig,
    opts: &EvalOptions,
) -> Result<EvalReport, CliError> {
    let window_size = cfg.window_size;
    let center = window_size / 2;
    let mut per_frame = Vec::new();
    let mut per_clip = Vec::new();
    let mut inference_seconds = 0.0f64;
    let mut frames_produced = 0usize;
    let mut resolution = (0usize, 0usize);
    let t_half = TimeIndex::new(1, 2);

    for (clip_name, hr) in testset {
        let evens: Vec<usize> = (0..hr.len()).step_by(2).collect();
        if evens.len() < window_size {
            return Err(CliError::Validation(format!(
                "clip {clip_name} has {} even frames, a window needs {window_size}",
                evens.len()
            )));
        }
        // the model input set is exactly the even-numbered frames
        assert!(
            evens.iter().all(|i| i % 2 == 0),
            "protocol must not leak odd frames into the input"
        );
        let lr_inputs: Vec<Frame> = evens
            .iter()
            .map(|&i| {
                let mut lr = degrade(&hr.frames[i], cfg.scale_r, cfg.degrade_sigma, cfg.degrade_phase)
                    .map_err(|e| CliError::Validation(format!("clip {clip_name}: {e}")))?;
                // mirror the 8-bit file boundary the training data went through
                for v in lr.data_mut() {
                    *v = quantize_u8(*v) as f32 / 255.0;
                }
                Ok::<Frame, CliError>(lr)
            })
            .collect::<Result<_, _>>()?;
        resolution = (hr.h(), hr.w());

        let mut scores_this_clip: Vec<FrameScore> = Vec::new();
        for w in 0..=evens.len() - window_size {
            let window: Vec<Frame> = lr_inputs[w..w + window_size].to_vec();
            let center_even = evens[w + center];
            let odd_index = center_even + 1;
            let has_intermediate = odd_index < hr.len();
            let gt_center = &hr.frames[center_even];
            let t_ins: Vec<TimeIndex> = if has_intermediate { vec![t_half] } else { vec![] };

            let (pred_center, pred_inter) = match model {
                EvalModel::Network(net) => {
                    let t0 = Instant::now();
                    let out = net
                        .forward_window(&window, &t_ins, &InferenceOptions::default())
                        .map_err(|e| CliError::Validation(e.to_string()))?;
                    inference_seconds += t0.elapsed().as_secs_f64();
                    frames_produced += 1 + out.intermediates.len();
                    (
                        out.hr_center,
                        out.intermediates.into_iter().next().map(|(_, f)| f),
                    )
                }
                EvalModel::IdentityOracle => {
                    frames_produced += 1 + usize::from(has_intermediate);
                    (
                        gt_center.clone(),
                        has_intermediate.then(|| hr.frames[odd_index].clone()),
                    )
                }
                EvalModel::BilinearBaseline => {
                    let t0 = Instant::now();
                    let c = bilinear_upsample(&window[center], cfg.scale_r);
                    let i = has_intermediate.then(|| {
                        bilinear_upsample(&average(&window[center], &window[center + 1]), cfg.scale_r)
                    });
                    inference_seconds += t0.elapsed().as_secs_f64();
                    frames_produced += 1 + usize::from(i.is_some());
                    (c, i)
                }
            };

            let (ps, ss) = score(&pred_center, gt_center, opts)?;
            scores_this_clip.push(FrameScore {
                clip: clip_name.clone(),
                window: w,
                kind: "center",
                psnr: ps,
                ssim: ss,
            });
            if let Some(pred) = pred_inter {
                let (ps, ss) = score(&pred, &hr.frames[odd_index], opts)?;
                scores_this_clip.push(FrameScore {
                    clip: clip_name.clone(),
                    window: w,
                    kind: "intermediate",
                    psnr: ps,
                    ssim: ss,
                });
            }
        }
        let agg = |kind: &str, pick: fn(&FrameScore) -> f64| -> f64 {
            let vals: Vec<f64> = scores_this_clip
                .iter()
                .filter(|s| s.kind == kind)
                .map(pick)
                .collect();
            vals.iter().sum::<f64>() / vals.len().max(1) as f64
        };
        per_clip.push(ClipSummary {
            clip: clip_name.clone(),
            center_psnr: agg("center", |s| s.psnr),
            center_ssim: agg("center", |s| s.ssim),
            inter_psnr: agg("intermediate", |s| s.psnr),
            inter_ssim: agg("intermediate", |s| s.ssim),
            windows: evens.len() - window_size + 1,
        });
        per_frame.extend(scores_this_clip);
    }

    let mean = |kind: &str, pick: fn(&FrameScore) -> f64| -> f64 {
        let vals: Vec<f64> = per_frame
            .iter()
            .filter(|s| s.kind == kind)
            .map(pick)
            .collect();
        vals.iter().sum::<f64>() / vals.len().max(1) as f64
    };
    let params = match model {
        EvalModel::Network(net) => net.count_parameters().total,
        _ => 0,
    };
    Ok(EvalReport {
        method: model.name().to_string(),
        mean_center: (mean("center", |s| s.psnr), mean("center", |s| s.ssim)),
        mean_intermediate: (
            mean("intermediate", |s| s.psnr),
            mean("intermediate", |s| s.ssim),
        ),
        per_frame,
        per_clip,
        params,
        runtime_per_frame: inference_seconds / frames_produced.max(1) as f64,
        resolution,
    })
}

/// Per-frame CSV: clip,window,kind,psnr,ssim (infinite PSNR as "inf").
pub fn write_frame_csv(report: &EvalReport, path: &Path) -> Result<(), CliError> {
    let mut out = String::from("clip,window,kind,psnr,ssim\n");
    for s in &report.per_frame {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.clip,
            s.window,
            s.kind,
            format_metric(s.psnr),
            format_metric(s.ssim)
        ));
    }
    write_atomic(path, out.as_bytes())
}

fn metric_json(v: f64) -> serde_json::Value {
    if v.is_infinite() {
        serde_json::Value::String("inf".into())
    } else {
        serde_json::json!(v)
    }
}

/// Per-clip JSON summary.
pub fn write_json_summary(report: &EvalReport, path: &Path) -> Result<(), CliError> {
    let clips: Vec<serde_json::Value> = report
        .per_clip
        .iter()
        .map(|c| {
            serde_json::json!({
                "clip": c.clip,
                "windows": c.windows,
                "center": {"psnr": metric_json(c.center_psnr), "ssim": metric_json(c.center_ssim)},
                "intermediate": {"psnr": metric_json(c.inter_psnr), "ssim": metric_json(c.inter_ssim)},
            })
        })
        .collect();
    let doc = serde_json::json!({
        "method": report.method,
        "clips": clips,
        "mean": {
            "center": {"psnr": metric_json(report.mean_center.0), "ssim": metric_json(report.mean_center.1)},
            "intermediate": {"psnr": metric_json(report.mean_intermediate.0), "ssim": metric_json(report.mean_intermediate.1)},
        },
        "params": report.params,
        "runtime_per_frame_seconds": report.runtime_per_frame,
        "resolution": format!("{}x{}", report.resolution.1, report.resolution.0),
    });
    write_atomic(path, serde_json::to_string_pretty(&doc).unwrap().as_bytes())
}

/// Text table mirroring the usual comparison layout: per-clip rows plus
/// PSNR/SSIM, parameter-count and runtime columns.
pub fn render_table(report: &EvalReport) -> String {
    let fmt = |v: f64| {
        if v.is_infinite() {
            "inf".to_string()
        } else {
            format!("{v:.2}")
        }
    };
    let fmt4 = |v: f64| {
        if v.is_infinite() {
            "inf".to_string()
        } else {
            format!("{v:.4}")
        }
    };
    let mut t = String::new();
    t.push_str(&format!("method: {}\n", report.method));
    t.push_str(&format!(
        "{:<20} | {:>14} | {:>14}\n",
        "", "center", "intermediate"
    ));
    t.push_str(&format!("{:-<20}-+-{:-<14}-+-{:-<14}\n", "", "", ""));
    for c in &report.per_clip {
        t.push_str(&format!(
            "{:<20} | {:>6}/{:>7} | {:>6}/{:>7}\n",
            c.clip,
            fmt(c.center_psnr),
            fmt4(c.center_ssim),
            fmt(c.inter_psnr),
            fmt4(c.inter_ssim)
        ));
    }
    t.push_str(&format!("{:-<20}-+-{:-<14}-+-{:-<14}\n", "", "", ""));
    t.push_str(&format!(
        "{:<20} | {:>6}/{:>7} | {:>6}/{:>7}\n",
        "mean",
        fmt(report.mean_center.0),
        fmt4(report.mean_center.1),
        fmt(report.mean_intermediate.0),
        fmt4(report.mean_intermediate.1)
    ));
    t.push_str(&format!(
        "#Params: {:.1}M ({})\nRunning Time: {:.4} s/frame at {}x{}\n",
        report.params as f64 / 1e6,
        report.params,
        report.runtime_per_frame,
        report.resolution.1,
        report.resolution.0
    ));
    t
}
