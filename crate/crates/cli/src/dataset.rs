//! On-disk training datasets.
//!
//! Layout produced by `stvu prepare`:
//!
//! ```text
//! <root>/manifest.txt      # "<clip_name> <frame_count>" per line
//! <root>/meta.txt          # degradation parameters (key = value)
//! <root>/hr/<clip>/%06d.png
//! <root>/lr/<clip>/%06d.png
//! ```
//!
//! Every frame is degraded (inputs and the in-between frames that become
//! intermediate ground truth alike).

use std::fs;
use std::path::{Path, PathBuf};

use stvu_core::config::{DegradePhase, ModelConfig};
use stvu_core::degrade::degrade;
use stvu_core::frame::Clip;
use stvu_core::sample::{ClipPair, InMemoryDataset};

use crate::error::CliError;
use crate::pngio;

/// Clip list plus the stride reserved for intermediate ground truth.
#[derive(Debug, Clone)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub clips: Vec<(String, usize)>,
    pub stride: usize,
}

/// Degradation parameters recorded alongside generated LR sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradeMeta {
    pub scale_r: usize,
    pub sigma: f64,
    pub phase: DegradePhase,
    pub stride: usize,
    pub source: String,
}

impl DegradeMeta {
    pub fn emit(&self) -> String {
        format!(
            "scale_r = {}\ndegrade_sigma = {}\ndegrade_phase = {}\nstride = {}\nsource = {}\n",
            self.scale_r,
            self.sigma,
            self.phase.as_str(),
            self.stride,
            self.source
        )
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut meta = DegradeMeta {
            scale_r: 0,
            sigma: 0.0,
            phase: DegradePhase::Center,
            stride: 0,
            source: String::new(),
        };
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("bad meta line: {line}")))?;
            let v = v.trim();
            match k.trim() {
                "scale_r" => meta.scale_r = v.parse().map_err(|_| bad_meta(line))?,
                "degrade_sigma" => meta.sigma = v.parse().map_err(|_| bad_meta(line))?,
                "degrade_phase" => {
                    meta.phase = match v {
                        "center" => DegradePhase::Center,
                        "topleft" => DegradePhase::TopLeft,
                        _ => return Err(bad_meta(line)),
                    }
                }
                "stride" => meta.stride = v.parse().map_err(|_| bad_meta(line))?,
                "source" => meta.source = v.to_string(),
                _ => return Err(CliError::Validation(format!("unknown meta key in: {line}"))),
            }
        }
        if meta.scale_r == 0 || meta.stride == 0 {
            return Err(CliError::Validation("incomplete meta.txt".into()));
        }
        Ok(meta)
    }
}

fn bad_meta(line: &str) -> CliError {
    CliError::Validation(format!("cannot parse meta line: {line}"))
}

/// Outcome of preparing one corpus.
pub struct PrepareSummary {
    pub prepared: Vec<(String, usize)>,
    pub skipped: Vec<(String, String)>,
}

/// Degrade an HR corpus into a self-contained training dataset. Clips
/// whose frame size is not divisible by the scale are skipped with a
/// warning (the summary lists them); at least one clip must survive.
pub fn prepare(
    hr_root: &Path,
    out_root: &Path,
    scale_r: usize,
    sigma: f64,
    phase: DegradePhase,
    stride: usize,
) -> Result<PrepareSummary, CliError> {
    let clip_dirs = pngio::list_clip_dirs(hr_root)?;
    if clip_dirs.is_empty() {
        return Err(CliError::Io(format!(
            "no clip directories under {}",
            hr_root.display()
        )));
    }
    let mut summary = PrepareSummary {
        prepared: vec![],
        skipped: vec![],
    };
    for dir in &clip_dirs {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let clip = match pngio::read_frames(dir) {
            Ok(c) => c,
            Err(e) => {
                summary.skipped.push((name, e.to_string()));
                continue;
            }
        };
        if clip.h() % scale_r != 0 || clip.w() % scale_r != 0 {
            summary.skipped.push((
                name,
                format!(
                    "frame size {}x{} not divisible by scale {}",
                    clip.w(),
                    clip.h(),
                    scale_r
                ),
            ));
            continue;
        }
        let lr_frames = clip
            .frames
            .iter()
            .map(|f| degrade(f, scale_r, sigma, phase))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let lr = Clip::new(lr_frames, clip.fps_label.clone())
            .map_err(|e| CliError::Validation(e.to_string()))?;
        pngio::write_frames(&clip, &out_root.join("hr").join(&name))?;
        pngio::write_frames(&lr, &out_root.join("lr").join(&name))?;
        summary.prepared.push((name, clip.len()));
    }
    if summary.prepared.is_empty() {
        return Err(CliError::Io(
            "no clip could be prepared (all skipped)".into(),
        ));
    }
    let manifest: String = summary
        .prepared
        .iter()
        .map(|(n, c)| format!("{n} {c}\n"))
        .collect();
    pngio::write_atomic(&out_root.join("manifest.txt"), manifest.as_bytes())?;
    let meta = DegradeMeta {
        scale_r,
        sigma,
        phase,
        stride,
        source: hr_root.display().to_string(),
    };
    pngio::write_atomic(&out_root.join("meta.txt"), meta.emit().as_bytes())?;
    Ok(summary)
}

/// Parse manifest + meta of a prepared dataset.
pub fn load_index(root: &Path) -> Result<(DatasetIndex, DegradeMeta), CliError> {
    let manifest = fs::read_to_string(root.join("manifest.txt"))
        .map_err(|e| CliError::io(e, &root.join("manifest.txt")))?;
    let meta = DegradeMeta::parse(
        &fs::read_to_string(root.join("meta.txt"))
            .map_err(|e| CliError::io(e, &root.join("meta.txt")))?,
    )?;
    let mut clips = Vec::new();
    for line in manifest.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (name, count) = line
            .rsplit_once(' ')
            .ok_or_else(|| CliError::Validation(format!("bad manifest line: {line}")))?;
        let count: usize = count
            .parse()
            .map_err(|_| CliError::Validation(format!("bad frame count in: {line}")))?;
        clips.push((name.to_string(), count));
    }
    Ok((
        DatasetIndex {
            root: root.to_path_buf(),
            clips,
            stride: meta.stride,
        },
        meta,
    ))
}

/// Load the HR/LR pairs of a prepared dataset into memory and validate
/// them against the model configuration.
pub fn load_training_set(
    index: &DatasetIndex,
    cfg: &stvu_core::ValidatedConfig,
    patch_size: usize,
) -> Result<InMemoryDataset, CliError> {
    let mut pairs = Vec::with_capacity(index.clips.len());
    for (name, count) in &index.clips {
        let hr = pngio::read_frames(&index.root.join("hr").join(name))?;
        let lr = pngio::read_frames(&index.root.join("lr").join(name))?;
        if hr.len() != *count {
            return Err(CliError::Validation(format!(
                "clip {name}: manifest says {count} frames, found {}",
                hr.len()
            )));
        }
        pairs.push(ClipPair { hr, lr });
    }
    let ds = InMemoryDataset { clips: pairs };
    ds.validate(cfg, patch_size)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(ds)
}

/// Check a prepared dataset's degradation parameters against the run
/// configuration, so training data and model config cannot drift apart.
pub fn check_meta(meta: &DegradeMeta, cfg: &ModelConfig) -> Result<(), CliError> {
    let mut mismatches = Vec::new();
    if meta.scale_r != cfg.scale_r {
        mismatches.push(format!("scale_r {} vs {}", meta.scale_r, cfg.scale_r));
    }
    if meta.stride != cfg.stride {
        mismatches.push(format!("stride {} vs {}", meta.stride, cfg.stride));
    }
    if (meta.sigma - cfg.degrade_sigma).abs() > 1e-12 {
        mismatches.push(format!("sigma {} vs {}", meta.sigma, cfg.degrade_sigma));
    }
    if meta.phase != cfg.degrade_phase {
        mismatches.push("degrade_phase".into());
    }
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "dataset was prepared with different parameters: {}",
            mismatches.join(", ")
        )))
    }
}
