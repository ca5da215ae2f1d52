//! Training-example extraction: co-registered LR/HR patch windows with
//! intermediate-frame ground truth.
//!
//! A sample's seven LR inputs are taken at temporal stride s; the frames
//! the stride skips over between the two center inputs become the
//! intermediate ground truth at T_in = k/s. Drawing the window direction
//! (forward or reversed) at sampling time realizes sequence-reversal
//! augmentation with exact ground-truth pairing.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::ValidatedConfig;
use crate::frame::{Clip, Frame, TimeIndex, CHANNELS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchError(pub String);

impl core::fmt::Display for PatchError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "patch error: {}", self.0)
    }
}

impl core::error::Error for PatchError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataError(pub String);

impl core::fmt::Display for DataError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "dataset error: {}", self.0)
    }
}

impl core::error::Error for DataError {}

/// Ground truth for one intermediate position.
#[derive(Debug, Clone, PartialEq)]
pub struct Intermediate {
    /// Position in (0,1) between the two center inputs, k/stride.
    pub t_in: TimeIndex,
    pub hr: Frame,
    pub lr: Frame,
}

/// One training example: co-registered LR inputs, the HR center target,
/// and intermediate HR/LR targets. LR patch size times r equals the HR
/// patch size exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub lr_inputs: Vec<Frame>,
    pub hr_center: Frame,
    pub intermediates: Vec<Intermediate>,
}

/// An HR clip paired with its degraded LR version, frame for frame.
#[derive(Debug, Clone)]
pub struct ClipPair {
    pub hr: Clip,
    pub lr: Clip,
}

/// Loaded dataset ready for patch sampling.
pub struct InMemoryDataset {
    pub clips: Vec<ClipPair>,
}

/// Sampling controls.
#[derive(Debug, Clone, Copy)]
pub struct SampleOptions {
    pub patch_size: usize,
    /// Extract intermediate ground truth (joint phase) or not (pretrain).
    pub with_intermediates: bool,
    /// Draw the window direction per sample (sequence-reversal
    /// augmentation).
    pub random_reverse: bool,
}

impl InMemoryDataset {
    /// Frames a clip must have to host one window at stride s.
    pub fn min_frames(window_size: usize, stride: usize) -> usize {
        (window_size - 1) * stride + 1
    }

    /// Check the dataset can serve windows and patches for `cfg`.
    pub fn validate(&self, cfg: &ValidatedConfig, patch_size: usize) -> Result<(), DataError> {
        if self.clips.is_empty() {
            return Err(DataError("no clips in dataset".into()));
        }
        let need = Self::min_frames(cfg.window_size, cfg.stride);
        for (i, pair) in self.clips.iter().enumerate() {
            if pair.hr.len() < need {
                return Err(DataError(format!(
                    "clip {i} has {} frames, needs at least {need} for window {} at stride {}",
                    pair.hr.len(),
                    cfg.window_size,
                    cfg.stride
                )));
            }
            if pair.hr.len() != pair.lr.len() {
                return Err(DataError(format!(
                    "clip {i} has {} HR frames but {} LR frames",
                    pair.hr.len(),
                    pair.lr.len()
                )));
            }
            if pair.hr.h() != pair.lr.h() * cfg.scale_r || pair.hr.w() != pair.lr.w() * cfg.scale_r
            {
                return Err(DataError(format!(
                    "clip {i}: HR {}x{} is not LR {}x{} times r={}",
                    pair.hr.w(),
                    pair.hr.h(),
                    pair.lr.w(),
                    pair.lr.h(),
                    cfg.scale_r
                )));
            }
            if pair.hr.h() < patch_size || pair.hr.w() < patch_size {
                return Err(DataError(format!(
                    "clip {i} frames {}x{} smaller than patch {patch_size}",
                    pair.hr.w(),
                    pair.hr.h()
                )));
            }
        }
        Ok(())
    }

    /// Draw one sample. The window start, patch origin, clip choice and
    /// (optionally) time direction all come from `rng`.
    pub fn sample_one(
        &self,
        cfg: &ValidatedConfig,
        opts: &SampleOptions,
        rng: &mut ChaCha8Rng,
    ) -> Result<TrainingSample, PatchError> {
        let patch = opts.patch_size;
        let r = cfg.scale_r;
        if patch % r != 0 {
            return Err(PatchError(format!(
                "patch size {patch} not divisible by scale {r}"
            )));
        }
        if self.clips.is_empty() {
            return Err(PatchError("empty dataset".into()));
        }
        let pair = &self.clips[rng.gen_range(0..self.clips.len())];
        let (s, ws) = (cfg.stride, cfg.window_size);
        let span = (ws - 1) * s;
        if pair.hr.len() < span + 1 {
            return Err(PatchError(format!(
                "clip too short: {} frames, window needs {}",
                pair.hr.len(),
                span + 1
            )));
        }
        let start = rng.gen_range(0..=pair.hr.len() - span - 1);
        let reversed = opts.random_reverse && rng.gen_bool(0.5);

        let lp = patch / r;
        let (lh, lw) = (pair.lr.h(), pair.lr.w());
        if lp > lh || lp > lw {
            return Err(PatchError(format!(
                "patch {patch} exceeds frame bounds {}x{}",
                lw * r,
                lh * r
            )));
        }
        let ly = rng.gen_range(0..=lh - lp);
        let lx = rng.gen_range(0..=lw - lp);

        // physical frame index of the k-th input (k ascending in sample time)
        let input_index = |k: usize| -> usize {
            if reversed {
                start + (ws - 1 - k) * s
            } else {
                start + k * s
            }
        };
        let crop_lr = |idx: usize, t: TimeIndex| crop(&pair.lr.frames[idx], ly, lx, lp, t);
        let crop_hr =
            |idx: usize, t: TimeIndex| crop(&pair.hr.frames[idx], ly * r, lx * r, patch, t);

        let lr_inputs: Vec<Frame> = (0..ws)
            .map(|k| crop_lr(input_index(k), TimeIndex::from_integer(k as i64)))
            .collect();
        let center = ws / 2;
        let hr_center = crop_hr(input_index(center), TimeIndex::from_integer(center as i64));

        let mut intermediates = Vec::new();
        if opts.with_intermediates {
            for k in 1..s {
                let t_in = TimeIndex::new(k as i64, s as i64);
                // physical frame between the center pair at position t_in
                let idx = if reversed {
                    start + (ws - 1 - center) * s - k
                } else {
                    start + center * s + k
                };
                let t_abs = TimeIndex::from_integer(center as i64) + t_in;
                intermediates.push(Intermediate {
                    t_in,
                    hr: crop_hr(idx, t_abs),
                    lr: crop_lr(idx, t_abs),
                });
            }
        }
        Ok(TrainingSample {
            lr_inputs,
            hr_center,
            intermediates,
        })
    }

    /// Draw a batch; crops are co-registered across the frames of each
    /// sample and independent across samples.
    pub fn sample_batch(
        &self,
        cfg: &ValidatedConfig,
        opts: &SampleOptions,
        batch: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<TrainingSample>, PatchError> {
        (0..batch).map(|_| self.sample_one(cfg, opts, rng)).collect()
    }
}

fn crop(f: &Frame, y0: usize, x0: usize, size: usize, t: TimeIndex) -> Frame {
    let mut data = Vec::with_capacity(CHANNELS * size * size);
    for c in 0..CHANNELS {
        for y in 0..size {
            for x in 0..size {
                data.push(f.at(c, y0 + y, x0 + x));
            }
        }
    }
    Frame::new(t, size, size, data)
}

/// Batch supply for the training loop; lets the loop stay storage
/// agnostic (in-memory here, directory-backed in the I/O crate).
pub trait BatchSource {
    fn sample(
        &mut self,
        cfg: &ValidatedConfig,
        opts: &SampleOptions,
        batch: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<TrainingSample>, PatchError>;
}

impl BatchSource for InMemoryDataset {
    fn sample(
        &mut self,
        cfg: &ValidatedConfig,
        opts: &SampleOptions,
        batch: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<TrainingSample>, PatchError> {
        self.sample_batch(cfg, opts, batch, rng)
    }
}

/// The model sees inputs at consecutive integer times; intermediate
/// positions are center + T_in. Physical clip numbering is erased during
/// extraction (crops carry window-relative indices).
pub fn window_time(center: usize, t_in: TimeIndex) -> TimeIndex {
    TimeIndex::from_integer(center as i64) + t_in
}
