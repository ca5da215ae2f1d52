//! Training-sample augmentation: left-right flips, 90/180-degree
//! rotations and time reversal, applied identically to every LR and HR
//! frame of a sample.
//!
//! Flips and rotations are always valid. Reversal of an already-extracted
//! sample reverses the input order and remaps intermediate positions
//! T_in -> 1 - T_in; for samples that carry intermediate ground truth the
//! training pipeline instead draws the window direction at sampling time
//! (see [`crate::sample`]), which reverses the underlying sequence before
//! extraction and therefore keeps the ground-truth pairing exact.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::frame::{Frame, TimeIndex, CHANNELS};
use crate::sample::{Intermediate, TrainingSample};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentError(pub String);

impl core::fmt::Display for AugmentError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "augmentation error: {}", self.0)
    }
}

impl core::error::Error for AugmentError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rotation {
    None,
    Quarter,
    Half,
}

/// One drawn augmentation. Applied as rotate, then flip, then reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentOps {
    pub flip_lr: bool,
    pub rotation: Rotation,
    pub reverse_time: bool,
}

impl AugmentOps {
    pub const IDENTITY: AugmentOps = AugmentOps {
        flip_lr: false,
        rotation: Rotation::None,
        reverse_time: false,
    };
}

/// Draw flip/rotation/reversal uniformly.
pub fn draw_ops(rng: &mut ChaCha8Rng) -> AugmentOps {
    let rotation = match rng.gen_range(0..3u8) {
        0 => Rotation::None,
        1 => Rotation::Quarter,
        _ => Rotation::Half,
    };
    AugmentOps {
        flip_lr: rng.gen_bool(0.5),
        rotation,
        reverse_time: rng.gen_bool(0.5),
    }
}

fn transform_frame(f: &Frame, ops: &AugmentOps) -> Result<Frame, AugmentError> {
    let (h, w) = (f.h(), f.w());
    let rotated = match ops.rotation {
        Rotation::None => f.clone(),
        Rotation::Quarter => {
            if h != w {
                return Err(AugmentError(alloc::format!(
                    "90-degree rotation needs square frames, got {w}x{h}"
                )));
            }
            // (y, x) -> (x, h-1-y): counter-clockwise quarter turn
            let mut data = Vec::with_capacity(CHANNELS * h * w);
            for c in 0..CHANNELS {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f.at(c, w - 1 - x, y));
                    }
                }
            }
            Frame::new(f.time_index, w, h, data)
        }
        Rotation::Half => {
            let mut data = Vec::with_capacity(CHANNELS * h * w);
            for c in 0..CHANNELS {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f.at(c, h - 1 - y, w - 1 - x));
                    }
                }
            }
            Frame::new(f.time_index, h, w, data)
        }
    };
    if !ops.flip_lr {
        return Ok(rotated);
    }
    let (h, w) = (rotated.h(), rotated.w());
    let mut data = Vec::with_capacity(CHANNELS * h * w);
    for c in 0..CHANNELS {
        for y in 0..h {
            for x in 0..w {
                data.push(rotated.at(c, y, w - 1 - x));
            }
        }
    }
    Ok(Frame::new(rotated.time_index, h, w, data))
}

/// Apply `ops` to every frame of the sample.
pub fn augment(sample: &TrainingSample, ops: &AugmentOps) -> Result<TrainingSample, AugmentError> {
    let mut lr_inputs: Vec<Frame> = sample
        .lr_inputs
        .iter()
        .map(|f| transform_frame(f, ops))
        .collect::<Result<_, _>>()?;
    let hr_center = transform_frame(&sample.hr_center, ops)?;
    let mut intermediates: Vec<Intermediate> = sample
        .intermediates
        .iter()
        .map(|i| {
            Ok(Intermediate {
                t_in: i.t_in,
                hr: transform_frame(&i.hr, ops)?,
                lr: transform_frame(&i.lr, ops)?,
            })
        })
        .collect::<Result<_, AugmentError>>()?;
    if ops.reverse_time {
        // mirror the timeline: reverse input order and remap positions
        let t_min = lr_inputs.first().map(|f| f.time_index).unwrap_or_default();
        let t_max = lr_inputs.last().map(|f| f.time_index).unwrap_or_default();
        lr_inputs.reverse();
        for f in &mut lr_inputs {
            f.time_index = t_min + t_max - f.time_index;
        }
        for i in &mut intermediates {
            i.t_in = TimeIndex::from_integer(1) - i.t_in;
        }
        intermediates.sort_by_key(|i| i.t_in);
    }
    Ok(TrainingSample {
        lr_inputs,
        hr_center,
        intermediates,
    })
}

/// Draw and apply; 90-degree rotations are redrawn as half turns on
/// non-square frames so random augmentation never fails on valid input.
pub fn augment_random(
    sample: &TrainingSample,
    rng: &mut ChaCha8Rng,
    allow_reverse: bool,
) -> Result<TrainingSample, AugmentError> {
    let mut ops = draw_ops(rng);
    if !allow_reverse {
        ops.reverse_time = false;
    }
    if ops.rotation == Rotation::Quarter && sample.hr_center.h() != sample.hr_center.w() {
        ops.rotation = Rotation::Half;
    }
    augment(sample, &ops)
}
