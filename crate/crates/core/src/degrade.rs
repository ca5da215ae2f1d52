//! HR -> LR degradation: Gaussian smoothing followed by subsampling at
//! stride r.
//!
//! The default phase samples each r x r cell at its center (fractional
//! for even r, realized by evaluating the blur kernel on a half-shifted
//! tap grid). Center phase makes the whole operator commute with flips
//! and 90/180-degree rotations, which the augmentation consistency
//! property requires; the conventional top-left phase is available as an
//! option. Boundaries are symmetric-reflected, accumulation is in f64.

use alloc::vec::Vec;

use crate::config::DegradePhase;
use crate::frame::{Frame, CHANNELS};
#[allow(unused_imports)]
use num_traits::Float;

/// Frame dimensions not divisible by the scale factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeError {
    pub h: usize,
    pub w: usize,
    pub r: usize,
}

impl core::fmt::Display for SizeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "frame {}x{} not divisible by scale {}", self.w, self.h, self.r)
    }
}

impl core::error::Error for SizeError {}

/// Symmetric reflection (half-sample mirror) of an index into [0, n).
#[inline]
pub fn reflect_symmetric(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i % period;
    if m < 0 {
        m += period;
    }
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// 1-D blur taps for one output sample.
///
/// Returns (first input offset relative to `r*j`, weights). For center
/// phase with even r the kernel grid is shifted by half a pixel so the
/// effective sampling position is the cell center r*j + (r-1)/2.
pub fn kernel_taps(scale_r: usize, sigma: f64, phase: DegradePhase) -> (isize, Vec<f64>) {
    let radius = (3.0 * sigma).ceil() as isize;
    let (start, positions): (isize, Vec<f64>) = match phase {
        DegradePhase::Center => {
            let center = (scale_r as f64 - 1.0) / 2.0;
            if scale_r % 2 == 0 {
                // taps at center +- (m + 0.5): integer grid positions
                let first = center as isize - radius + 1; // center - radius + 0.5
                let taps = (0..2 * radius)
                    .map(|k| (first + k as isize) as f64 - center)
                    .collect();
                (first, taps)
            } else {
                let c = center as isize;
                let taps = (-radius..=radius).map(|d| d as f64).collect();
                (c - radius, taps)
            }
        }
        DegradePhase::TopLeft => {
            let taps = (-radius..=radius).map(|d| d as f64).collect();
            (-radius, taps)
        }
    };
    let mut weights: Vec<f64> = positions
        .iter()
        .map(|&d| (-d * d / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= norm;
    }
    (start, weights)
}

/// Gaussian blur + stride-r subsampling. Deterministic and linear.
pub fn degrade(hr: &Frame, scale_r: usize, sigma: f64, phase: DegradePhase) -> Result<Frame, SizeError> {
    let (h, w) = (hr.h(), hr.w());
    if h % scale_r != 0 || w % scale_r != 0 {
        return Err(SizeError { h, w, r: scale_r });
    }
    let (lh, lw) = (h / scale_r, w / scale_r);
    let (start, taps) = kernel_taps(scale_r, sigma, phase);
    let k = taps.len();

    let mut out = Vec::with_capacity(CHANNELS * lh * lw);
    // horizontal pass at output columns only: tmp[y][j]
    let mut tmp = alloc::vec![0.0f64; h * lw];
    for c in 0..CHANNELS {
        for y in 0..h {
            for j in 0..lw {
                let base = (scale_r * j) as isize + start;
                let mut acc = 0.0f64;
                for (m, &wt) in taps.iter().enumerate().take(k) {
                    let x = reflect_symmetric(base + m as isize, w);
                    acc += wt * hr.at(c, y, x) as f64;
                }
                tmp[y * lw + j] = acc;
            }
        }
        // vertical pass at output rows
        for i in 0..lh {
            let base = (scale_r * i) as isize + start;
            for j in 0..lw {
                let mut acc = 0.0f64;
                for (m, &wt) in taps.iter().enumerate().take(k) {
                    let y = reflect_symmetric(base + m as isize, h);
                    acc += wt * tmp[y * lw + j];
                }
                out.push(acc as f32);
            }
        }
    }
    Ok(Frame::new(hr.time_index, lh, lw, out))
}
