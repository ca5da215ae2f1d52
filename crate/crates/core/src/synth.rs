//! Deterministic synthetic clips: textured patterns under constant
//! translation. Used by smoke tests, the overfit acceptance run and as a
//! quick data source for trying the pipeline without real footage.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::frame::{Clip, Frame, TimeIndex};
use crate::rng;
#[allow(unused_imports)]
use num_traits::Float;

/// Parameters of one synthetic clip.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub frames: usize,
    pub h: usize,
    pub w: usize,
    /// Translation per frame in HR pixels.
    pub velocity: (f32, f32),
    pub seed: u64,
}

/// A textured pattern translating at constant velocity. Mixes smooth
/// sinusoids with saturated stripes so both super-resolution and motion
/// matter; pixel values are quantized to 8 bits so frames survive file
/// round trips bit-exactly.
pub fn moving_pattern_clip(spec: &SynthSpec) -> Clip {
    let mut r: ChaCha8Rng = rng::stream(spec.seed, "synth");
    // random but frozen pattern coefficients
    let mut coef = || r.gen_range(0.05f32..0.25);
    let (a1, b1, a2, b2, a3, b3) = (coef(), coef(), coef(), coef(), coef(), coef());
    let mut phase = || r.gen_range(0.0f32..6.28);
    let phases: Vec<f32> = (0..9).map(|_| phase()).collect();

    let value = |c: usize, x: f32, y: f32| -> f32 {
        let s1 = (a1 * x + b1 * y + phases[c]).sin();
        let s2 = (a2 * x - b2 * y + phases[3 + c]).sin();
        // tanh-saturated stripe gives sharp edges
        let s3 = ((a3 * x + b3 * y + phases[6 + c]).sin() * 4.0).tanh();
        0.5 + 0.18 * s1 + 0.12 * s2 + 0.17 * s3
    };

    let frames = (0..spec.frames)
        .map(|t| {
            let dx = spec.velocity.0 * t as f32;
            let dy = spec.velocity.1 * t as f32;
            let mut f = Frame::from_fn(TimeIndex::from_integer(t as i64), spec.h, spec.w, |c, y, x| {
                value(c, x as f32 - dx, y as f32 - dy)
            });
            for v in f.data_mut() {
                let q = (*v * 255.0).round().clamp(0.0, 255.0);
                *v = q / 255.0;
            }
            f
        })
        .collect();
    Clip::new(frames, Some(String::from("synthetic"))).expect("generator yields a valid clip")
}

/// The two-clip toy corpus used by smoke tests: opposing motions, one
/// gentle and one larger.
pub fn toy_corpus(h: usize, w: usize, frames: usize) -> Vec<Clip> {
    alloc::vec![
        moving_pattern_clip(&SynthSpec {
            frames,
            h,
            w,
            velocity: (2.4, 1.2),
            seed: 11,
        }),
        moving_pattern_clip(&SynthSpec {
            frames,
            h,
            w,
            velocity: (-1.8, 0.9),
            seed: 23,
        }),
    ]
}
