//! Frames, clips and flow fields — the value types every stage exchanges.
//!
//! Pixels are real-valued in [0,1] internally (clamping to 8-bit happens
//! only at file boundaries, in the companion crate). Time indices are
//! rationals so intermediate positions like 7/2 compare exactly.

use alloc::string::String;
use alloc::vec::Vec;

use num_rational::Ratio;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Rational time index. Integer for input frames, e.g. 7/2 for the frame
/// halfway between inputs 3 and 4.
pub type TimeIndex = Ratio<i64>;

/// Number of color channels; processing is RGB throughout.
pub const CHANNELS: usize = 3;

/// One RGB frame, planar channel-major storage (c, y, x).
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub time_index: TimeIndex,
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn new(time_index: TimeIndex, h: usize, w: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), CHANNELS * h * w, "frame buffer length mismatch");
        Frame {
            time_index,
            h,
            w,
            data,
        }
    }

    pub fn constant(time_index: TimeIndex, h: usize, w: usize, value: f32) -> Self {
        Frame::new(time_index, h, w, alloc::vec![value; CHANNELS * h * w])
    }

    pub fn from_fn(
        time_index: TimeIndex,
        h: usize,
        w: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(CHANNELS * h * w);
        for c in 0..CHANNELS {
            for y in 0..h {
                for x in 0..w {
                    data.push(f(c, y, x));
                }
            }
        }
        Frame::new(time_index, h, w, data)
    }

    #[inline]
    pub fn h(&self) -> usize {
        self.h
    }
    #[inline]
    pub fn w(&self) -> usize {
        self.w
    }
    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }
    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }
    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.h + y) * self.w + x]
    }
    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.h + y) * self.w + x] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// View as a [1, 3, H, W] tensor of the requested scalar type.
    pub fn to_tensor<S: Scalar>(&self) -> Tensor<S> {
        Tensor::from_vec(
            [1, CHANNELS, self.h, self.w],
            self.data.iter().map(|&v| S::scalar_from_f64(v as f64)).collect(),
        )
    }

    /// Take the n-th batch item of a [N, 3, H, W] tensor as a frame.
    pub fn from_tensor<S: Scalar>(t: &Tensor<S>, n: usize, time_index: TimeIndex) -> Frame {
        let [_, c, h, w] = t.shape();
        assert_eq!(c, CHANNELS, "expected a 3-channel tensor");
        let plane = c * h * w;
        let data = t.data()[n * plane..(n + 1) * plane]
            .iter()
            .map(|&v| v.to_f64_() as f32)
            .collect();
        Frame::new(time_index, h, w, data)
    }
}

/// Error constructing a clip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClipError {
    NonIncreasingTime { position: usize },
    MixedSizes { position: usize },
    Empty,
}

impl core::fmt::Display for ClipError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ClipError::NonIncreasingTime { position } => {
                write!(f, "clip time indices not strictly increasing at frame {position}")
            }
            ClipError::MixedSizes { position } => {
                write!(f, "clip frame {position} differs in size from frame 0")
            }
            ClipError::Empty => write!(f, "clip has no frames"),
        }
    }
}

impl core::error::Error for ClipError {}

/// An ordered frame sequence with uniform size and strictly increasing
/// time indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub frames: Vec<Frame>,
    pub fps_label: Option<String>,
}

impl Clip {
    pub fn new(frames: Vec<Frame>, fps_label: Option<String>) -> Result<Self, ClipError> {
        if frames.is_empty() {
            return Err(ClipError::Empty);
        }
        let (h, w) = (frames[0].h(), frames[0].w());
        for (i, fr) in frames.iter().enumerate().skip(1) {
            if fr.time_index <= frames[i - 1].time_index {
                return Err(ClipError::NonIncreasingTime { position: i });
            }
            if fr.h() != h || fr.w() != w {
                return Err(ClipError::MixedSizes { position: i });
            }
        }
        Ok(Clip { frames, fps_label })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn h(&self) -> usize {
        self.frames[0].h()
    }

    pub fn w(&self) -> usize {
        self.frames[0].w()
    }
}

/// Dense displacement field between two frames at LR resolution.
/// Planar storage: dx plane then dy plane, displacements in pixels
/// (+x right, +y down).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub src_time: TimeIndex,
    pub dst_time: TimeIndex,
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl FlowField {
    pub fn new(src_time: TimeIndex, dst_time: TimeIndex, h: usize, w: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), 2 * h * w, "flow buffer length mismatch");
        FlowField {
            src_time,
            dst_time,
            h,
            w,
            data,
        }
    }

    pub fn zeros(src_time: TimeIndex, dst_time: TimeIndex, h: usize, w: usize) -> Self {
        FlowField::new(src_time, dst_time, h, w, alloc::vec![0.0; 2 * h * w])
    }

    pub fn constant(src_time: TimeIndex, dst_time: TimeIndex, h: usize, w: usize, dx: f32, dy: f32) -> Self {
        let mut data = alloc::vec![dx; 2 * h * w];
        data[h * w..].fill(dy);
        FlowField::new(src_time, dst_time, h, w, data)
    }

    #[inline]
    pub fn h(&self) -> usize {
        self.h
    }
    #[inline]
    pub fn w(&self) -> usize {
        self.w
    }
    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }
    #[inline]
    pub fn dx(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.w + x]
    }
    #[inline]
    pub fn dy(&self, y: usize, x: usize) -> f32 {
        self.data[self.h * self.w + y * self.w + x]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_tensor<S: Scalar>(&self) -> Tensor<S> {
        Tensor::from_vec(
            [1, 2, self.h, self.w],
            self.data.iter().map(|&v| S::scalar_from_f64(v as f64)).collect(),
        )
    }

    pub fn from_tensor<S: Scalar>(t: &Tensor<S>, n: usize, src_time: TimeIndex, dst_time: TimeIndex) -> Self {
        let [_, c, h, w] = t.shape();
        assert_eq!(c, 2, "expected a 2-channel tensor");
        let plane = c * h * w;
        let data = t.data()[n * plane..(n + 1) * plane]
            .iter()
            .map(|&v| v.to_f64_() as f32)
            .collect();
        FlowField::new(src_time, dst_time, h, w, data)
    }
}
