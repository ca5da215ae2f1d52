//! Differentiable tensor operations, implemented as methods on
//! [`crate::autograd::Tape`].

mod conv;
mod elem;
mod pool;
mod resize;
mod shuffle;
mod warp;

pub use conv::PadMode;
pub use shuffle::raw as shuffle_raw;

use alloc::string::String;

/// Shape violation detected while assembling a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeError(pub String);

impl core::fmt::Display for ShapeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "shape error: {}", self.0)
    }
}

impl core::error::Error for ShapeError {}

macro_rules! shape_bail {
    ($($arg:tt)*) => {
        return Err($crate::ops::ShapeError(alloc::format!($($arg)*)))
    };
}
pub(crate) use shape_bail;
