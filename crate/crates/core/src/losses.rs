//! Frame-level loss functions (the graph versions used for backprop live
//! on the tape; these are the plain-arithmetic counterparts used for
//! reporting, evaluation and as test oracles).
//!
//! All L1 terms reduce by per-pixel mean so magnitudes are patch-size
//! invariant; multi-frame losses sum the per-frame means over T.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::frame::{Frame, TimeIndex};
use crate::ops::ShapeError;
#[allow(unused_imports)]
use num_traits::Float;

/// Mismatched T_in sets between predictions and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchError(pub String);

impl core::fmt::Display for MismatchError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "mismatch: {}", self.0)
    }
}

impl core::error::Error for MismatchError {}

/// Mean absolute error over pixels and channels.
pub fn loss_spatial(pred: &Frame, gt: &Frame) -> Result<f64, ShapeError> {
    if pred.h() != gt.h() || pred.w() != gt.w() {
        return Err(ShapeError(format!(
            "loss on {}x{} vs {}x{}",
            pred.w(),
            pred.h(),
            gt.w(),
            gt.h()
        )));
    }
    let sum: f64 = pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum();
    Ok(sum / pred.data().len() as f64)
}

/// Sum over matched T_in of per-frame mean absolute error.
pub fn loss_interp(
    preds: &[(TimeIndex, Frame)],
    gts: &[(TimeIndex, Frame)],
) -> Result<f64, MismatchError> {
    if preds.len() != gts.len() {
        return Err(MismatchError(format!(
            "{} predictions vs {} ground-truth frames",
            preds.len(),
            gts.len()
        )));
    }
    let mut sorted_preds: Vec<&(TimeIndex, Frame)> = preds.iter().collect();
    let mut sorted_gts: Vec<&(TimeIndex, Frame)> = gts.iter().collect();
    sorted_preds.sort_by_key(|p| p.0);
    sorted_gts.sort_by_key(|p| p.0);
    let mut total = 0.0;
    for (p, g) in sorted_preds.iter().zip(&sorted_gts) {
        if p.0 != g.0 {
            return Err(MismatchError(format!(
                "prediction at T_in={} has no ground truth (nearest is {})",
                p.0, g.0
            )));
        }
        total += loss_spatial(&p.1, &g.1)
            .map_err(|e| MismatchError(format!("at T_in={}: {e}", p.0)))?;
    }
    Ok(total)
}

/// Sum over T of mean absolute error between LR blends and LR ground
/// truth, matched by list position.
pub fn motion_loss(blends: &[Frame], gts: &[Frame]) -> Result<f64, ShapeError> {
    if blends.len() != gts.len() {
        return Err(ShapeError(format!(
            "{} blends vs {} ground-truth frames",
            blends.len(),
            gts.len()
        )));
    }
    let mut total = 0.0;
    for (b, g) in blends.iter().zip(gts) {
        total += loss_spatial(b, g)?;
    }
    Ok(total)
}

/// Helper for owned pair lists.
pub fn l1_mean_f64(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum();
    sum / a.len() as f64
}

/// String form used in CSV output (infinite values serialize as "inf").
pub fn format_metric(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v}")
    }
}
