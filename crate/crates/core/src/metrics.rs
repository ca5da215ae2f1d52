//! PSNR and single-scale SSIM on [0,1] RGB frames, accumulated in f64.

use alloc::format;
use alloc::vec::Vec;

use crate::frame::{Frame, CHANNELS};
use crate::ops::ShapeError;
#[allow(unused_imports)]
use num_traits::Float;

/// 11x11 Gaussian window, sigma 1.5 (the standard SSIM window).
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_same_size(a: &Frame, b: &Frame) -> Result<(), ShapeError> {
    if a.h() != b.h() || a.w() != b.w() {
        return Err(ShapeError(format!(
            "metric on {}x{} vs {}x{}",
            a.w(),
            a.h(),
            b.w(),
            b.h()
        )));
    }
    Ok(())
}

/// 10*log10(1/MSE) with MSE over all pixels and channels; identical
/// frames give +inf.
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64, ShapeError> {
    check_same_size(a, b)?;
    let sum_sq: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    let mse = sum_sq / a.data().len() as f64;
    if mse == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(-10.0 * mse.log10())
    }
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Separable valid-mode Gaussian filtering of an (h, w) f64 plane.
fn filter_valid(src: &[f64], h: usize, w: usize) -> Vec<f64> {
    let win = gaussian_window();
    let k = SSIM_WINDOW;
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut tmp = alloc::vec![0.0f64; h * ow];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (m, &g) in win.iter().enumerate() {
                acc += g * src[y * w + x + m];
            }
            tmp[y * ow + x] = acc;
        }
    }
    let mut out = alloc::vec![0.0f64; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (m, &g) in win.iter().enumerate() {
                acc += g * tmp[(y + m) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Mean local SSIM over valid windows, averaged across channels.
/// Dynamic range is 1.0.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64, ShapeError> {
    check_same_size(a, b)?;
    let (h, w) = (a.h(), a.w());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(ShapeError(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} frames, got {w}x{h}"
        )));
    }
    let c1 = (SSIM_K1 * 1.0) * (SSIM_K1 * 1.0);
    let c2 = (SSIM_K2 * 1.0) * (SSIM_K2 * 1.0);
    let plane = h * w;
    let mut total = 0.0;
    for c in 0..CHANNELS {
        let pa: Vec<f64> = a.data()[c * plane..(c + 1) * plane]
            .iter()
            .map(|&v| v as f64)
            .collect();
        let pb: Vec<f64> = b.data()[c * plane..(c + 1) * plane]
            .iter()
            .map(|&v| v as f64)
            .collect();
        let aa: Vec<f64> = pa.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = pb.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let mu_a = filter_valid(&pa, h, w);
        let mu_b = filter_valid(&pb, h, w);
        let e_aa = filter_valid(&aa, h, w);
        let e_bb = filter_valid(&bb, h, w);
        let e_ab = filter_valid(&ab, h, w);
        let mut acc = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            acc += num / den;
        }
        total += acc / mu_a.len() as f64;
    }
    Ok(total / CHANNELS as f64)
}
