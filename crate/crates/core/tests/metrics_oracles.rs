//! PSNR closed-form checks and a brute-force SSIM reference
//! implementation (independent per-window loops, no separability).

use rand::Rng;
use stvu_core::frame::{Frame, TimeIndex, CHANNELS};
use stvu_core::metrics::{psnr, ssim, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};
use stvu_core::rng;

fn t0() -> TimeIndex {
    TimeIndex::from_integer(0)
}

fn rand_frame(h: usize, w: usize, seed: u64) -> Frame {
    let mut r = rng::stream(seed, "mf");
    Frame::from_fn(t0(), h, w, |_, _, _| r.gen_range(0.0f32..1.0))
}

#[test]
fn identical_frames_have_infinite_psnr_and_unit_ssim() {
    let f = rand_frame(16, 16, 1);
    assert!(psnr(&f, &f).unwrap().is_infinite());
    assert_eq!(ssim(&f, &f).unwrap(), 1.0);
}

#[test]
fn psnr_closed_form_at_mse_one_hundredth() {
    // every pixel offset by 0.1: MSE = 0.01 -> 20 dB. The offset is one
    // f32 literal, so the only deviation from 20 is its quantization
    // (|0.1f32 - 1/10| ~ 1.5e-9 relative, ~1.3e-7 dB).
    let a = Frame::constant(t0(), 8, 8, 0.0);
    let b = Frame::constant(t0(), 8, 8, 0.1);
    let v = psnr(&a, &b).unwrap();
    assert!((v - 20.0).abs() < 1e-6, "got {v}");
    // and it matches the closed form of the realized MSE to 1e-9 dB
    let d = 0.1f32 as f64;
    let closed_form = -10.0 * (d * d).log10();
    assert!((v - closed_form).abs() < 1e-9, "got {v}, closed form {closed_form}");
}

#[test]
fn psnr_matches_direct_definition_and_is_symmetric() {
    let a = rand_frame(12, 10, 2);
    let b = rand_frame(12, 10, 3);
    let mse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        / a.data().len() as f64;
    let oracle = 10.0 * (1.0 / mse).log10();
    let v = psnr(&a, &b).unwrap();
    assert!((v - oracle).abs() < 1e-9);
    assert_eq!(v, psnr(&b, &a).unwrap());
}

#[test]
fn psnr_rejects_size_mismatch() {
    let a = rand_frame(8, 8, 4);
    let b = rand_frame(8, 10, 5);
    assert!(psnr(&a, &b).is_err());
    assert!(ssim(&a, &b).is_err());
}

/// Brute-force SSIM: independent 2-D window loops at every valid site.
fn ssim_reference(a: &Frame, b: &Frame) -> f64 {
    let k = SSIM_WINDOW;
    let (h, w) = (a.h(), a.w());
    let mut kernel = vec![0.0f64; k * k];
    let c = (k / 2) as f64;
    let mut sum = 0.0;
    for y in 0..k {
        for x in 0..k {
            let d2 = (y as f64 - c).powi(2) + (x as f64 - c).powi(2);
            kernel[y * k + x] = (-d2 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            sum += kernel[y * k + x];
        }
    }
    for v in &mut kernel {
        *v /= sum;
    }
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let mut total = 0.0;
    for ch in 0..CHANNELS {
        let mut acc = 0.0;
        let mut count = 0usize;
        for oy in 0..=h - k {
            for ox in 0..=w - k {
                let (mut ma, mut mb) = (0.0f64, 0.0f64);
                for y in 0..k {
                    for x in 0..k {
                        let g = kernel[y * k + x];
                        ma += g * a.at(ch, oy + y, ox + x) as f64;
                        mb += g * b.at(ch, oy + y, ox + x) as f64;
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0f64, 0.0f64, 0.0f64);
                for y in 0..k {
                    for x in 0..k {
                        let g = kernel[y * k + x];
                        let pa = a.at(ch, oy + y, ox + x) as f64;
                        let pb = b.at(ch, oy + y, ox + x) as f64;
                        va += g * pa * pa;
                        vb += g * pb * pb;
                        cov += g * pa * pb;
                    }
                }
                va -= ma * ma;
                vb -= mb * mb;
                cov -= ma * mb;
                let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
                let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
                acc += num / den;
                count += 1;
            }
        }
        total += acc / count as f64;
    }
    total / CHANNELS as f64
}

#[test]
fn ssim_matches_brute_force_reference_on_16x16() {
    for seed in [6u64, 7, 8] {
        let a = rand_frame(16, 16, seed);
        let b = rand_frame(16, 16, seed + 100);
        let fast = ssim(&a, &b).unwrap();
        let slow = ssim_reference(&a, &b);
        assert!(
            (fast - slow).abs() < 1e-6,
            "ssim {fast} vs reference {slow} (seed {seed})"
        );
    }
}

#[test]
fn ssim_binary_complement_matches_reference() {
    // binary texture against its complement
    let a = Frame::from_fn(t0(), 16, 16, |_, y, x| ((y / 2 + x / 3) % 2) as f32);
    let b = Frame::from_fn(t0(), 16, 16, |c, y, x| 1.0 - a.at(c, y, x));
    let fast = ssim(&a, &b).unwrap();
    let slow = ssim_reference(&a, &b);
    assert!((fast - slow).abs() < 1e-6);
    assert!(fast < 0.0, "anti-correlated structure scores negative, got {fast}");
}

#[test]
fn dc_offset_lowers_ssim_per_reference() {
    let a = rand_frame(16, 16, 9);
    let b = Frame::from_fn(t0(), 16, 16, |c, y, x| a.at(c, y, x) + 0.1);
    let v = ssim(&a, &b).unwrap();
    let slow = ssim_reference(&a, &b);
    assert!((v - slow).abs() < 1e-6);
    assert!(v < 1.0, "luminance term must lower SSIM, got {v}");
}

#[test]
fn ssim_invariant_to_simultaneous_channel_permutation() {
    let a = rand_frame(16, 16, 10);
    let b = rand_frame(16, 16, 11);
    let permute = |f: &Frame| {
        Frame::from_fn(f.time_index, f.h(), f.w(), |c, y, x| f.at((c + 1) % 3, y, x))
    };
    let base = ssim(&a, &b).unwrap();
    let perm = ssim(&permute(&a), &permute(&b)).unwrap();
    assert!((base - perm).abs() < 1e-12);
}

#[test]
fn ssim_needs_at_least_the_window() {
    let a = rand_frame(10, 10, 12);
    assert!(ssim(&a, &a).is_err());
}
