//! Degradation oracle (brute-force 2-D convolution) plus linearity and
//! augmentation-consistency properties.

use rand::Rng;
use stvu_core::augment::{augment, AugmentOps, Rotation};
use stvu_core::config::DegradePhase;
use stvu_core::degrade::{degrade, kernel_taps, reflect_symmetric};
use stvu_core::frame::{Frame, TimeIndex};
use stvu_core::rng;
use stvu_core::sample::{Intermediate, TrainingSample};

fn t0() -> TimeIndex {
    TimeIndex::from_integer(0)
}

fn rand_frame(h: usize, w: usize, seed: u64) -> Frame {
    let mut r = rng::stream(seed, "frame");
    Frame::from_fn(t0(), h, w, |_, _, _| r.gen_range(0.0f32..1.0))
}

/// Brute-force oracle: full 2-D kernel (outer product of the 1-D taps)
/// evaluated independently at every output site.
fn degrade_oracle(hr: &Frame, r: usize, sigma: f64, phase: DegradePhase) -> Frame {
    let (start, taps) = kernel_taps(r, sigma, phase);
    let (h, w) = (hr.h(), hr.w());
    let (lh, lw) = (h / r, w / r);
    Frame::from_fn(t0(), lh, lw, |c, i, j| {
        let mut acc = 0.0f64;
        for (my, &wy) in taps.iter().enumerate() {
            for (mx, &wx) in taps.iter().enumerate() {
                let y = reflect_symmetric((r * i) as isize + start + my as isize, h);
                let x = reflect_symmetric((r * j) as isize + start + mx as isize, w);
                acc += wy * wx * hr.at(c, y, x) as f64;
            }
        }
        acc as f32
    })
}

#[test]
fn constant_frame_stays_constant() {
    let hr = Frame::constant(t0(), 16, 16, 0.5);
    let lr = degrade(&hr, 4, 1.5, DegradePhase::Center).unwrap();
    assert_eq!(lr.h(), 4);
    assert_eq!(lr.w(), 4);
    for &v in lr.data() {
        assert!((v - 0.5).abs() < 1e-6, "constant broken: {v}");
    }
}

#[test]
fn checkerboard_matches_brute_force_oracle() {
    // 8x8 checkerboard tiles over a 32x32 frame, r = 4, sigma = 1.5
    let hr = Frame::from_fn(t0(), 32, 32, |_, y, x| {
        if ((y / 8) + (x / 8)) % 2 == 0 {
            1.0
        } else {
            0.0
        }
    });
    for phase in [DegradePhase::Center, DegradePhase::TopLeft] {
        let lr = degrade(&hr, 4, 1.5, phase).unwrap();
        let oracle = degrade_oracle(&hr, 4, 1.5, phase);
        for (a, b) in lr.data().iter().zip(oracle.data()) {
            assert!((a - b).abs() < 1e-6, "oracle mismatch {a} vs {b} ({phase:?})");
        }
    }
}

#[test]
fn random_frames_match_brute_force_oracle() {
    let hr = rand_frame(24, 16, 42);
    for (r, sigma) in [(2usize, 0.8f64), (4, 1.5)] {
        for phase in [DegradePhase::Center, DegradePhase::TopLeft] {
            let lr = degrade(&hr, r, sigma, phase).unwrap();
            let oracle = degrade_oracle(&hr, r, sigma, phase);
            for (a, b) in lr.data().iter().zip(oracle.data()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn indivisible_size_is_rejected() {
    let hr = Frame::constant(t0(), 10, 12, 0.1);
    let err = degrade(&hr, 4, 1.5, DegradePhase::Center).unwrap_err();
    assert_eq!((err.h, err.w, err.r), (10, 12, 4));
}

#[test]
fn degrade_is_linear() {
    let f1 = rand_frame(16, 16, 1);
    let f2 = rand_frame(16, 16, 2);
    let (a, b) = (0.3f32, 0.6f32);
    let mix = Frame::from_fn(t0(), 16, 16, |c, y, x| a * f1.at(c, y, x) + b * f2.at(c, y, x));
    let d_mix = degrade(&mix, 4, 1.5, DegradePhase::Center).unwrap();
    let d1 = degrade(&f1, 4, 1.5, DegradePhase::Center).unwrap();
    let d2 = degrade(&f2, 4, 1.5, DegradePhase::Center).unwrap();
    for i in 0..d_mix.data().len() {
        let expect = a * d1.data()[i] + b * d2.data()[i];
        assert!((d_mix.data()[i] - expect).abs() < 1e-6);
    }
}

fn flip_lr(f: &Frame) -> Frame {
    Frame::from_fn(f.time_index, f.h(), f.w(), |c, y, x| f.at(c, y, f.w() - 1 - x))
}

fn rot180(f: &Frame) -> Frame {
    Frame::from_fn(f.time_index, f.h(), f.w(), |c, y, x| {
        f.at(c, f.h() - 1 - y, f.w() - 1 - x)
    })
}

fn rot90(f: &Frame) -> Frame {
    Frame::from_fn(f.time_index, f.w(), f.h(), |c, y, x| {
        f.at(c, f.w() - 1 - x, y)
    })
}

#[test]
fn center_phase_commutes_with_flips_and_rotations() {
    let hr = rand_frame(32, 32, 9);
    let d = |f: &Frame| degrade(f, 4, 1.5, DegradePhase::Center).unwrap();
    for (name, op) in [
        ("flip", flip_lr as fn(&Frame) -> Frame),
        ("rot180", rot180),
        ("rot90", rot90),
    ] {
        let a = d(&op(&hr));
        let b = op(&d(&hr));
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-6, "{name} does not commute: {x} vs {y}");
        }
    }
}

fn toy_sample() -> TrainingSample {
    let inputs = (0..7)
        .map(|k| {
            let mut f = rand_frame(4, 4, 100 + k);
            f.time_index = TimeIndex::from_integer(k as i64);
            f
        })
        .collect();
    TrainingSample {
        lr_inputs: inputs,
        hr_center: rand_frame(16, 16, 200),
        intermediates: vec![Intermediate {
            t_in: TimeIndex::new(1, 4),
            hr: rand_frame(16, 16, 300),
            lr: rand_frame(4, 4, 301),
        }],
    }
}

#[test]
fn flip_twice_is_identity() {
    let s = toy_sample();
    let ops = AugmentOps {
        flip_lr: true,
        rotation: Rotation::None,
        reverse_time: false,
    };
    let once = augment(&s, &ops).unwrap();
    let twice = augment(&once, &ops).unwrap();
    assert_eq!(s, twice);
}

#[test]
fn reversal_remaps_t_in() {
    let s = toy_sample();
    let ops = AugmentOps {
        flip_lr: false,
        rotation: Rotation::None,
        reverse_time: true,
    };
    let rev = augment(&s, &ops).unwrap();
    assert_eq!(rev.intermediates[0].t_in, TimeIndex::new(3, 4));
    // inputs reversed, times mirrored and still ascending
    assert_eq!(rev.lr_inputs[0].data(), s.lr_inputs[6].data());
    for w in rev.lr_inputs.windows(2) {
        assert!(w[0].time_index < w[1].time_index);
    }
}

#[test]
fn quarter_rotation_on_non_square_is_an_error() {
    let mut s = toy_sample();
    s.hr_center = rand_frame(16, 8, 400);
    s.lr_inputs = s
        .lr_inputs
        .iter()
        .map(|f| {
            let mut g = rand_frame(4, 2, 500);
            g.time_index = f.time_index;
            g
        })
        .collect();
    s.intermediates.clear();
    let ops = AugmentOps {
        flip_lr: false,
        rotation: Rotation::Quarter,
        reverse_time: false,
    };
    assert!(augment(&s, &ops).is_err());
}

#[test]
fn augmentation_commutes_with_degradation() {
    // degrade(augment_hr) == augment(degrade_hr) for flips and rotations
    let hr = rand_frame(32, 32, 77);
    let ops = AugmentOps {
        flip_lr: true,
        rotation: Rotation::Quarter,
        reverse_time: false,
    };
    let s_hr = TrainingSample {
        lr_inputs: vec![],
        hr_center: hr.clone(),
        intermediates: vec![],
    };
    let aug_hr = augment(&s_hr, &ops).unwrap().hr_center;
    let deg_then_aug = {
        let lr = degrade(&hr, 4, 1.5, DegradePhase::Center).unwrap();
        let s_lr = TrainingSample {
            lr_inputs: vec![],
            hr_center: lr,
            intermediates: vec![],
        };
        augment(&s_lr, &ops).unwrap().hr_center
    };
    let aug_then_deg = degrade(&aug_hr, 4, 1.5, DegradePhase::Center).unwrap();
    for (a, b) in aug_then_deg.data().iter().zip(deg_then_aug.data()) {
        assert!((a - b).abs() < 1e-6);
    }
}
