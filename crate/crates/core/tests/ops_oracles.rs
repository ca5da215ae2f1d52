//! Operation-level oracles: every differentiable op is checked against a
//! plain-arithmetic reference and against central finite differences at
//! double precision.

use rand::Rng;
use stvu_core::autograd::Tape;
use stvu_core::gradcheck::{fd_grad, relative_error, DEFAULT_EPS};
use stvu_core::ops::{shuffle_raw, PadMode};
use stvu_core::rng;
use stvu_core::tensor::Tensor;

fn rand_tensor(shape: [usize; 4], seed: u64) -> Tensor<f64> {
    let mut r = rng::stream(seed, "test");
    Tensor::from_fn(shape, |_, _, _, _| r.gen_range(-1.0..1.0))
}

/// Direct convolution reference (stride 1, same padding).
fn conv_reference(
    x: &Tensor<f64>,
    w: &Tensor<f64>,
    b: &Tensor<f64>,
    pad: PadMode,
) -> Tensor<f64> {
    let [n, in_c, h, wd] = x.shape();
    let [out_c, _, kh, kw] = w.shape();
    let (ph, pw) = (kh as isize / 2, kw as isize / 2);
    Tensor::from_fn([n, out_c, h, wd], |ni, oc, y, xx| {
        let mut acc = b.data()[oc];
        for ic in 0..in_c {
            for ky in 0..kh {
                for kx in 0..kw {
                    let sy = y as isize + ky as isize - ph;
                    let sx = xx as isize + kx as isize - pw;
                    let v = match pad {
                        PadMode::Zero => {
                            if sy < 0 || sy >= h as isize || sx < 0 || sx >= wd as isize {
                                0.0
                            } else {
                                x.at(ni, ic, sy as usize, sx as usize)
                            }
                        }
                        PadMode::Replicate => x.at(
                            ni,
                            ic,
                            sy.clamp(0, h as isize - 1) as usize,
                            sx.clamp(0, wd as isize - 1) as usize,
                        ),
                    };
                    acc += v * w.at(oc, ic, ky, kx);
                }
            }
        }
        acc
    })
}

#[test]
fn conv2d_matches_direct_reference() {
    for (pad, seed) in [(PadMode::Zero, 1u64), (PadMode::Replicate, 2)] {
        let x = rand_tensor([2, 3, 5, 6], seed);
        let w = rand_tensor([4, 3, 3, 3], seed + 10);
        let b = rand_tensor([1, 4, 1, 1], seed + 20);
        let mut tape = Tape::new();
        let xi = tape.leaf(x.clone(), false);
        let wi = tape.leaf(w.clone(), false);
        let bi = tape.leaf(b.clone(), false);
        let y = tape.conv2d(xi, wi, Some(bi), pad).unwrap();
        let reference = conv_reference(&x, &w, &b, pad);
        assert!(
            tape.value(y).max_abs_diff(&reference) < 1e-12,
            "conv mismatch for {pad:?}"
        );
    }
}

#[test]
fn conv2d_1x1_matches_direct_reference() {
    let x = rand_tensor([2, 5, 4, 4], 3);
    let w = rand_tensor([3, 5, 1, 1], 13);
    let b = rand_tensor([1, 3, 1, 1], 23);
    let mut tape = Tape::new();
    let xi = tape.leaf(x.clone(), false);
    let wi = tape.leaf(w.clone(), false);
    let bi = tape.leaf(b.clone(), false);
    let y = tape.conv2d(xi, wi, Some(bi), PadMode::Zero).unwrap();
    let reference = conv_reference(&x, &w, &b, PadMode::Zero);
    assert!(tape.value(y).max_abs_diff(&reference) < 1e-12);
}

#[test]
fn conv2d_rejects_channel_mismatch_and_even_kernels() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Tensor::zeros([1, 3, 4, 4]), false);
    let w_bad = tape.leaf(Tensor::zeros([4, 2, 3, 3]), false);
    assert!(tape.conv2d(x, w_bad, None, PadMode::Zero).is_err());
    let w_even = tape.leaf(Tensor::zeros([4, 3, 2, 2]), false);
    assert!(tape.conv2d(x, w_even, None, PadMode::Zero).is_err());
}

/// Scalar loss for gradient checks: 0.5 * sum(y^2), smooth everywhere.
fn half_sq_sum(tape: &Tape<f64>, y: usize) -> f64 {
    tape.value(y).data().iter().map(|v| 0.5 * v * v).sum()
}

fn seed_cotangent(tape: &Tape<f64>, y: usize) -> Tensor<f64> {
    tape.value(y).clone() // d(0.5 sum y^2)/dy = y
}

#[test]
fn conv2d_gradients_match_finite_differences() {
    for pad in [PadMode::Zero, PadMode::Replicate] {
        let x0 = rand_tensor([2, 2, 4, 4], 5);
        let w0 = rand_tensor([3, 2, 3, 3], 15);
        let b0 = rand_tensor([1, 3, 1, 1], 25);
        let run = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| -> (f64, Vec<Tensor<f64>>) {
            let mut tape = Tape::new();
            let xi = tape.leaf(x.clone(), true);
            let wi = tape.leaf(w.clone(), true);
            let bi = tape.leaf(b.clone(), true);
            let y = tape.conv2d(xi, wi, Some(bi), pad).unwrap();
            let loss = half_sq_sum(&tape, y);
            let seed = seed_cotangent(&tape, y);
            let mut grads = tape.backward_seeded(y, seed);
            (
                loss,
                vec![
                    grads.take(xi).unwrap(),
                    grads.take(wi).unwrap(),
                    grads.take(bi).unwrap(),
                ],
            )
        };
        let (_, analytic) = run(&x0, &w0, &b0);
        let fd_x = fd_grad(&mut |x| run(x, &w0, &b0).0, &x0, DEFAULT_EPS);
        let fd_w = fd_grad(&mut |w| run(&x0, w, &b0).0, &w0, DEFAULT_EPS);
        let fd_b = fd_grad(&mut |b| run(&x0, &w0, b).0, &b0, DEFAULT_EPS);
        for (an, fd) in analytic.iter().zip([fd_x, fd_w, fd_b]) {
            for (a, f) in an.data().iter().zip(fd.data()) {
                assert!(
                    relative_error(*a, *f) < 1e-6 || (a - f).abs() < 1e-8,
                    "conv grad mismatch ({pad:?}): analytic {a} vs fd {f}"
                );
            }
        }
    }
}

#[test]
fn pools_match_reference_and_gradients() {
    let x0 = rand_tensor([1, 2, 6, 6], 7);
    // forward references
    let mut tape = Tape::new();
    let xi = tape.leaf(x0.clone(), true);
    let avg = tape.avg_pool2(xi);
    let max = tape.max_pool2(xi);
    for y in 0..3 {
        for x in 0..3 {
            let quad = [
                x0.at(0, 1, 2 * y, 2 * x),
                x0.at(0, 1, 2 * y, 2 * x + 1),
                x0.at(0, 1, 2 * y + 1, 2 * x),
                x0.at(0, 1, 2 * y + 1, 2 * x + 1),
            ];
            assert!((tape.value(avg).at(0, 1, y, x) - quad.iter().sum::<f64>() / 4.0).abs() < 1e-15);
            assert_eq!(
                tape.value(max).at(0, 1, y, x),
                quad.iter().cloned().fold(f64::MIN, f64::max)
            );
        }
    }
    // gradients via FD (inputs random: ties have measure zero)
    for use_max in [false, true] {
        let run = |x: &Tensor<f64>| -> (f64, Tensor<f64>) {
            let mut tape = Tape::new();
            let xi = tape.leaf(x.clone(), true);
            let y = if use_max {
                tape.max_pool2(xi)
            } else {
                tape.avg_pool2(xi)
            };
            let loss = half_sq_sum(&tape, y);
            let seed = seed_cotangent(&tape, y);
            let mut grads = tape.backward_seeded(y, seed);
            (loss, grads.take(xi).unwrap())
        };
        let (_, analytic) = run(&x0);
        let fd = fd_grad(&mut |x| run(x).0, &x0, 1e-6);
        for (a, f) in analytic.data().iter().zip(fd.data()) {
            assert!(
                relative_error(*a, *f) < 1e-5 || (a - f).abs() < 1e-7,
                "pool grad mismatch (max={use_max}): {a} vs {f}"
            );
        }
    }
}

#[test]
fn resize_preserves_constants_and_matches_fd() {
    let c = Tensor::full([1, 3, 5, 7], 0.37);
    let mut tape = Tape::new();
    let ci = tape.leaf(c, false);
    let up = tape.resize_bilinear(ci, 20, 28);
    assert!(tape.value(up).data().iter().all(|&v| v == 0.37));

    let x0 = rand_tensor([1, 2, 4, 5], 9);
    let run = |x: &Tensor<f64>| -> (f64, Tensor<f64>) {
        let mut tape = Tape::new();
        let xi = tape.leaf(x.clone(), true);
        let y = tape.resize_bilinear(xi, 9, 11);
        let loss = half_sq_sum(&tape, y);
        let seed = seed_cotangent(&tape, y);
        let mut grads = tape.backward_seeded(y, seed);
        (loss, grads.take(xi).unwrap())
    };
    let (_, analytic) = run(&x0);
    let fd = fd_grad(&mut |x| run(x).0, &x0, DEFAULT_EPS);
    for (a, f) in analytic.data().iter().zip(fd.data()) {
        assert!(relative_error(*a, *f) < 1e-6 || (a - f).abs() < 1e-8);
    }
}

#[test]
fn warp_identity_on_zero_flow_is_bit_exact() {
    let src = rand_tensor([1, 3, 6, 7], 11);
    let flow = Tensor::zeros([1, 2, 6, 7]);
    let mut tape = Tape::new();
    let si = tape.leaf(src.clone(), false);
    let fi = tape.leaf(flow, false);
    let out = tape.warp(si, fi).unwrap();
    assert_eq!(tape.value(out), &src);
}

#[test]
fn warp_integer_shift_matches_index_oracle() {
    let src = rand_tensor([1, 1, 5, 8], 12);
    let mut flow = Tensor::zeros([1, 2, 5, 8]);
    for v in flow.data_mut()[..40].iter_mut() {
        *v = 1.0; // dx = 1
    }
    let mut tape = Tape::new();
    let si = tape.leaf(src.clone(), false);
    let fi = tape.leaf(flow, false);
    let out = tape.warp(si, fi).unwrap();
    for y in 0..5 {
        for x in 0..8 {
            let expect = src.at(0, 0, y, (x + 1).min(7)); // clamped at the edge
            assert_eq!(tape.value(out).at(0, 0, y, x), expect, "at ({y},{x})");
        }
    }
}

#[test]
fn warp_half_pixel_averages_neighbors() {
    // ramp image: value = x
    let src = Tensor::from_fn([1, 1, 3, 6], |_, _, _, x| x as f64);
    let mut flow = Tensor::zeros([1, 2, 3, 6]);
    for v in flow.data_mut()[..18].iter_mut() {
        *v = 0.5;
    }
    let mut tape = Tape::new();
    let si = tape.leaf(src, false);
    let fi = tape.leaf(flow, false);
    let out = tape.warp(si, fi).unwrap();
    for y in 0..3 {
        for x in 0..4 {
            let expect = (x as f64 + (x + 1) as f64) / 2.0;
            assert!((tape.value(out).at(0, 0, y, x) - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn warp_preserves_constants_for_any_flow() {
    let src = Tensor::full([1, 2, 4, 4], 0.613);
    let flow = rand_tensor([1, 2, 4, 4], 13).map(|v| v * 7.0);
    let mut tape = Tape::new();
    let si = tape.leaf(src, false);
    let fi = tape.leaf(flow, false);
    let out = tape.warp(si, fi).unwrap();
    assert!(tape.value(out).data().iter().all(|&v| v == 0.613));
}

#[test]
fn warp_gradients_match_finite_differences() {
    let src0 = rand_tensor([1, 2, 5, 5], 14);
    // fractional flows bounded away from integers and from the borders
    let flow0 = rand_tensor([1, 2, 5, 5], 15).map(|v| 0.3 + 0.25 * v);
    let run = |s: &Tensor<f64>, f: &Tensor<f64>| -> (f64, Vec<Tensor<f64>>) {
        let mut tape = Tape::new();
        let si = tape.leaf(s.clone(), true);
        let fi = tape.leaf(f.clone(), true);
        let y = tape.warp(si, fi).unwrap();
        let loss = half_sq_sum(&tape, y);
        let seed = seed_cotangent(&tape, y);
        let mut grads = tape.backward_seeded(y, seed);
        (loss, vec![grads.take(si).unwrap(), grads.take(fi).unwrap()])
    };
    let (_, analytic) = run(&src0, &flow0);
    let fd_s = fd_grad(&mut |s| run(s, &flow0).0, &src0, 1e-6);
    let fd_f = fd_grad(&mut |f| run(&src0, f).0, &flow0, 1e-6);
    for (an, fd) in analytic.iter().zip([fd_s, fd_f]) {
        for (a, f) in an.data().iter().zip(fd.data()) {
            assert!(
                relative_error(*a, *f) < 1e-5 || (a - f).abs() < 1e-7,
                "warp grad mismatch: {a} vs {f}"
            );
        }
    }
}

#[test]
fn pixel_shuffle_matches_index_formula_on_enumeration() {
    // 1x1x16 input, r = 4: out(dy, dx) = in[dy*4 + dx]
    let x = Tensor::from_vec([1, 16, 1, 1], (0..16).map(|v| v as f64).collect());
    let y = shuffle_raw::pixel_shuffle(&x, 4).unwrap();
    assert_eq!(y.shape(), [1, 1, 4, 4]);
    for dy in 0..4 {
        for dx in 0..4 {
            assert_eq!(y.at(0, 0, dy, dx), (dy * 4 + dx) as f64);
        }
    }
}

#[test]
fn pixel_shuffle_roundtrip_and_multiset() {
    let x = rand_tensor([2, 12, 3, 5], 17);
    let y = shuffle_raw::pixel_shuffle(&x, 2).unwrap();
    assert_eq!(y.shape(), [2, 3, 6, 10]);
    let back = shuffle_raw::pixel_unshuffle(&y, 2).unwrap();
    assert_eq!(&back, &x);
    let mut a: Vec<f64> = x.data().to_vec();
    let mut b: Vec<f64> = y.data().to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    assert_eq!(a, b);
}

#[test]
fn pixel_shuffle_rejects_indivisible_channels() {
    let x = Tensor::<f64>::zeros([1, 15, 1, 1]);
    assert!(shuffle_raw::pixel_shuffle(&x, 4).is_err());
    let mut tape = Tape::new();
    let xi = tape.leaf(Tensor::<f64>::zeros([1, 15, 1, 1]), false);
    assert!(tape.pixel_shuffle(xi, 4).is_err());
}

#[test]
fn pixel_shuffle_gradient_is_inverse_permutation() {
    let x0 = rand_tensor([1, 8, 2, 3], 19);
    let run = |x: &Tensor<f64>| -> (f64, Tensor<f64>) {
        let mut tape = Tape::new();
        let xi = tape.leaf(x.clone(), true);
        let y = tape.pixel_shuffle(xi, 2).unwrap();
        let loss = half_sq_sum(&tape, y);
        let seed = seed_cotangent(&tape, y);
        let mut grads = tape.backward_seeded(y, seed);
        (loss, grads.take(xi).unwrap())
    };
    let (_, analytic) = run(&x0);
    // permutation backward must equal the input itself under 0.5*sum(y^2)
    assert!(analytic.max_abs_diff(&x0) < 1e-15);
}

#[test]
fn elementwise_and_reduction_gradients() {
    let a0 = rand_tensor([1, 3, 4, 4], 21);
    let b0 = rand_tensor([1, 3, 4, 4], 22);
    let run = |a: &Tensor<f64>, b: &Tensor<f64>| -> (f64, Vec<Tensor<f64>>) {
        let mut tape = Tape::new();
        let ai = tape.leaf(a.clone(), true);
        let bi = tape.leaf(b.clone(), true);
        // exercise lincomb, mul, sigmoid, leaky_relu, abs, mean in one graph
        let lc = tape.lincomb(ai, 1.5, bi, -0.5);
        let m = tape.mul(lc, bi);
        let s = tape.sigmoid(m);
        let l = tape.leaky_relu(s, 0.1);
        let d = tape.sub(l, ai);
        let ab = tape.abs(d);
        let y = tape.mean_all(ab);
        let loss = tape.scalar(y);
        let mut grads = tape.backward(y);
        (loss, vec![grads.take(ai).unwrap(), grads.take(bi).unwrap()])
    };
    let (_, analytic) = run(&a0, &b0);
    let fd_a = fd_grad(&mut |a| run(a, &b0).0, &a0, 1e-6);
    let fd_b = fd_grad(&mut |b| run(&a0, b).0, &b0, 1e-6);
    for (an, fd) in analytic.iter().zip([fd_a, fd_b]) {
        for (x, f) in an.data().iter().zip(fd.data()) {
            assert!(
                relative_error(*x, *f) < 1e-5 || (x - f).abs() < 1e-7,
                "elementwise grad mismatch: {x} vs {f}"
            );
        }
    }
}

#[test]
fn concat_slice_dot_broadcast_gradients() {
    let a0 = rand_tensor([2, 2, 3, 3], 31);
    let b0 = rand_tensor([2, 3, 3, 3], 32);
    let run = |a: &Tensor<f64>, b: &Tensor<f64>| -> (f64, Vec<Tensor<f64>>) {
        let mut tape = Tape::new();
        let ai = tape.leaf(a.clone(), true);
        let bi = tape.leaf(b.clone(), true);
        let cat = tape.concat_c(&[ai, bi]).unwrap();
        let left = tape.slice_c(cat, 0, 3);
        let right = tape.slice_c(cat, 2, 5);
        let dot = tape.channel_dot(left, right);
        let weighted = tape.broadcast_mul_c(dot, cat);
        let item = tape.slice_n(weighted, 1);
        let loss = half_sq_sum(&tape, item);
        let seed = seed_cotangent(&tape, item);
        let mut grads = tape.backward_seeded(item, seed);
        (loss, vec![grads.take(ai).unwrap(), grads.take(bi).unwrap()])
    };
    let (_, analytic) = run(&a0, &b0);
    let fd_a = fd_grad(&mut |a| run(a, &b0).0, &a0, 1e-6);
    let fd_b = fd_grad(&mut |b| run(&a0, b).0, &b0, 1e-6);
    for (an, fd) in analytic.iter().zip([fd_a, fd_b]) {
        for (x, f) in an.data().iter().zip(fd.data()) {
            assert!(
                relative_error(*x, *f) < 1e-5 || (x - f).abs() < 1e-7,
                "structural grad mismatch: {x} vs {f}"
            );
        }
    }
}

#[test]
fn shared_leaf_accumulates_gradients() {
    // y = x*x used twice: dy/dx must sum both paths
    let x0 = rand_tensor([1, 1, 2, 2], 41);
    let mut tape = Tape::new();
    let xi = tape.leaf(x0.clone(), true);
    let sq = tape.mul(xi, xi);
    let tw = tape.add(sq, sq);
    let y = tape.mean_all(tw);
    let mut grads = tape.backward(y);
    let g = grads.take(xi).unwrap();
    for (gv, xv) in g.data().iter().zip(x0.data()) {
        assert!((gv - 4.0 * xv / 4.0).abs() < 1e-12); // d mean(2x^2)/dx = 4x/N
    }
}
