//! Flow scaling identities, warped-feature interpolation oracles, the
//! motion loss, and the built-in estimators.

use rand::Rng;
use stvu_core::autograd::Tape;
use stvu_core::flow::{
    blend_lr, interpolate_features, motion_loss, scale_flows, scale_flows_graph, warp_average,
    FlowEstimator, PyramidFlow, ZeroFlow,
};
use stvu_core::frame::{FlowField, Frame, TimeIndex};
use stvu_core::losses;
use stvu_core::nn::ParamBuilder;
use stvu_core::rng;
use stvu_core::tensor::Tensor;

fn ti(n: i64, d: i64) -> TimeIndex {
    TimeIndex::new(n, d)
}

fn rand_flow(h: usize, w: usize, seed: u64, scale: f32) -> FlowField {
    let mut r = rng::stream(seed, "flow");
    let data = (0..2 * h * w).map(|_| r.gen_range(-scale..scale)).collect();
    FlowField::new(ti(3, 1), ti(4, 1), h, w, data)
}

#[test]
fn endpoint_identities_are_exact_for_100_random_pairs() {
    let start = std::time::Instant::now();
    for k in 0..100u64 {
        let f34 = rand_flow(6, 5, 2 * k, 8.0);
        let mut f43 = rand_flow(6, 5, 2 * k + 1, 8.0);
        f43.src_time = ti(4, 1);
        f43.dst_time = ti(3, 1);
        let (t3, t4) = scale_flows(&f34, &f43, ti(0, 1)).unwrap();
        assert!(t3.data().iter().all(|&v| v == 0.0), "f_T3 must vanish at T=0");
        assert_eq!(t4.data(), f34.data(), "f_T4 must equal f34 at T=0");
        let (t3, t4) = scale_flows(&f34, &f43, ti(1, 1)).unwrap();
        assert_eq!(t3.data(), f43.data(), "f_T3 must equal f43 at T=1");
        assert!(t4.data().iter().all(|&v| v == 0.0), "f_T4 must vanish at T=1");
    }
    assert!(
        start.elapsed().as_secs_f64() < 1.0,
        "endpoint suite must run in under a second"
    );
}

#[test]
fn midpoint_on_constant_flows_is_exact() {
    let f34 = FlowField::constant(ti(3, 1), ti(4, 1), 4, 4, 4.0, 0.0);
    let f43 = FlowField::constant(ti(4, 1), ti(3, 1), 4, 4, -4.0, 0.0);
    let (t3, t4) = scale_flows(&f34, &f43, ti(1, 2)).unwrap();
    for y in 0..4 {
        for x in 0..4 {
            assert_eq!((t3.dx(y, x), t3.dy(y, x)), (-2.0, 0.0));
            assert_eq!((t4.dx(y, x), t4.dy(y, x)), (2.0, 0.0));
        }
    }
    // absolute times carried through
    assert_eq!(t3.src_time, ti(7, 2));
    assert_eq!(t3.dst_time, ti(3, 1));
    assert_eq!(t4.dst_time, ti(4, 1));
}

#[test]
fn out_of_range_t_is_a_domain_error() {
    let f34 = rand_flow(3, 3, 1, 2.0);
    let f43 = rand_flow(3, 3, 2, 2.0);
    assert!(scale_flows(&f34, &f43, ti(-1, 4)).is_err());
    assert!(scale_flows(&f34, &f43, ti(5, 4)).is_err());
}

#[test]
fn scale_flows_is_linear_in_both_flows() {
    let a34 = rand_flow(4, 4, 3, 3.0);
    let a43 = rand_flow(4, 4, 4, 3.0);
    let b34 = rand_flow(4, 4, 5, 3.0);
    let b43 = rand_flow(4, 4, 6, 3.0);
    let sum34 = FlowField::new(
        a34.src_time,
        a34.dst_time,
        4,
        4,
        a34.data().iter().zip(b34.data()).map(|(x, y)| x + y).collect(),
    );
    let sum43 = FlowField::new(
        a43.src_time,
        a43.dst_time,
        4,
        4,
        a43.data().iter().zip(b43.data()).map(|(x, y)| x + y).collect(),
    );
    let t = ti(1, 3);
    let (sa3, sa4) = scale_flows(&a34, &a43, t).unwrap();
    let (sb3, sb4) = scale_flows(&b34, &b43, t).unwrap();
    let (ss3, ss4) = scale_flows(&sum34, &sum43, t).unwrap();
    for i in 0..ss3.data().len() {
        assert!((ss3.data()[i] - (sa3.data()[i] + sb3.data()[i])).abs() < 1e-5);
        assert!((ss4.data()[i] - (sa4.data()[i] + sb4.data()[i])).abs() < 1e-5);
    }
}

#[test]
fn graph_scaling_matches_plain_scaling() {
    let f34 = rand_flow(5, 4, 7, 4.0);
    let f43 = rand_flow(5, 4, 8, 4.0);
    let t = ti(2, 5);
    let (p3, p4) = scale_flows(&f34, &f43, t).unwrap();
    let mut tape = Tape::<f64>::new();
    let a = tape.leaf(f34.to_tensor(), false);
    let b = tape.leaf(f43.to_tensor(), false);
    let (g3, g4) = scale_flows_graph(&mut tape, a, b, t).unwrap();
    assert!(tape.value(g3).max_abs_diff(&p3.to_tensor::<f64>()) < 1e-6);
    assert!(tape.value(g4).max_abs_diff(&p4.to_tensor::<f64>()) < 1e-6);
}

#[test]
fn interpolate_features_endpoint_and_constant_cases() {
    let mut r = rng::stream(9, "feat");
    let e3: Tensor<f64> = Tensor::from_fn([1, 4, 5, 5], |_, _, _, _| r.gen_range(-1.0..1.0));
    let e4: Tensor<f64> = Tensor::from_fn([1, 4, 5, 5], |_, _, _, _| r.gen_range(-1.0..1.0));
    let f34: Tensor<f64> = Tensor::from_fn([1, 2, 5, 5], |_, _, _, _| r.gen_range(-1.5..1.5));
    let f43: Tensor<f64> = Tensor::from_fn([1, 2, 5, 5], |_, _, _, _| r.gen_range(-1.5..1.5));

    // T = 0: f_T3 = 0, f_T4 = f34 -> m = (e3 + warp(e4, f34)) / 2
    let mut tape = Tape::new();
    let (e3i, e4i) = (tape.leaf(e3.clone(), false), tape.leaf(e4.clone(), false));
    let (f34i, f43i) = (tape.leaf(f34.clone(), false), tape.leaf(f43.clone(), false));
    let (t3, t4) = scale_flows_graph(&mut tape, f34i, f43i, ti(0, 1)).unwrap();
    let m = interpolate_features(&mut tape, &[e3i], &[e4i], t3, t4).unwrap()[0];
    let w4 = tape.warp(e4i, f34i).unwrap();
    let expect = tape.lincomb(e3i, 0.5, w4, 0.5);
    assert!(tape.value(m).max_abs_diff(tape.value(expect)) < 1e-12);

    // constant features survive any flow
    let c3 = tape.leaf(Tensor::full([1, 4, 5, 5], 0.77), false);
    let c4 = tape.leaf(Tensor::full([1, 4, 5, 5], 0.77), false);
    let (t3, t4) = scale_flows_graph(&mut tape, f34i, f43i, ti(1, 3)).unwrap();
    let mc = interpolate_features(&mut tape, &[c3], &[c4], t3, t4).unwrap()[0];
    assert!(tape.value(mc).data().iter().all(|&v| v == 0.77));

    // random case equals two-warp-and-average oracle
    let m2 = interpolate_features(&mut tape, &[e3i], &[e4i], t3, t4).unwrap()[0];
    let oracle = warp_average(&mut tape, e3i, e4i, t3, t4).unwrap();
    assert_eq!(tape.value(m2), tape.value(oracle));
}

#[test]
fn blend_lr_identities() {
    let mut tape = Tape::<f64>::new();
    let c = tape.leaf(Tensor::full([1, 3, 4, 4], 0.25), false);
    let mut r = rng::stream(10, "blend");
    let f: Tensor<f64> = Tensor::from_fn([1, 2, 4, 4], |_, _, _, _| r.gen_range(-2.0..2.0));
    let (fa, fb) = (tape.leaf(f.clone(), false), tape.leaf(f, false));
    // x3 = x4 = constant -> same constant
    let b = blend_lr(&mut tape, c, c, fa, fb).unwrap();
    assert!(tape.value(b).data().iter().all(|&v| v == 0.25));
    // zero flows -> plain average
    let x3 = tape.leaf(Tensor::from_fn([1, 3, 4, 4], |_, _, y, x| (y + x) as f64 * 0.05), false);
    let x4 = tape.leaf(Tensor::from_fn([1, 3, 4, 4], |_, _, y, x| (y * x) as f64 * 0.05), false);
    let z = tape.leaf(Tensor::zeros([1, 2, 4, 4]), false);
    let blend = blend_lr(&mut tape, x3, x4, z, z).unwrap();
    let avg = tape.lincomb(x3, 0.5, x4, 0.5);
    assert_eq!(tape.value(blend), tape.value(avg));
}

#[test]
fn motion_loss_values() {
    let t = TimeIndex::from_integer(0);
    let gt = Frame::constant(t, 4, 4, 0.5);
    // blend == gt -> 0
    assert_eq!(losses::motion_loss(&[gt.clone()], &[gt.clone()]).unwrap(), 0.0);
    // constant offset 0.1 -> 0.1
    let off = Frame::constant(t, 4, 4, 0.6);
    let l = losses::motion_loss(&[off.clone()], &[gt.clone()]).unwrap();
    assert!((l - 0.1).abs() < 1e-6);
    // offsets 0.1 and 0.2 over two positions -> 0.3
    let off2 = Frame::constant(t, 4, 4, 0.7);
    let l2 = losses::motion_loss(&[off, off2], &[gt.clone(), gt]).unwrap();
    assert!((l2 - 0.3).abs() < 1e-6);
}

#[test]
fn motion_loss_graph_matches_plain() {
    let mut r = rng::stream(11, "ml");
    let a: Tensor<f64> = Tensor::from_fn([1, 3, 4, 4], |_, _, _, _| r.gen_range(0.0..1.0));
    let b: Tensor<f64> = Tensor::from_fn([1, 3, 4, 4], |_, _, _, _| r.gen_range(0.0..1.0));
    let mut tape = Tape::new();
    let (ai, bi) = (tape.leaf(a.clone(), false), tape.leaf(b.clone(), false));
    let l = motion_loss(&mut tape, &[ai], &[bi]).unwrap();
    let fa = Frame::from_tensor(&a, 0, TimeIndex::from_integer(0));
    let fb = Frame::from_tensor(&b, 0, TimeIndex::from_integer(0));
    let plain = losses::motion_loss(&[fa], &[fb]).unwrap();
    assert!((tape.scalar(l) - plain).abs() < 1e-9);
}

#[test]
fn zero_estimator_returns_zero_fields() {
    let a = Frame::constant(TimeIndex::from_integer(0), 6, 8, 0.3);
    let b = Frame::constant(TimeIndex::from_integer(1), 6, 8, 0.4);
    let est = ZeroFlow;
    let f = est.estimate(&a, &b);
    assert_eq!((f.h(), f.w()), (6, 8));
    assert!(f.data().iter().all(|&v| v == 0.0));
    assert!(!est.trainable());
}

#[test]
fn pyramid_flow_starts_at_zero_and_has_lr_shape() {
    let mut pb = ParamBuilder::new();
    let mut r = rng::stream(0, "init");
    let net: PyramidFlow<f64> = PyramidFlow::new(&mut pb, &mut r);
    let params: Vec<&stvu_core::nn::Param<f64>> = {
        let mut v = Vec::new();
        net.visit(&mut v);
        v
    };
    let mut tape = Tape::new();
    let bind = stvu_core::nn::Binding::bind(&mut tape, &params, false);
    let mut rr = rng::stream(13, "pf");
    let a = tape.leaf(Tensor::from_fn([1, 3, 8, 8], |_, _, _, _| rr.gen_range(0.0..1.0)), false);
    let b = tape.leaf(Tensor::from_fn([1, 3, 8, 8], |_, _, _, _| rr.gen_range(0.0..1.0)), false);
    let f = net.estimate(&mut tape, &bind, a, b).unwrap();
    let v = tape.value(f);
    assert_eq!(v.shape(), [1, 2, 8, 8]);
    // refinement heads start zeroed, so the initial flow is exactly zero
    assert!(v.data().iter().all(|&x| x == 0.0));
    assert_eq!(
        params.iter().map(|p| p.value.len() as u64).sum::<u64>(),
        PyramidFlow::<f64>::param_count(&stvu_core::config::ModelConfig::default().validate().unwrap())
    );
}
