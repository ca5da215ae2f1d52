//! Stride-1 "same" 2-D convolution via im2col + GEMM, with zero or
//! replicate padding. Weight layout is [out_c, in_c, kh, kw]; bias is an
//! optional [1, out_c, 1, 1] tensor fused into the same node.

use alloc::boxed::Box;
use alloc::vec::Vec;

use super::{shape_bail, ShapeError};
use crate::autograd::{NodeId, Op, Tape};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Boundary handling for the implicit "same" padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadMode {
    Zero,
    Replicate,
}

struct Conv2d {
    kh: usize,
    kw: usize,
    pad: PadMode,
    has_bias: bool,
}

/// Gather the im2col matrix (in_c*kh*kw, h*w) for one sample.
fn im2col<S: Scalar>(
    x: &[S],
    in_c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    pad: PadMode,
    col: &mut [S],
) {
    let (ph, pw) = (kh / 2, kw / 2);
    let plane = h * w;
    debug_assert_eq!(col.len(), in_c * kh * kw * plane);
    let mut row = 0;
    for ic in 0..in_c {
        let src_plane = &x[ic * plane..(ic + 1) * plane];
        for ky in 0..kh {
            for kx in 0..kw {
                let dst = &mut col[row * plane..(row + 1) * plane];
                let dy = ky as isize - ph as isize;
                let dx = kx as isize - pw as isize;
                for y in 0..h {
                    let sy = y as isize + dy;
                    let drow = &mut dst[y * w..(y + 1) * w];
                    match pad {
                        PadMode::Zero => {
                            if sy < 0 || sy >= h as isize {
                                for v in drow.iter_mut() {
                                    *v = S::zero();
                                }
                                continue;
                            }
                            let srow = &src_plane[sy as usize * w..(sy as usize + 1) * w];
                            // valid x-range is a contiguous window; edges are zero
                            let lo = (-dx).max(0) as usize;
                            let hi = ((w as isize - dx).min(w as isize)).max(0) as usize;
                            for v in drow[..lo].iter_mut() {
                                *v = S::zero();
                            }
                            for x_ in lo..hi {
                                drow[x_] = srow[(x_ as isize + dx) as usize];
                            }
                            for v in drow[hi..].iter_mut() {
                                *v = S::zero();
                            }
                        }
                        PadMode::Replicate => {
                            let syc = sy.clamp(0, h as isize - 1) as usize;
                            let srow = &src_plane[syc * w..(syc + 1) * w];
                            for (x_, v) in drow.iter_mut().enumerate() {
                                let sx = (x_ as isize + dx).clamp(0, w as isize - 1) as usize;
                                *v = srow[sx];
                            }
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Scatter-add the columns gradient back onto the input gradient.
fn col2im_add<S: Scalar>(
    dcol: &[S],
    in_c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    pad: PadMode,
    dx_out: &mut [S],
) {
    let (ph, pw) = (kh / 2, kw / 2);
    let plane = h * w;
    let mut row = 0;
    for ic in 0..in_c {
        let dst_plane = &mut dx_out[ic * plane..(ic + 1) * plane];
        for ky in 0..kh {
            for kx in 0..kw {
                let src = &dcol[row * plane..(row + 1) * plane];
                let dy = ky as isize - ph as isize;
                let dxo = kx as isize - pw as isize;
                for y in 0..h {
                    let sy = y as isize + dy;
                    let in_bounds_y = sy >= 0 && sy < h as isize;
                    if !in_bounds_y && pad == PadMode::Zero {
                        continue;
                    }
                    let syc = sy.clamp(0, h as isize - 1) as usize;
                    let srow = &src[y * w..(y + 1) * w];
                    for (x_, &g) in srow.iter().enumerate() {
                        let sx = x_ as isize + dxo;
                        match pad {
                            PadMode::Zero => {
                                if sx >= 0 && sx < w as isize {
                                    dst_plane[syc * w + sx as usize] =
                                        dst_plane[syc * w + sx as usize] + g;
                                }
                            }
                            PadMode::Replicate => {
                                let sxc = sx.clamp(0, w as isize - 1) as usize;
                                dst_plane[syc * w + sxc] = dst_plane[syc * w + sxc] + g;
                            }
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

impl<S: Scalar> Op<S> for Conv2d {
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        inputs: &[&Tensor<S>],
        _output: &Tensor<S>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        let x = inputs[0];
        let wt = inputs[1];
        let [n, in_c, h, w] = x.shape();
        let out_c = wt.shape()[0];
        let k = in_c * self.kh * self.kw;
        let plane = h * w;
        let one_by_one = self.kh == 1 && self.kw == 1;

        let mut gx = needs[0].then(|| Tensor::zeros([n, in_c, h, w]));
        let mut gw = needs[1].then(|| Tensor::zeros(wt.shape()));
        let mut col = if (needs[1] || needs[0]) && !one_by_one {
            alloc::vec![S::zero(); k * plane]
        } else {
            Vec::new()
        };
        let mut dcol = if needs[0] && !one_by_one {
            alloc::vec![S::zero(); k * plane]
        } else {
            Vec::new()
        };

        for ni in 0..n {
            let dy = &grad_out.data()[ni * out_c * plane..(ni + 1) * out_c * plane];
            // dW += dY_n * col_nᵀ
            if let Some(gw) = gw.as_mut() {
                let cols: &[S] = if one_by_one {
                    &x.data()[ni * in_c * plane..(ni + 1) * in_c * plane]
                } else {
                    im2col(
                        &x.data()[ni * in_c * plane..(ni + 1) * in_c * plane],
                        in_c,
                        h,
                        w,
                        self.kh,
                        self.kw,
                        self.pad,
                        &mut col,
                    );
                    &col
                };
                unsafe {
                    S::gemm(
                        out_c,
                        plane,
                        k,
                        S::one(),
                        dy.as_ptr(),
                        plane as isize,
                        1,
                        cols.as_ptr(),
                        1,
                        plane as isize,
                        S::one(),
                        gw.data_mut().as_mut_ptr(),
                        k as isize,
                        1,
                    );
                }
            }
            // dX_n = col2im(Wᵀ * dY_n)
            if let Some(gx) = gx.as_mut() {
                let gx_n = &mut gx.data_mut()[ni * in_c * plane..(ni + 1) * in_c * plane];
                if one_by_one {
                    unsafe {
                        S::gemm(
                            k,
                            out_c,
                            plane,
                            S::one(),
                            wt.data().as_ptr(),
                            1,
                            k as isize,
                            dy.as_ptr(),
                            plane as isize,
                            1,
                            S::zero(),
                            gx_n.as_mut_ptr(),
                            plane as isize,
                            1,
                        );
                    }
                } else {
                    unsafe {
                        S::gemm(
                            k,
                            out_c,
                            plane,
                            S::one(),
                            wt.data().as_ptr(),
                            1,
                            k as isize,
                            dy.as_ptr(),
                            plane as isize,
                            1,
                            S::zero(),
                            dcol.as_mut_ptr(),
                            plane as isize,
                            1,
                        );
                    }
                    col2im_add(&dcol, in_c, h, w, self.kh, self.kw, self.pad, gx_n);
                }
            }
        }

        let gb = if self.has_bias && needs[2] {
            let mut acc = Tensor::zeros([1, out_c, 1, 1]);
            {
                let a = acc.data_mut();
                let g = grad_out.data();
                for ni in 0..n {
                    for oc in 0..out_c {
                        let base = (ni * out_c + oc) * plane;
                        let mut s = S::zero();
                        for &v in &g[base..base + plane] {
                            s = s + v;
                        }
                        a[oc] = a[oc] + s;
                    }
                }
            }
            Some(acc)
        } else {
            None
        };

        let mut grads = alloc::vec![gx, gw];
        if self.has_bias {
            grads.push(gb);
        }
        grads
    }
}

impl<S: Scalar> Tape<S> {
    /// Stride-1 same-size convolution. `w` is [out_c, in_c, kh, kw] with
    /// odd kh, kw; `b`, when present, is [1, out_c, 1, 1].
    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
        pad: PadMode,
    ) -> Result<NodeId, ShapeError> {
        let xs = self.value(x).shape();
        let ws = self.value(w).shape();
        let [n, in_c, h, wd] = xs;
        let [out_c, w_in_c, kh, kw] = ws;
        if w_in_c != in_c {
            shape_bail!("conv2d: input has {in_c} channels, weight expects {w_in_c}");
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            shape_bail!("conv2d: kernel must be odd, got {kh}x{kw}");
        }
        if let Some(b) = b {
            let bs = self.value(b).shape();
            if bs != [1, out_c, 1, 1] {
                shape_bail!("conv2d: bias shape {bs:?} != [1,{out_c},1,1]");
            }
        }
        let k = in_c * kh * kw;
        let plane = h * wd;
        let one_by_one = kh == 1 && kw == 1;
        let mut out = Tensor::zeros([n, out_c, h, wd]);
        {
            let x_t = self.value(x).clone();
            let w_t = self.value(w).clone();
            let out_data = out.data_mut();
            let mut col = if one_by_one {
                Vec::new()
            } else {
                alloc::vec![S::zero(); k * plane]
            };
            for ni in 0..n {
                let x_n = &x_t.data()[ni * in_c * plane..(ni + 1) * in_c * plane];
                let cols: &[S] = if one_by_one {
                    x_n
                } else {
                    im2col(x_n, in_c, h, wd, kh, kw, pad, &mut col);
                    &col
                };
                let out_n = &mut out_data[ni * out_c * plane..(ni + 1) * out_c * plane];
                unsafe {
                    S::gemm(
                        out_c,
                        k,
                        plane,
                        S::one(),
                        w_t.data().as_ptr(),
                        k as isize,
                        1,
                        cols.as_ptr(),
                        plane as isize,
                        1,
                        S::zero(),
                        out_n.as_mut_ptr(),
                        plane as isize,
                        1,
                    );
                }
            }
        }
        let op = Conv2d {
            kh,
            kw,
            pad,
            has_bias: b.is_some(),
        };
        let mut parents = alloc::vec![x, w];
        let conv = if let Some(b) = b {
            // fold the bias into the same node: out += broadcast(b)
            let bias = self.value(b).clone();
            {
                let dst = out.data_mut();
                for ni in 0..n {
                    for oc in 0..out_c {
                        let base = (ni * out_c + oc) * plane;
                        let bv = bias.data()[oc];
                        for v in &mut dst[base..base + plane] {
                            *v = *v + bv;
                        }
                    }
                }
            }
            parents.push(b);
            self.push(out, parents, Box::new(op))
        } else {
            self.push(out, parents, Box::new(op))
        };
        Ok(conv)
    }
}
