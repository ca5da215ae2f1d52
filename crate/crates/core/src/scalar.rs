//! Element type abstraction so the whole network stack can run in `f32`
//! (training, inference) or `f64` (finite-difference gradient checks).

use crate::gemm;

/// Floating-point element of tensors. Implemented for `f32` and `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + core::fmt::Debug
    + core::fmt::Display
    + core::iter::Sum
    + Send
    + Sync
    + 'static
{
    fn scalar_from_f64(x: f64) -> Self;
    fn to_f64_(self) -> f64;

    /// C := alpha * op(A) * op(B) + beta * C, row-major, stride-based.
    ///
    /// Strides are in elements; `rs` is the stride between rows, `cs`
    /// between columns, so a transposed operand is expressed by swapping
    /// its strides.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    #[inline]
    fn scalar_from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64_(self) -> f64 {
        self as f64
    }
    #[inline]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        gemm::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    #[inline]
    fn scalar_from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64_(self) -> f64 {
        self
    }
    #[inline]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        gemm::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}
