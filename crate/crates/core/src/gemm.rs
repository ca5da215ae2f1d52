//! GEMM backend. With the `std` feature the `matrixmultiply` kernels are
//! used; the no_std fallback is a plain triple loop (correct, slow).

#[allow(clippy::too_many_arguments)]
#[inline]
pub unsafe fn sgemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f32,
    a: *const f32,
    rsa: isize,
    csa: isize,
    b: *const f32,
    rsb: isize,
    csb: isize,
    beta: f32,
    c: *mut f32,
    rsc: isize,
    csc: isize,
) {
    #[cfg(feature = "std")]
    {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
    #[cfg(not(feature = "std"))]
    {
        naive_gemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
pub unsafe fn dgemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: *const f64,
    rsa: isize,
    csa: isize,
    b: *const f64,
    rsb: isize,
    csb: isize,
    beta: f64,
    c: *mut f64,
    rsc: isize,
    csc: isize,
) {
    #[cfg(feature = "std")]
    {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
    #[cfg(not(feature = "std"))]
    {
        naive_gemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

#[cfg(not(feature = "std"))]
#[allow(clippy::too_many_arguments)]
unsafe fn naive_gemm<T: num_traits::Float>(
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: *const T,
    rsa: isize,
    csa: isize,
    b: *const T,
    rsb: isize,
    csb: isize,
    beta: T,
    c: *mut T,
    rsc: isize,
    csc: isize,
) {
    for i in 0..m {
        for j in 0..n {
            let mut acc = T::zero();
            for p in 0..k {
                let av = *a.offset(i as isize * rsa + p as isize * csa);
                let bv = *b.offset(p as isize * rsb + j as isize * csb);
                acc = acc + av * bv;
            }
            let cp = c.offset(i as isize * rsc + j as isize * csc);
            *cp = alpha * acc + beta * *cp;
        }
    }
}
