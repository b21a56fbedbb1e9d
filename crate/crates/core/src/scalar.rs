//! Scalar abstraction over the floating-point storage type.
//!
//! All numeric code in this crate is generic over [`Scalar`] so the same
//! implementation runs in f32 (training/inference storage) and in f64
//! (finite-difference gradient checks). Concrete aliases live at the crate
//! root.

use std::fmt::{Debug, Display};

use num_traits::{Float, NumAssignOps, NumCast};

/// Floating-point scalar usable as tensor storage: f32 or f64.
pub trait Scalar:
    Float + NumAssignOps + NumCast + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from f64 (rounds to storage precision).
    fn from_f64(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("finite f64 converts to scalar")
    }

    /// Widening conversion to f64.
    fn to_f64(self) -> f64 {
        <f64 as NumCast>::from(self).expect("scalar converts to f64")
    }

    /// Conversion from the 32-bit on-disk representation.
    fn from_f32(v: f32) -> Self {
        <Self as NumCast>::from(v).expect("f32 converts to scalar")
    }

    /// Conversion to the 32-bit on-disk representation.
    fn to_f32(self) -> f32 {
        <f32 as NumCast>::from(self).expect("scalar converts to f32")
    }

    /// C = A·B on row-major buffers with explicit strides.
    ///
    /// `rs*`/`cs*` are row/column strides in elements, so transposed operands
    /// are expressed by swapping strides rather than copying. Backed by a
    /// blocked SIMD kernel; accumulation happens in `Self` precision.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    ) {
        check_gemm_bounds(m, k, n, a.len(), rsa, csa, b.len(), rsb, csb, c.len(), rsc, csc);
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                0.0,
                c.as_mut_ptr(),
                rsc,
                csc,
            );
        }
    }
}

impl Scalar for f64 {
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    ) {
        check_gemm_bounds(m, k, n, a.len(), rsa, csa, b.len(), rsb, csb, c.len(), rsc, csc);
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                0.0,
                c.as_mut_ptr(),
                rsc,
                csc,
            );
        }
    }
}

/// Panics if the strided index space of any operand escapes its buffer.
#[allow(clippy::too_many_arguments)]
fn check_gemm_bounds(
    m: usize,
    k: usize,
    n: usize,
    alen: usize,
    rsa: isize,
    csa: isize,
    blen: usize,
    rsb: isize,
    csb: isize,
    clen: usize,
    rsc: isize,
    csc: isize,
) {
    let max_index = |rows: usize, cols: usize, rs: isize, cs: isize| -> usize {
        if rows == 0 || cols == 0 {
            return 0;
        }
        let r = (rows - 1) as isize * rs + (cols - 1) as isize * cs;
        assert!(r >= 0, "negative gemm strides are not supported");
        r as usize + 1
    };
    assert!(max_index(m, k, rsa, csa) <= alen, "gemm: A out of bounds");
    assert!(max_index(k, n, rsb, csb) <= blen, "gemm: B out of bounds");
    assert!(max_index(m, n, rsc, csc) <= clen, "gemm: C out of bounds");
}
