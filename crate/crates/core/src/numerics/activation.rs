//! SiLU activation and its exact derivative.
//!
//! The sigmoid is evaluated in the storage precision; the f64 instantiation
//! used by gradient checks is therefore fully precise.

use crate::numerics::tensor::Tensor2;
use crate::scalar::Scalar;

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// y = x·σ(x), elementwise.
pub fn silu<T: Scalar>(x: &Tensor2<T>) -> Tensor2<T> {
    x.map(|v| v * sigmoid(v))
}

/// dX = dOut · (σ(x) + x·σ(x)·(1 − σ(x))), elementwise against the
/// pre-activation input.
pub fn silu_backward<T: Scalar>(x: &Tensor2<T>, d_out: &Tensor2<T>) -> Tensor2<T> {
    assert!(x.same_shape(d_out), "silu_backward: shape mismatch");
    let mut out = Tensor2::zeros(x.rows(), x.cols());
    for (o, (&xv, &gv)) in out
        .as_mut_slice()
        .iter_mut()
        .zip(x.as_slice().iter().zip(d_out.as_slice()))
    {
        let s = sigmoid(xv);
        *o = gv * (s + xv * s * (T::one() - s));
    }
    out
}
