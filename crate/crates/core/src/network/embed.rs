//! Sinusoidal timestep embedding.

use crate::error::{Error, Result};
use crate::numerics::Tensor2;
use crate::scalar::Scalar;

/// emb[2i] = sin(t / 10000^{2i/E}), emb[2i+1] = cos(t / 10000^{2i/E}),
/// returned as a 1×E row. E must be even.
pub fn timestep_embed<T: Scalar>(t: usize, e: usize) -> Result<Tensor2<T>> {
    if e == 0 || e % 2 != 0 {
        return Err(Error::WidthMismatch {
            context: "timestep_embed requires even embedding width",
            expected: e + 1,
            got: e,
        });
    }
    let mut out = Tensor2::zeros(1, e);
    let t = t as f64;
    for i in 0..e / 2 {
        let freq = 10000f64.powf(-(2.0 * i as f64) / e as f64);
        out.set(0, 2 * i, T::from_f64((t * freq).sin()));
        out.set(0, 2 * i + 1, T::from_f64((t * freq).cos()));
    }
    Ok(out)
}
