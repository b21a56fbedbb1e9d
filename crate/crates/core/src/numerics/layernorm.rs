//! Layer normalization over the feature axis with exact analytic gradients.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor2;
use crate::scalar::Scalar;

/// Conventional default epsilon.
pub const LN_EPS: f64 = 1e-5;

/// Forward cache: everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct LnCache<T> {
    /// Standardized input (x − μ)/√(σ² + eps), before the affine.
    pub x_hat: Tensor2<T>,
    /// Per-row 1/√(σ² + eps).
    pub inv_std: Vec<T>,
    /// Scale parameter, 1×D.
    pub gamma: Tensor2<T>,
}

/// Per-row standardization over the last dimension, then affine:
/// out = gamma ⊙ (x − μ)/√(σ² + eps) + beta. Statistics accumulate in f64.
pub fn layernorm_forward<T: Scalar>(
    x: &Tensor2<T>,
    gamma: &Tensor2<T>,
    beta: &Tensor2<T>,
    eps: f64,
) -> Result<(Tensor2<T>, LnCache<T>)> {
    let d = x.cols();
    if gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d {
        return Err(Error::ShapeMismatch {
            context: "layernorm_forward",
            left: x.shape(),
            right: gamma.shape(),
        });
    }
    let mut out = Tensor2::zeros(x.rows(), d);
    let mut x_hat = Tensor2::zeros(x.rows(), d);
    let mut inv_std = Vec::with_capacity(x.rows());
    let gamma_row = gamma.row(0);
    let beta_row = beta.row(0);
    for r in 0..x.rows() {
        let row = x.row(r);
        let mean: f64 = row.iter().map(|&v| v.to_f64()).sum::<f64>() / d as f64;
        let var: f64 = row
            .iter()
            .map(|&v| {
                let c = v.to_f64() - mean;
                c * c
            })
            .sum::<f64>()
            / d as f64;
        let istd = 1.0 / (var + eps).sqrt();
        inv_std.push(T::from_f64(istd));
        let mean_t = T::from_f64(mean);
        let istd_t = T::from_f64(istd);
        let xh_row = x_hat.row_mut(r);
        let out_row = out.row_mut(r);
        for (c, &xv) in row.iter().enumerate() {
            let xh = (xv - mean_t) * istd_t;
            xh_row[c] = xh;
            out_row[c] = xh * gamma_row[c] + beta_row[c];
        }
    }
    let cache = LnCache {
        x_hat,
        inv_std,
        gamma: gamma.clone(),
    };
    Ok((out, cache))
}

/// Exact layer-norm gradient:
/// dx = inv_std · (dx̂ − mean(dx̂) − x̂ · mean(dx̂ ⊙ x̂)) with dx̂ = dOut ⊙ γ.
pub fn layernorm_backward<T: Scalar>(
    cache: &LnCache<T>,
    d_out: &Tensor2<T>,
) -> Result<(Tensor2<T>, Tensor2<T>, Tensor2<T>)> {
    let (n, d) = d_out.shape();
    if cache.x_hat.shape() != (n, d) {
        return Err(Error::ShapeMismatch {
            context: "layernorm_backward",
            left: cache.x_hat.shape(),
            right: d_out.shape(),
        });
    }
    let mut dx = Tensor2::zeros(n, d);
    let mut d_gamma = vec![0f64; d];
    let mut d_beta = vec![0f64; d];
    for r in 0..n {
        let istd = cache.inv_std[r].to_f64();
        let mut mean_dxh = 0f64;
        let mut mean_dxh_xh = 0f64;
        for c in 0..d {
            let go = d_out.at(r, c).to_f64();
            let xh = cache.x_hat.at(r, c).to_f64();
            d_beta[c] += go;
            d_gamma[c] += go * xh;
            let dxh = go * cache.gamma.at(0, c).to_f64();
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh;
        }
        mean_dxh /= d as f64;
        mean_dxh_xh /= d as f64;
        for c in 0..d {
            let dxh = d_out.at(r, c).to_f64() * cache.gamma.at(0, c).to_f64();
            let xh = cache.x_hat.at(r, c).to_f64();
            dx.set(r, c, T::from_f64(istd * (dxh - mean_dxh - xh * mean_dxh_xh)));
        }
    }
    let d_gamma = Tensor2::row_vector(d_gamma.into_iter().map(T::from_f64).collect());
    let d_beta = Tensor2::row_vector(d_beta.into_iter().map(T::from_f64).collect());
    Ok((dx, d_gamma, d_beta))
}
