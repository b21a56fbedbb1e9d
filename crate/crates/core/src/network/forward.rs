//! Network forward passes and manual backpropagation.
//!
//! One block computes, on h ∈ R^{N'×D} (N' includes the extra timestep row
//! in Concat mode):
//!
//! ```text
//! h0  = h + broadcast(u)                  (u present only under RepIn)
//! h1  = h0 + SiLU(TemporalMap(LN1(h0)))   frame-axis map, weight N'×N'
//! out = h1 + SiLU(FeatureMap(LN2(h1)))    latent-axis map, weight D×D
//! ```
//!
//! The backward pass mirrors this exactly and accumulates into the shared
//! gradient buffers, so batched training sums gradients across calls.

use crate::error::{Error, Result};
use crate::network::embed::timestep_embed;
use crate::network::params::{BlockParams, ModelParams, TimestepMode};
use crate::numerics::{
    layernorm_backward, layernorm_forward, silu, silu_backward, LnCache, Tensor2, LN_EPS,
};
use crate::scalar::Scalar;

/// Everything one block's backward pass needs.
pub struct BlockCache<T> {
    ln1: LnCache<T>,
    /// LN1 output = temporal-map input.
    a1n: Tensor2<T>,
    /// Temporal-map pre-activation.
    tpre: Tensor2<T>,
    ln2: LnCache<T>,
    /// LN2 output = feature-map input.
    a2n: Tensor2<T>,
    /// Feature-map pre-activation.
    fpre: Tensor2<T>,
}

/// Forward activations retained for one backward pass.
pub struct ModelCache<T> {
    x_in: Tensor2<T>,
    p_in: Option<Tensor2<T>>,
    emb: Option<Tensor2<T>>,
    time_shared_pre: Option<Tensor2<T>>,
    time_block_pre: Vec<Option<Tensor2<T>>>,
    blocks: Vec<BlockCache<T>>,
    h_final: Tensor2<T>,
}

/// Frame-axis map: out = W_t·x with a per-frame bias (1×N').
fn temporal_forward<T: Scalar>(
    weight: &Tensor2<T>,
    bias: &Tensor2<T>,
    x: &Tensor2<T>,
) -> Result<Tensor2<T>> {
    let mut out = weight.matmul(x)?;
    for r in 0..out.rows() {
        let b = bias.at(0, r);
        for v in out.row_mut(r) {
            *v += b;
        }
    }
    Ok(out)
}

fn block_forward<T: Scalar>(
    block: &BlockParams<T>,
    h: &Tensor2<T>,
    u: Option<&Tensor2<T>>,
) -> Result<(Tensor2<T>, BlockCache<T>)> {
    let mut h0 = h.clone();
    if let Some(u) = u {
        h0.add_row_broadcast(u)?;
    }
    let (a1n, ln1) = layernorm_forward(&h0, &block.ln1.gamma.value, &block.ln1.beta.value, LN_EPS)?;
    let tpre = temporal_forward(&block.temporal.weight.value, &block.temporal.bias.value, &a1n)?;
    let mut h1 = h0;
    h1.add_assign(&silu(&tpre))?;
    let (a2n, ln2) = layernorm_forward(&h1, &block.ln2.gamma.value, &block.ln2.beta.value, LN_EPS)?;
    let mut fpre = a2n.matmul(&block.feature.weight.value)?;
    fpre.add_row_broadcast(&block.feature.bias.value)?;
    let mut out = h1;
    out.add_assign(&silu(&fpre))?;
    Ok((
        out,
        BlockCache {
            ln1,
            a1n,
            tpre,
            ln2,
            a2n,
            fpre,
        },
    ))
}

/// Accumulates block parameter gradients; returns (dH, dU). dU (the
/// gradient of the broadcast timestep feature) is computed only when
/// `want_du` is set.
fn block_backward<T: Scalar>(
    block: &mut BlockParams<T>,
    cache: &BlockCache<T>,
    d_out: &Tensor2<T>,
    want_du: bool,
) -> Result<(Tensor2<T>, Option<Tensor2<T>>)> {
    // feature branch: out = h1 + SiLU(a2n·W_f + b_f)
    let d_fpre = silu_backward(&cache.fpre, d_out);
    let d_a2n = d_fpre.matmul_transpose_other(&block.feature.weight.value)?;
    block
        .feature
        .weight
        .grad
        .add_assign(&cache.a2n.matmul_transpose_self(&d_fpre)?)?;
    block.feature.bias.grad.add_assign(&d_fpre.column_sum())?;
    let (d_h1_ln, d_g2, d_b2) = layernorm_backward(&cache.ln2, &d_a2n)?;
    block.ln2.gamma.grad.add_assign(&d_g2)?;
    block.ln2.beta.grad.add_assign(&d_b2)?;
    let mut d_h1 = d_out.clone();
    d_h1.add_assign(&d_h1_ln)?;

    // temporal branch: h1 = h0 + SiLU(W_t·a1n + b_t)
    let d_tpre = silu_backward(&cache.tpre, &d_h1);
    let d_a1n = block.temporal.weight.value.matmul_transpose_self(&d_tpre)?;
    block
        .temporal
        .weight
        .grad
        .add_assign(&d_tpre.matmul_transpose_other(&cache.a1n)?)?;
    // per-frame bias: sum over the feature axis
    let mut d_bt = Tensor2::zeros(1, d_tpre.rows());
    for r in 0..d_tpre.rows() {
        let s: f64 = d_tpre.row(r).iter().map(|&v| v.to_f64()).sum();
        d_bt.set(0, r, T::from_f64(s));
    }
    block.temporal.bias.grad.add_assign(&d_bt)?;
    let (d_h0_ln, d_g1, d_b1) = layernorm_backward(&cache.ln1, &d_a1n)?;
    block.ln1.gamma.grad.add_assign(&d_g1)?;
    block.ln1.beta.grad.add_assign(&d_b1)?;
    let mut d_h0 = d_h1;
    d_h0.add_assign(&d_h0_ln)?;

    let d_u = want_du.then(|| d_h0.column_sum());
    Ok((d_h0, d_u))
}

fn check_rows<T: Scalar>(x: &Tensor2<T>, n: usize, context: &'static str) -> Result<()> {
    if x.rows() != n {
        return Err(Error::LengthMismatch {
            context,
            left: x.rows(),
            right: n,
        });
    }
    Ok(())
}

fn check_cols<T: Scalar>(x: &Tensor2<T>, d: usize, context: &'static str) -> Result<()> {
    if x.cols() != d {
        return Err(Error::WidthMismatch {
            context,
            expected: d,
            got: x.cols(),
        });
    }
    Ok(())
}

/// Full forward pass retaining activations for [`backward`].
///
/// For the predictive network pass `p = None, t = None`; the diffusion head
/// requires `p` and takes `t` except in the `None` timestep mode.
pub fn forward_with_cache<T: Scalar>(
    params: &ModelParams<T>,
    x: &Tensor2<T>,
    p: Option<&Tensor2<T>>,
    t: Option<usize>,
) -> Result<(Tensor2<T>, ModelCache<T>)> {
    let cfg = *params.config();
    check_rows(x, cfg.seq_len, "network input frames")?;
    check_cols(x, cfg.in_dim, "network input width")?;

    // input projection(s)
    let mut h = {
        let mut xb = x.matmul(&params.fc_x.weight.value)?;
        xb.add_row_broadcast(&params.fc_x.bias.value)?;
        if cfg.is_diffusion() {
            let p = p.ok_or(Error::WidthMismatch {
                context: "diffusion forward requires the conditioning signal",
                expected: cfg.cond_dim,
                got: 0,
            })?;
            check_rows(p, cfg.seq_len, "conditioning frames")?;
            check_cols(p, cfg.cond_dim, "conditioning width")?;
            let fc_p = params.fc_p.as_ref().expect("diffusion params carry fc_p");
            let mut pb = p.matmul(&fc_p.weight.value)?;
            pb.add_row_broadcast(&fc_p.bias.value)?;
            xb.concat_cols(&pb)?
        } else {
            xb
        }
    };

    // timestep feature
    let mut emb = None;
    let mut time_shared_pre = None;
    if cfg.timestep_mode != TimestepMode::None {
        let t = t.ok_or(Error::Config("this network requires a timestep".into()))?;
        emb = Some(timestep_embed::<T>(t, cfg.embed_dim)?);
    }
    match cfg.timestep_mode {
        TimestepMode::Add | TimestepMode::Concat => {
            let shared = params.time_shared.as_ref().expect("shared time projection");
            let e = emb.as_ref().expect("embedding present");
            let mut pre = e.matmul(&shared.weight.value)?;
            pre.add_row_broadcast(&shared.bias.value)?;
            let u = silu(&pre);
            time_shared_pre = Some(pre);
            if cfg.timestep_mode == TimestepMode::Add {
                h.add_row_broadcast(&u)?;
            } else {
                h = h.append_row(&u)?;
            }
        }
        _ => {}
    }

    // residual blocks
    let mut block_caches = Vec::with_capacity(params.blocks.len());
    let mut time_block_pre = Vec::with_capacity(params.blocks.len());
    for block in &params.blocks {
        let u = match (&block.time_proj, &emb) {
            (Some(proj), Some(e)) => {
                let mut pre = e.matmul(&proj.weight.value)?;
                pre.add_row_broadcast(&proj.bias.value)?;
                let u = silu(&pre);
                time_block_pre.push(Some(pre));
                Some(u)
            }
            _ => {
                time_block_pre.push(None);
                None
            }
        };
        let (next, cache) = block_forward(block, &h, u.as_ref())?;
        h = next;
        block_caches.push(cache);
    }

    // the timestep row is dropped before the output projection
    if cfg.timestep_mode == TimestepMode::Concat {
        h = h.truncate_rows(cfg.seq_len);
    }
    let mut out = h.matmul(&params.fc_out.weight.value)?;
    out.add_row_broadcast(&params.fc_out.bias.value)?;
    Ok((
        out,
        ModelCache {
            x_in: x.clone(),
            p_in: p.cloned(),
            emb,
            time_shared_pre,
            time_block_pre,
            blocks: block_caches,
            h_final: h,
        },
    ))
}

/// Backpropagates `d_out` through the cached forward pass, accumulating
/// parameter gradients. Returns the gradient w.r.t. the signal input.
pub fn backward<T: Scalar>(
    params: &mut ModelParams<T>,
    cache: &ModelCache<T>,
    d_out: &Tensor2<T>,
) -> Result<Tensor2<T>> {
    let cfg = *params.config();
    check_rows(d_out, cfg.seq_len, "backward upstream frames")?;
    check_cols(d_out, cfg.out_dim, "backward upstream width")?;

    // output projection
    params
        .fc_out
        .weight
        .grad
        .add_assign(&cache.h_final.matmul_transpose_self(d_out)?)?;
    params.fc_out.bias.grad.add_assign(&d_out.column_sum())?;
    let mut dh = d_out.matmul_transpose_other(&params.fc_out.weight.value)?;
    if cfg.timestep_mode == TimestepMode::Concat {
        // the dropped timestep row receives no direct gradient
        dh = dh.append_row(&Tensor2::zeros(1, cfg.latent_dim))?;
    }

    // blocks in reverse
    let repin = cfg.timestep_mode == TimestepMode::RepIn;
    for (i, block) in params.blocks.iter_mut().enumerate().rev() {
        let (next, du) = block_backward(block, &cache.blocks[i], &dh, repin)?;
        dh = next;
        if let (Some(du), Some(pre)) = (du, &cache.time_block_pre[i]) {
            let d_pre = silu_backward(pre, &du);
            let proj = block.time_proj.as_mut().expect("RepIn block projection");
            let emb = cache.emb.as_ref().expect("embedding cached");
            proj.weight.grad.add_assign(&emb.matmul_transpose_self(&d_pre)?)?;
            proj.bias.grad.add_assign(&d_pre)?;
        }
    }

    // shared timestep projection
    match cfg.timestep_mode {
        TimestepMode::Add | TimestepMode::Concat => {
            let du = if cfg.timestep_mode == TimestepMode::Add {
                dh.column_sum()
            } else {
                let last = dh.slice_rows(cfg.seq_len, 1);
                dh = dh.truncate_rows(cfg.seq_len);
                last
            };
            let pre = cache.time_shared_pre.as_ref().expect("shared pre-activation");
            let d_pre = silu_backward(pre, &du);
            let shared = params.time_shared.as_mut().expect("shared projection");
            let emb = cache.emb.as_ref().expect("embedding cached");
            shared
                .weight
                .grad
                .add_assign(&emb.matmul_transpose_self(&d_pre)?)?;
            shared.bias.grad.add_assign(&d_pre)?;
        }
        _ => {}
    }

    // input projections
    if cfg.is_diffusion() {
        let (dxb, dpb) = dh.split_cols(cfg.latent_dim / 2);
        let p_in = cache.p_in.as_ref().expect("conditioning cached");
        let fc_p = params.fc_p.as_mut().expect("diffusion params carry fc_p");
        fc_p.weight.grad.add_assign(&p_in.matmul_transpose_self(&dpb)?)?;
        fc_p.bias.grad.add_assign(&dpb.column_sum())?;
        params
            .fc_x
            .weight
            .grad
            .add_assign(&cache.x_in.matmul_transpose_self(&dxb)?)?;
        params.fc_x.bias.grad.add_assign(&dxb.column_sum())?;
        dxb.matmul_transpose_other(&params.fc_x.weight.value)
    } else {
        params
            .fc_x
            .weight
            .grad
            .add_assign(&cache.x_in.matmul_transpose_self(&dh)?)?;
        params.fc_x.bias.grad.add_assign(&dh.column_sum())?;
        dh.matmul_transpose_other(&params.fc_x.weight.value)
    }
}

/// Predictive baseline: input projection → M blocks → output projection.
pub fn mlp_forward<T: Scalar>(params: &ModelParams<T>, input: &Tensor2<T>) -> Result<Tensor2<T>> {
    if params.config().is_diffusion() {
        return Err(Error::Config(
            "mlp_forward is the predictive path; this model expects conditioning".into(),
        ));
    }
    Ok(forward_with_cache(params, input, None, None)?.0)
}

/// Conditional denoiser: x̄ = FC0(x_t), p̄ = FC1(p), concatenated and run
/// through the backbone with the configured timestep injection.
pub fn diffusion_forward<T: Scalar>(
    params: &ModelParams<T>,
    x_t: &Tensor2<T>,
    p: &Tensor2<T>,
    t: usize,
) -> Result<Tensor2<T>> {
    if !params.config().is_diffusion() {
        return Err(Error::Config("this model is the predictive baseline".into()));
    }
    let t = (params.config().timestep_mode != TimestepMode::None).then_some(t);
    Ok(forward_with_cache(params, x_t, Some(p), t)?.0)
}
