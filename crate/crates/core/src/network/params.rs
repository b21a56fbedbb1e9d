//! Network configuration and parameter containers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{ParamWithGrad, Tensor2};
use crate::scalar::Scalar;

/// How the diffusion timestep reaches the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimestepMode {
    /// No timestep information (the "w/o Time" ablation).
    None,
    /// One shared projection added to the input features.
    Add,
    /// One shared projection appended as an extra temporal row.
    Concat,
    /// Repetitive injection: a per-block projection added to each block input.
    RepIn,
}

impl TimestepMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "add" => Ok(Self::Add),
            "concat" => Ok(Self::Concat),
            "repin" => Ok(Self::RepIn),
            other => Err(Error::Config(format!("unknown timestep mode `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Add => "add",
            Self::Concat => "concat",
            Self::RepIn => "repin",
        }
    }

    pub(crate) fn code(&self) -> u32 {
        match self {
            Self::None => 0,
            Self::Add => 1,
            Self::Concat => 2,
            Self::RepIn => 3,
        }
    }

    pub(crate) fn from_code(c: u32) -> Result<Self> {
        match c {
            0 => Ok(Self::None),
            1 => Ok(Self::Add),
            2 => Ok(Self::Concat),
            3 => Ok(Self::RepIn),
            other => Err(Error::Config(format!("bad timestep mode code {other}"))),
        }
    }
}

/// Architecture hyperparameters.
///
/// `cond_dim = 0` selects the single-branch predictive network (input
/// projected straight to the latent width); `cond_dim > 0` selects the
/// diffusion head where the signal and conditioning branches each project to
/// half the latent width and are concatenated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpConfig {
    pub num_blocks: usize,
    pub latent_dim: usize,
    pub seq_len: usize,
    pub in_dim: usize,
    pub cond_dim: usize,
    pub out_dim: usize,
    pub timestep_mode: TimestepMode,
    pub embed_dim: usize,
}

impl MlpConfig {
    /// Paper-scale diffusion model: M = 12, D = 512, N = 196, RepIn.
    pub fn diffusion_default() -> Self {
        Self {
            num_blocks: 12,
            latent_dim: 512,
            seq_len: 196,
            in_dim: crate::features::MOTION_WIDTH,
            cond_dim: crate::features::SPARSE_WIDTH,
            out_dim: crate::features::MOTION_WIDTH,
            timestep_mode: TimestepMode::RepIn,
            embed_dim: 512,
        }
    }

    /// Paper-scale predictive baseline: sparse signal in, motion out.
    pub fn predictive_default() -> Self {
        Self {
            num_blocks: 12,
            latent_dim: 512,
            seq_len: 196,
            in_dim: crate::features::SPARSE_WIDTH,
            cond_dim: 0,
            out_dim: crate::features::MOTION_WIDTH,
            timestep_mode: TimestepMode::None,
            embed_dim: 512,
        }
    }

    /// Desk-scale diffusion preset (N = 32, D = 64, M = 4).
    pub fn diffusion_toy() -> Self {
        Self {
            num_blocks: 4,
            latent_dim: 64,
            seq_len: 32,
            ..Self::diffusion_default()
        }
    }

    /// Desk-scale predictive preset.
    pub fn predictive_toy() -> Self {
        Self {
            num_blocks: 4,
            latent_dim: 64,
            seq_len: 32,
            ..Self::predictive_default()
        }
    }

    pub fn is_diffusion(&self) -> bool {
        self.cond_dim > 0
    }

    /// Temporal-map side length: N, plus the appended timestep row in
    /// Concat mode.
    pub fn temporal_len(&self) -> usize {
        self.seq_len + usize::from(self.timestep_mode == TimestepMode::Concat)
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0
            || self.seq_len == 0
            || self.in_dim == 0
            || self.out_dim == 0
            || self.embed_dim == 0
        {
            return Err(Error::Config("network dimensions must be positive".into()));
        }
        if self.embed_dim % 2 != 0 {
            return Err(Error::Config("embed_dim must be even".into()));
        }
        if self.cond_dim > 0 && self.latent_dim % 2 != 0 {
            return Err(Error::Config(
                "latent_dim must be even so both input branches project to half".into(),
            ));
        }
        if self.cond_dim == 0 && self.timestep_mode != TimestepMode::None {
            return Err(Error::Config(
                "the predictive network takes no timestep".into(),
            ));
        }
        Ok(())
    }
}

/// Weight + bias pair.
#[derive(Debug, Clone)]
pub struct LinearParams<T> {
    pub weight: ParamWithGrad<T>,
    pub bias: ParamWithGrad<T>,
}

impl<T: Scalar> LinearParams<T> {
    fn init(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let k = 1.0 / (rows as f64).sqrt();
        let weight = Tensor2::from_fn(rows, cols, |_, _| T::from_f64(rng.gen_range(-k..k)));
        Self {
            weight: ParamWithGrad::new(weight),
            bias: ParamWithGrad::new(Tensor2::zeros(1, cols)),
        }
    }

    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            weight: ParamWithGrad::new(Tensor2::zeros(rows, cols)),
            bias: ParamWithGrad::new(Tensor2::zeros(1, cols)),
        }
    }
}

/// Layer-norm scale and shift.
#[derive(Debug, Clone)]
pub struct LnParams<T> {
    pub gamma: ParamWithGrad<T>,
    pub beta: ParamWithGrad<T>,
}

impl<T: Scalar> LnParams<T> {
    fn init(dim: usize) -> Self {
        Self {
            gamma: ParamWithGrad::new(Tensor2::filled(1, dim, T::one())),
            beta: ParamWithGrad::new(Tensor2::zeros(1, dim)),
        }
    }
}

/// One residual block: pre-norm temporal map over the frame axis, then
/// pre-norm feature map over the latent axis, SiLU after each.
#[derive(Debug, Clone)]
pub struct BlockParams<T> {
    pub ln1: LnParams<T>,
    /// Frame-axis map: weight [N'×N'], bias per frame [1×N'].
    pub temporal: LinearParams<T>,
    pub ln2: LnParams<T>,
    /// Feature-axis map: weight [D×D], bias [1×D].
    pub feature: LinearParams<T>,
    /// RepIn timestep projection [E×D], present only in that mode.
    pub time_proj: Option<LinearParams<T>>,
}

/// All learnable weights of one network instance.
#[derive(Debug, Clone)]
pub struct ModelParams<T> {
    config: MlpConfig,
    /// Signal-branch input projection (the only projection for the
    /// predictive network).
    pub fc_x: LinearParams<T>,
    /// Conditioning-branch input projection (diffusion only).
    pub fc_p: Option<LinearParams<T>>,
    /// Shared timestep projection for Add/Concat modes.
    pub time_shared: Option<LinearParams<T>>,
    pub blocks: Vec<BlockParams<T>>,
    pub fc_out: LinearParams<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Fan-in uniform init for all linear maps; the output projection is
    /// zero-initialized. Deterministic for a given generator state.
    pub fn init(config: MlpConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let d = config.latent_dim;
        let nt = config.temporal_len();
        let (fc_x, fc_p) = if config.is_diffusion() {
            (
                LinearParams::init(config.in_dim, d / 2, rng),
                Some(LinearParams::init(config.cond_dim, d / 2, rng)),
            )
        } else {
            (LinearParams::init(config.in_dim, d, rng), None)
        };
        let time_shared = match config.timestep_mode {
            TimestepMode::Add | TimestepMode::Concat => {
                Some(LinearParams::init(config.embed_dim, d, rng))
            }
            _ => None,
        };
        let blocks = (0..config.num_blocks)
            .map(|_| BlockParams {
                ln1: LnParams::init(d),
                temporal: LinearParams::init(nt, nt, rng),
                ln2: LnParams::init(d),
                feature: LinearParams::init(d, d, rng),
                time_proj: (config.timestep_mode == TimestepMode::RepIn)
                    .then(|| LinearParams::init(config.embed_dim, d, rng)),
            })
            .collect();
        let fc_out = LinearParams::zeros(d, config.out_dim);
        Ok(Self {
            config,
            fc_x,
            fc_p,
            time_shared,
            blocks,
            fc_out,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    /// Stable, documented parameter order shared by the optimizer and the
    /// checkpoint format.
    pub fn named_params(&self) -> Vec<(String, &ParamWithGrad<T>)> {
        let mut out: Vec<(String, &ParamWithGrad<T>)> = Vec::new();
        out.push(("fc_x.weight".into(), &self.fc_x.weight));
        out.push(("fc_x.bias".into(), &self.fc_x.bias));
        if let Some(p) = &self.fc_p {
            out.push(("fc_p.weight".into(), &p.weight));
            out.push(("fc_p.bias".into(), &p.bias));
        }
        if let Some(p) = &self.time_shared {
            out.push(("time_shared.weight".into(), &p.weight));
            out.push(("time_shared.bias".into(), &p.bias));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i:02}.ln1.gamma"), &b.ln1.gamma));
            out.push((format!("block{i:02}.ln1.beta"), &b.ln1.beta));
            out.push((format!("block{i:02}.temporal.weight"), &b.temporal.weight));
            out.push((format!("block{i:02}.temporal.bias"), &b.temporal.bias));
            out.push((format!("block{i:02}.ln2.gamma"), &b.ln2.gamma));
            out.push((format!("block{i:02}.ln2.beta"), &b.ln2.beta));
            out.push((format!("block{i:02}.feature.weight"), &b.feature.weight));
            out.push((format!("block{i:02}.feature.bias"), &b.feature.bias));
            if let Some(tp) = &b.time_proj {
                out.push((format!("block{i:02}.time.weight"), &tp.weight));
                out.push((format!("block{i:02}.time.bias"), &tp.bias));
            }
        }
        out.push(("fc_out.weight".into(), &self.fc_out.weight));
        out.push(("fc_out.bias".into(), &self.fc_out.bias));
        out
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut ParamWithGrad<T>)> {
        let mut out: Vec<(String, &mut ParamWithGrad<T>)> = Vec::new();
        out.push(("fc_x.weight".into(), &mut self.fc_x.weight));
        out.push(("fc_x.bias".into(), &mut self.fc_x.bias));
        if let Some(p) = &mut self.fc_p {
            out.push(("fc_p.weight".into(), &mut p.weight));
            out.push(("fc_p.bias".into(), &mut p.bias));
        }
        if let Some(p) = &mut self.time_shared {
            out.push(("time_shared.weight".into(), &mut p.weight));
            out.push(("time_shared.bias".into(), &mut p.bias));
        }
        for (i, b) in self.blocks.iter_mut().enumerate() {
            out.push((format!("block{i:02}.ln1.gamma"), &mut b.ln1.gamma));
            out.push((format!("block{i:02}.ln1.beta"), &mut b.ln1.beta));
            out.push((format!("block{i:02}.temporal.weight"), &mut b.temporal.weight));
            out.push((format!("block{i:02}.temporal.bias"), &mut b.temporal.bias));
            out.push((format!("block{i:02}.ln2.gamma"), &mut b.ln2.gamma));
            out.push((format!("block{i:02}.ln2.beta"), &mut b.ln2.beta));
            out.push((format!("block{i:02}.feature.weight"), &mut b.feature.weight));
            out.push((format!("block{i:02}.feature.bias"), &mut b.feature.bias));
            if let Some(tp) = &mut b.time_proj {
                out.push((format!("block{i:02}.time.weight"), &mut tp.weight));
                out.push((format!("block{i:02}.time.bias"), &mut tp.bias));
            }
        }
        out.push(("fc_out.weight".into(), &mut self.fc_out.weight));
        out.push(("fc_out.bias".into(), &mut self.fc_out.bias));
        out
    }

    pub fn zero_grads(&mut self) {
        for (_, p) in self.named_params_mut() {
            p.zero_grad();
        }
    }

    /// Total number of scalar parameters; a pure function of the config.
    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.value.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.named_params().iter().all(|(_, p)| p.value.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let conv = |l: &LinearParams<T>| LinearParams::<U> {
            weight: ParamWithGrad::new(l.weight.value.cast()),
            bias: ParamWithGrad::new(l.bias.value.cast()),
        };
        let conv_ln = |l: &LnParams<T>| LnParams::<U> {
            gamma: ParamWithGrad::new(l.gamma.value.cast()),
            beta: ParamWithGrad::new(l.beta.value.cast()),
        };
        ModelParams {
            config: self.config,
            fc_x: conv(&self.fc_x),
            fc_p: self.fc_p.as_ref().map(&conv),
            time_shared: self.time_shared.as_ref().map(&conv),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockParams {
                    ln1: conv_ln(&b.ln1),
                    temporal: conv(&b.temporal),
                    ln2: conv_ln(&b.ln2),
                    feature: conv(&b.feature),
                    time_proj: b.time_proj.as_ref().map(&conv),
                })
                .collect(),
            fc_out: conv(&self.fc_out),
        }
    }
}
