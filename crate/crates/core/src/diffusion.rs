//! Forward noising, the clean-signal training objective, cosine schedule,
//! DDIM and ancestral DDPM sampling, and the x0/ε parameterization bridge.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::network::{backward, diffusion_forward, forward_with_cache, ModelParams};
use crate::numerics::Tensor2;
use crate::scalar::Scalar;

/// Per-step noising constants. Schedule math is kept in f64; values are
/// cast at the point of use.
#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    /// Cosine schedule: f(u) = cos²(((u/T + s)/(1 + s))·π/2),
    /// ᾱ_t = f(t+1)/f(0), β_t = 1 − ᾱ_t/ᾱ_{t−1} clipped to ≤ 0.999.
    /// ᾱ is then rebuilt as the cumulative product of the clipped α so the
    /// stored arrays stay mutually consistent.
    pub fn cosine(t_total: usize, s: f64) -> Self {
        assert!(t_total >= 1, "schedule needs at least one step");
        let f = |u: f64| -> f64 {
            let arg = ((u / t_total as f64 + s) / (1.0 + s)) * std::f64::consts::FRAC_PI_2;
            arg.cos().powi(2)
        };
        let f0 = f(0.0);
        let mut beta = Vec::with_capacity(t_total);
        let mut prev = 1.0f64;
        for t in 0..t_total {
            let abar = f((t + 1) as f64) / f0;
            let b = (1.0 - abar / prev).min(0.999);
            beta.push(b);
            prev = abar;
        }
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(t_total);
        let mut acc = 1.0f64;
        for &a in &alpha {
            acc *= a;
            alpha_bar.push(acc);
        }
        Self {
            beta,
            alpha,
            alpha_bar,
        }
    }

    /// Default cosine schedule with s = 0.008.
    pub fn cosine_default(t_total: usize) -> Self {
        Self::cosine(t_total, 0.008)
    }

    /// Builds a schedule from explicit ᾱ values (test harnesses and
    /// degenerate cases).
    pub fn from_alpha_bar(alpha_bar: Vec<f64>) -> Self {
        let mut prev = 1.0;
        let mut beta = Vec::with_capacity(alpha_bar.len());
        let mut alpha = Vec::with_capacity(alpha_bar.len());
        for &ab in &alpha_bar {
            let a = ab / prev;
            alpha.push(a);
            beta.push(1.0 - a);
            prev = ab;
        }
        Self {
            beta,
            alpha,
            alpha_bar,
        }
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t >= self.len() {
            return Err(Error::TimestepOutOfRange {
                t,
                max: self.len(),
            });
        }
        Ok(())
    }
}

/// Source of standard-normal noise. Samplers draw through this so tests can
/// count every read.
pub trait NoiseSource<T: Scalar> {
    fn standard_normal(&mut self, rows: usize, cols: usize) -> Tensor2<T>;
}

/// Seeded ChaCha-backed noise source; the crate-wide deterministic default.
pub struct ChaChaNoise(pub ChaCha8Rng);

impl ChaChaNoise {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl<T: Scalar> NoiseSource<T> for ChaChaNoise {
    fn standard_normal(&mut self, rows: usize, cols: usize) -> Tensor2<T> {
        let mut out = Tensor2::zeros(rows, cols);
        for v in out.as_mut_slice() {
            let z: f64 = StandardNormal.sample(&mut self.0);
            *v = T::from_f64(z);
        }
        out
    }
}

/// x_t = √(ᾱ_t)·x0 + √(1 − ᾱ_t)·eps
pub fn q_sample<T: Scalar>(
    x0: &Tensor2<T>,
    t: usize,
    eps: &Tensor2<T>,
    sched: &NoiseSchedule,
) -> Result<Tensor2<T>> {
    sched.check_t(t)?;
    if !x0.same_shape(eps) {
        return Err(Error::ShapeMismatch {
            context: "q_sample",
            left: x0.shape(),
            right: eps.shape(),
        });
    }
    let ab = sched.alpha_bar(t);
    let c0 = T::from_f64(ab.sqrt());
    let c1 = T::from_f64((1.0 - ab).sqrt());
    let mut out = x0.scale(c0);
    out.add_assign(&eps.scale(c1))?;
    Ok(out)
}

/// eps = (x_t − √(ᾱ_t)·x̂0) / √(1 − ᾱ_t); undefined at ᾱ_t = 1.
pub fn x0_to_eps<T: Scalar>(
    x_t: &Tensor2<T>,
    x0_hat: &Tensor2<T>,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<Tensor2<T>> {
    sched.check_t(t)?;
    let ab = sched.alpha_bar(t);
    if ab >= 1.0 {
        return Err(Error::DivisionGuard { t });
    }
    let c0 = T::from_f64(ab.sqrt());
    let inv = T::from_f64(1.0 / (1.0 - ab).sqrt());
    let mut out = x_t.sub(&x0_hat.scale(c0))?;
    out = out.scale(inv);
    Ok(out)
}

/// x̂0 = (x_t − √(1 − ᾱ_t)·ε̂) / √(ᾱ_t); the inverse bridge used when the
/// model predicts noise.
pub fn eps_to_x0<T: Scalar>(
    x_t: &Tensor2<T>,
    eps_hat: &Tensor2<T>,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<Tensor2<T>> {
    sched.check_t(t)?;
    let ab = sched.alpha_bar(t);
    let c1 = T::from_f64((1.0 - ab).sqrt());
    let inv = T::from_f64(1.0 / ab.sqrt());
    let mut out = x_t.sub(&eps_hat.scale(c1))?;
    out = out.scale(inv);
    Ok(out)
}

/// What a denoiser's output means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    CleanSignal,
    Noise,
}

/// Anything that maps (x_t, p, t) to a prediction; implemented by the
/// trained network and by test oracles.
pub trait Denoiser<T: Scalar> {
    fn predict(&self, x_t: &Tensor2<T>, p: &Tensor2<T>, t: usize) -> Result<Tensor2<T>>;

    fn prediction(&self) -> Prediction {
        Prediction::CleanSignal
    }

    /// Width of the signal being denoised.
    fn signal_dim(&self) -> usize;
}

/// Adapter exposing [`ModelParams`] as a denoiser.
pub struct ModelDenoiser<'a, T> {
    pub params: &'a ModelParams<T>,
    pub prediction: Prediction,
}

impl<'a, T: Scalar> ModelDenoiser<'a, T> {
    pub fn clean(params: &'a ModelParams<T>) -> Self {
        Self {
            params,
            prediction: Prediction::CleanSignal,
        }
    }
}

impl<T: Scalar> Denoiser<T> for ModelDenoiser<'_, T> {
    fn predict(&self, x_t: &Tensor2<T>, p: &Tensor2<T>, t: usize) -> Result<Tensor2<T>> {
        diffusion_forward(self.params, x_t, p, t)
    }

    fn prediction(&self) -> Prediction {
        self.prediction
    }

    fn signal_dim(&self) -> usize {
        self.params.config().in_dim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Ddim,
    Ddpm,
}

/// Sampler selection plus the strictly decreasing timestep subset it visits.
#[derive(Debug, Clone)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    pub timesteps: Vec<usize>,
}

impl SamplerSpec {
    /// DDIM over K evenly spaced steps of a T-step schedule.
    pub fn ddim(t_total: usize, k: usize) -> Result<Self> {
        if k == 0 || k > t_total {
            return Err(Error::EmptySubset);
        }
        Ok(Self {
            kind: SamplerKind::Ddim,
            timesteps: ddim_timestep_subset(t_total, k),
        })
    }

    /// Full-schedule ancestral sampling.
    pub fn ddpm(t_total: usize) -> Self {
        Self {
            kind: SamplerKind::Ddpm,
            timesteps: (0..t_total).rev().collect(),
        }
    }

    pub fn num_steps(&self) -> usize {
        self.timesteps.len()
    }
}

/// Evenly spaced descending subset: floor(T·(K−i)/K) − 1 for i = 0..K−1.
/// The first index is always T−1.
pub fn ddim_timestep_subset(t_total: usize, k: usize) -> Vec<usize> {
    (0..k)
        .map(|i| (t_total * (k - i)) / k - 1)
        .collect()
}

fn resolve_x0<T: Scalar>(
    model: &impl Denoiser<T>,
    x: &Tensor2<T>,
    p: &Tensor2<T>,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<Tensor2<T>> {
    let out = model.predict(x, p, t)?;
    match model.prediction() {
        Prediction::CleanSignal => Ok(out),
        Prediction::Noise => eps_to_x0(x, &out, t, sched),
    }
}

/// Deterministic DDIM (η = 0). Starts from seeded standard normal noise,
/// walks the spec's timestep subset, and returns the final clean-signal
/// prediction. The noise source is read exactly once.
pub fn ddim_sample<T: Scalar>(
    model: &impl Denoiser<T>,
    p: &Tensor2<T>,
    spec: &SamplerSpec,
    sched: &NoiseSchedule,
    noise: &mut impl NoiseSource<T>,
) -> Result<Tensor2<T>> {
    if spec.kind != SamplerKind::Ddim {
        return Err(Error::Config("sampler spec is not DDIM".into()));
    }
    if spec.timesteps.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut x = noise.standard_normal(p.rows(), model.signal_dim());
    for (i, &t_k) in spec.timesteps.iter().enumerate() {
        let x0_hat = resolve_x0(model, &x, p, t_k, sched)?;
        if i + 1 == spec.timesteps.len() {
            return Ok(x0_hat);
        }
        let eps_hat = x0_to_eps(&x, &x0_hat, t_k, sched)?;
        let t_next = spec.timesteps[i + 1];
        let ab = sched.alpha_bar(t_next);
        let mut next = x0_hat.scale(T::from_f64(ab.sqrt()));
        next.add_assign(&eps_hat.scale(T::from_f64((1.0 - ab).sqrt())))?;
        x = next;
    }
    unreachable!("loop returns on the final subset entry");
}

/// Convenience wrapper seeding the crate's deterministic generator.
pub fn ddim_sample_seeded<T: Scalar>(
    model: &impl Denoiser<T>,
    p: &Tensor2<T>,
    spec: &SamplerSpec,
    sched: &NoiseSchedule,
    seed: u64,
) -> Result<Tensor2<T>> {
    ddim_sample(model, p, spec, sched, &mut ChaChaNoise::seed_from_u64(seed))
}

/// Ancestral DDPM over the full schedule: x_{t−1} = μ_θ + σ_t·z with
/// σ_t² = β_t and z = 0 at t = 0. `with_step_noise = false` forces z = 0
/// everywhere (used by algebraic-collapse tests).
pub fn ddpm_sample_opts<T: Scalar>(
    model: &impl Denoiser<T>,
    p: &Tensor2<T>,
    sched: &NoiseSchedule,
    noise: &mut impl NoiseSource<T>,
    with_step_noise: bool,
) -> Result<Tensor2<T>> {
    let mut x = noise.standard_normal(p.rows(), model.signal_dim());
    for t in (0..sched.len()).rev() {
        let x0_hat = resolve_x0(model, &x, p, t, sched)?;
        let eps_hat = x0_to_eps(&x, &x0_hat, t, sched)?;
        let alpha_t = sched.alpha(t);
        let ab_t = sched.alpha_bar(t);
        let coef = T::from_f64((1.0 - alpha_t) / (1.0 - ab_t).sqrt());
        let inv_sqrt_alpha = T::from_f64(1.0 / alpha_t.sqrt());
        let mut mu = x.sub(&eps_hat.scale(coef))?;
        mu = mu.scale(inv_sqrt_alpha);
        x = if t > 0 && with_step_noise {
            let z = noise.standard_normal(mu.rows(), mu.cols());
            let sigma = T::from_f64(sched.beta(t).sqrt());
            let mut next = mu;
            next.add_assign(&z.scale(sigma))?;
            next
        } else {
            mu
        };
    }
    Ok(x)
}

pub fn ddpm_sample<T: Scalar>(
    model: &impl Denoiser<T>,
    p: &Tensor2<T>,
    sched: &NoiseSchedule,
    noise: &mut impl NoiseSource<T>,
) -> Result<Tensor2<T>> {
    ddpm_sample_opts(model, p, sched, noise, true)
}

/// Eq.-4 objective: mean-squared error between the clean signal and the
/// model's prediction of it from the noised input; gradients accumulate
/// into the parameter buffers. Returns the loss.
pub fn training_loss_dm<T: Scalar>(
    params: &mut ModelParams<T>,
    x0: &Tensor2<T>,
    p: &Tensor2<T>,
    t: usize,
    eps: &Tensor2<T>,
    sched: &NoiseSchedule,
) -> Result<f64> {
    diffusion_training_loss(params, x0, p, t, eps, sched, Prediction::CleanSignal)
}

/// Training objective for either parameterization. For `Noise` the target
/// is the injected eps and the model output is read as ε̂.
pub fn diffusion_training_loss<T: Scalar>(
    params: &mut ModelParams<T>,
    x0: &Tensor2<T>,
    p: &Tensor2<T>,
    t: usize,
    eps: &Tensor2<T>,
    sched: &NoiseSchedule,
    prediction: Prediction,
) -> Result<f64> {
    let x_t = q_sample(x0, t, eps, sched)?;
    let (out, cache) = forward_with_cache(params, &x_t, Some(p), Some(t))?;
    let target = match prediction {
        Prediction::CleanSignal => x0,
        Prediction::Noise => eps,
    };
    let diff = out.sub(target)?;
    let loss = diff.mean_square_f64();
    let d_out = diff.scale(T::from_f64(2.0 / diff.len() as f64));
    backward(params, &cache, &d_out)?;
    Ok(loss)
}
