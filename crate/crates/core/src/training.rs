//! Training loops for the predictive network and the diffusion model.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffusion::{eps_to_x0, q_sample, ChaChaNoise, NoiseSchedule, NoiseSource};
use crate::error::{Error, Result};
use crate::features::{build_sparse_input, window, MotionSequence, SparseInput, MOTION_WIDTH};
use crate::lossmetrics::{foot_contact_mask, geometric_loss_with_grad, FootContactMask, GeomLossWeights, DEFAULT_CONTACT_SPEED};
use crate::network::{backward, forward_with_cache, MlpConfig, ModelParams, TimestepMode};
use crate::numerics::{OptimizerKind, OptimizerState, Tensor2};
use crate::rotations::Vec3;
use crate::skeleton::SkeletonTree;
use crate::scalar::Scalar;

/// Training hyperparameters plus the architecture dimensions they drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_after: f64,
    pub lr_switch_iter: u64,
    pub weight_decay: f64,
    pub total_iters: u64,
    pub seed: u64,
    /// Diffusion steps T.
    pub diffusion_steps: usize,
    pub w_pos: f64,
    pub w_vel: f64,
    pub w_foot: f64,
    pub predict_noise: bool,
    pub timestep_mode: TimestepMode,
    pub num_blocks: usize,
    pub latent_dim: usize,
    pub seq_len: usize,
    pub embed_dim: usize,
    pub log_interval: u64,
    pub checkpoint_interval: u64,
}

impl TrainConfig {
    /// Paper-scale hyperparameters: batch 256, lr 3e-4 dropping to 1e-5
    /// after 200k iterations, weight decay 1e-4, T = 1000.
    pub fn paper() -> Self {
        Self {
            batch_size: 256,
            lr_initial: 3e-4,
            lr_after: 1e-5,
            lr_switch_iter: 200_000,
            weight_decay: 1e-4,
            total_iters: 300_000,
            seed: 0,
            diffusion_steps: 1000,
            w_pos: 0.0,
            w_vel: 0.0,
            w_foot: 0.0,
            predict_noise: false,
            timestep_mode: TimestepMode::RepIn,
            num_blocks: 12,
            latent_dim: 512,
            seq_len: 196,
            embed_dim: 512,
            log_interval: 1000,
            checkpoint_interval: 0,
        }
    }

    /// Desk-scale preset: N = 32, D = 64, M = 4, batch 16, T = 100.
    pub fn toy() -> Self {
        Self {
            batch_size: 16,
            lr_initial: 3e-4,
            lr_after: 1e-5,
            lr_switch_iter: 4_000,
            weight_decay: 1e-4,
            total_iters: 2_000,
            seed: 0,
            diffusion_steps: 100,
            w_pos: 0.0,
            w_vel: 0.0,
            w_foot: 0.0,
            predict_noise: false,
            timestep_mode: TimestepMode::RepIn,
            num_blocks: 4,
            latent_dim: 64,
            seq_len: 32,
            embed_dim: 64,
            log_interval: 200,
            checkpoint_interval: 0,
        }
    }

    /// The two-level step schedule.
    pub fn lr_at(&self, iter: u64) -> f64 {
        if iter < self.lr_switch_iter {
            self.lr_initial
        } else {
            self.lr_after
        }
    }

    pub fn diffusion_model_config(&self) -> MlpConfig {
        MlpConfig {
            num_blocks: self.num_blocks,
            latent_dim: self.latent_dim,
            seq_len: self.seq_len,
            in_dim: MOTION_WIDTH,
            cond_dim: crate::features::SPARSE_WIDTH,
            out_dim: MOTION_WIDTH,
            timestep_mode: self.timestep_mode,
            embed_dim: self.embed_dim,
        }
    }

    pub fn predictive_model_config(&self) -> MlpConfig {
        MlpConfig {
            num_blocks: self.num_blocks,
            latent_dim: self.latent_dim,
            seq_len: self.seq_len,
            in_dim: crate::features::SPARSE_WIDTH,
            cond_dim: 0,
            out_dim: MOTION_WIDTH,
            timestep_mode: TimestepMode::None,
            embed_dim: self.embed_dim,
        }
    }

    pub fn geom_weights(&self) -> GeomLossWeights {
        GeomLossWeights {
            pos: self.w_pos,
            vel: self.w_vel,
            foot: self.w_foot,
        }
    }

    /// Parses a plain-text `key = value` file. An optional `preset` key
    /// (`toy` or `paper`) selects the baseline; remaining keys override it.
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_str_kv(&std::fs::read_to_string(path)?)
    }

    pub fn from_str_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::toy();
        // preset first, wherever it appears
        for line in text.lines() {
            if let Some(("preset", v)) = parse_kv(line)? {
                cfg = match v {
                    "toy" => Self::toy(),
                    "paper" => Self::paper(),
                    other => return Err(Error::Config(format!("unknown preset `{other}`"))),
                };
            }
        }
        for line in text.lines() {
            let Some((key, value)) = parse_kv(line)? else {
                continue;
            };
            let parse_f = || -> Result<f64> {
                value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad number for `{key}`: `{value}`")))
            };
            let parse_u = || -> Result<u64> {
                value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad integer for `{key}`: `{value}`")))
            };
            match key {
                "preset" => {}
                "batch_size" => cfg.batch_size = parse_u()? as usize,
                "lr_initial" => cfg.lr_initial = parse_f()?,
                "lr_after" => cfg.lr_after = parse_f()?,
                "lr_switch_iter" => cfg.lr_switch_iter = parse_u()?,
                "weight_decay" => cfg.weight_decay = parse_f()?,
                "total_iters" => cfg.total_iters = parse_u()?,
                "seed" => cfg.seed = parse_u()?,
                "diffusion_steps" => cfg.diffusion_steps = parse_u()? as usize,
                "w_pos" => cfg.w_pos = parse_f()?,
                "w_vel" => cfg.w_vel = parse_f()?,
                "w_foot" => cfg.w_foot = parse_f()?,
                "predict_noise" => {
                    cfg.predict_noise = value
                        .parse()
                        .map_err(|_| Error::Config(format!("bad bool `{value}`")))?
                }
                "timestep_mode" => cfg.timestep_mode = TimestepMode::parse(value)?,
                "num_blocks" => cfg.num_blocks = parse_u()? as usize,
                "latent_dim" => cfg.latent_dim = parse_u()? as usize,
                "seq_len" => cfg.seq_len = parse_u()? as usize,
                "embed_dim" => cfg.embed_dim = parse_u()? as usize,
                "log_interval" => cfg.log_interval = parse_u()?,
                "checkpoint_interval" => cfg.checkpoint_interval = parse_u()?,
                other => return Err(Error::Config(format!("unknown config key `{other}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "batch_size = {}\nlr_initial = {}\nlr_after = {}\nlr_switch_iter = {}\n\
             weight_decay = {}\ntotal_iters = {}\nseed = {}\ndiffusion_steps = {}\n\
             w_pos = {}\nw_vel = {}\nw_foot = {}\npredict_noise = {}\ntimestep_mode = {}\n\
             num_blocks = {}\nlatent_dim = {}\nseq_len = {}\nembed_dim = {}\n\
             log_interval = {}\ncheckpoint_interval = {}\n",
            self.batch_size,
            self.lr_initial,
            self.lr_after,
            self.lr_switch_iter,
            self.weight_decay,
            self.total_iters,
            self.seed,
            self.diffusion_steps,
            self.w_pos,
            self.w_vel,
            self.w_foot,
            self.predict_noise,
            self.timestep_mode.name(),
            self.num_blocks,
            self.latent_dim,
            self.seq_len,
            self.embed_dim,
            self.log_interval,
            self.checkpoint_interval,
        )
    }
}

fn parse_kv(line: &str) -> Result<Option<(&str, &str)>> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected `key = value`, got `{line}`")))?;
    Ok(Some((k.trim(), v.trim())))
}

/// One windowed training example with its ground-truth tracks.
#[derive(Debug, Clone)]
pub struct TrainSample<T> {
    pub sparse: SparseInput<T>,
    pub motion: MotionSequence<T>,
    pub root_trans: Vec<Vec3<T>>,
    pub contact: FootContactMask,
}

/// Builds N-frame training samples from full sequences: conditioning
/// features, windowing at stride N, and precomputed foot-contact masks.
pub fn prepare_samples<T: Scalar>(
    tree: &SkeletonTree<T>,
    sequences: &[(MotionSequence<T>, Vec<Vec3<T>>)],
    seq_len: usize,
) -> Result<Vec<TrainSample<T>>> {
    let mut out = Vec::new();
    for (motion, root_trans) in sequences {
        if motion.frames() != root_trans.len() {
            return Err(Error::LengthMismatch {
                context: "prepare_samples",
                left: motion.frames(),
                right: root_trans.len(),
            });
        }
        let chunks = window(&motion.data, seq_len, seq_len)?;
        for (offset, chunk) in chunks {
            let chunk_motion = MotionSequence::new(chunk, motion.fps)?;
            let chunk_root = root_trans[offset..offset + seq_len].to_vec();
            let sparse = build_sparse_input(tree, &chunk_motion, &chunk_root)?;
            let contact = foot_contact_mask(tree, &chunk_motion, &chunk_root, DEFAULT_CONTACT_SPEED)?;
            out.push(TrainSample {
                sparse,
                motion: chunk_motion,
                root_trans: chunk_root,
                contact,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

/// One logged training step.
#[derive(Debug, Clone, Copy)]
pub struct TrainRecord {
    pub iter: u64,
    pub loss: f64,
    pub loss_dm: f64,
    pub loss_pos: f64,
    pub loss_vel: f64,
    pub loss_foot: f64,
    pub lr: f64,
    pub elapsed_s: f64,
}

impl TrainRecord {
    pub fn to_line(&self) -> String {
        format!(
            "iter={} loss={:.6e} dm={:.6e} pos={:.6e} vel={:.6e} foot={:.6e} lr={:.3e} elapsed_s={:.3}",
            self.iter, self.loss, self.loss_dm, self.loss_pos, self.loss_vel, self.loss_foot,
            self.lr, self.elapsed_s
        )
    }
}

/// Line-oriented training log; iterations strictly increase.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
}

impl TrainLog {
    fn push(&mut self, r: TrainRecord) {
        if let Some(last) = self.records.last() {
            assert!(r.iter > last.iter, "training log must advance");
        }
        self.records.push(r);
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&r.to_line());
            s.push('\n');
        }
        s
    }
}

/// Called after every optimizer step; used by the CLI for periodic
/// checkpoints.
pub type StepHook<'a, T> = dyn FnMut(u64, &ModelParams<T>) -> Result<()> + 'a;

/// Trains the predictive baseline: mean squared 6d rotation error between
/// the network output and the ground-truth motion, Adam with the two-level
/// schedule. Deterministic per seed.
pub fn train_mlp<T: Scalar>(
    samples: &[TrainSample<T>],
    cfg: &TrainConfig,
) -> Result<(ModelParams<T>, TrainLog)> {
    train_mlp_from(samples, cfg, None, &mut |_, _| Ok(()))
}

pub fn train_mlp_from<T: Scalar>(
    samples: &[TrainSample<T>],
    cfg: &TrainConfig,
    resume: Option<(ModelParams<T>, u64)>,
    hook: &mut StepHook<T>,
) -> Result<(ModelParams<T>, TrainLog)> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (mut params, start_iter) = match resume {
        Some((p, it)) => (p, it),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (
                ModelParams::init(cfg.predictive_model_config(), &mut rng)?,
                0,
            )
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7261_696e ^ start_iter);
    let mut opt = OptimizerState::new(OptimizerKind::Adam, cfg.lr_initial, cfg.weight_decay);
    let mut log = TrainLog::default();
    let t0 = Instant::now();
    let inv = 2.0 / (cfg.batch_size as f64 * (cfg.seq_len * MOTION_WIDTH) as f64);
    for iter in start_iter..cfg.total_iters {
        opt.lr = cfg.lr_at(iter);
        params.zero_grads();
        let mut loss_acc = 0f64;
        for _ in 0..cfg.batch_size {
            let sample = &samples[rng.gen_range(0..samples.len())];
            let (out, cache) = forward_with_cache(&params, &sample.sparse.data, None, None)?;
            let diff = out.sub(&sample.motion.data)?;
            loss_acc += diff.mean_square_f64() / cfg.batch_size as f64;
            let d_out = diff.scale(T::from_f64(inv));
            backward(&mut params, &cache, &d_out)?;
        }
        let mut refs: Vec<&mut crate::numerics::ParamWithGrad<T>> = params
            .named_params_mut()
            .into_iter()
            .map(|(_, p)| p)
            .collect();
        opt.step(&mut refs);
        drop(refs);
        hook(iter + 1, &params)?;
        if (iter + 1) % cfg.log_interval == 0 || iter + 1 == cfg.total_iters {
            log.push(TrainRecord {
                iter: iter + 1,
                loss: loss_acc,
                loss_dm: loss_acc,
                loss_pos: 0.0,
                loss_vel: 0.0,
                loss_foot: 0.0,
                lr: opt.lr,
                elapsed_s: t0.elapsed().as_secs_f64(),
            });
        }
    }
    Ok((params, log))
}

/// Trains the diffusion model: per batch element a uniform timestep and
/// fresh noise are drawn, the clean-signal (or noise) objective plus any
/// enabled geometric losses are backpropagated, AdamW updates with the
/// two-level schedule. Deterministic per seed.
pub fn train_diffusion<T: Scalar>(
    tree: &SkeletonTree<T>,
    samples: &[TrainSample<T>],
    cfg: &TrainConfig,
) -> Result<(ModelParams<T>, TrainLog)> {
    train_diffusion_from(tree, samples, cfg, None, &mut |_, _| Ok(()))
}

pub fn train_diffusion_from<T: Scalar>(
    tree: &SkeletonTree<T>,
    samples: &[TrainSample<T>],
    cfg: &TrainConfig,
    resume: Option<(ModelParams<T>, u64)>,
    hook: &mut StepHook<T>,
) -> Result<(ModelParams<T>, TrainLog)> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sched = NoiseSchedule::cosine_default(cfg.diffusion_steps);
    let weights = cfg.geom_weights();
    let (mut params, start_iter) = match resume {
        Some((p, it)) => (p, it),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (
                ModelParams::init(cfg.diffusion_model_config(), &mut rng)?,
                0,
            )
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6469_6666 ^ start_iter);
    let mut opt = OptimizerState::new(OptimizerKind::AdamW, cfg.lr_initial, cfg.weight_decay);
    let mut log = TrainLog::default();
    let t0 = Instant::now();
    let elem_count = (cfg.seq_len * MOTION_WIDTH) as f64;
    for iter in start_iter..cfg.total_iters {
        opt.lr = cfg.lr_at(iter);
        params.zero_grads();
        let mut dm_acc = 0f64;
        let mut pos_acc = 0f64;
        let mut vel_acc = 0f64;
        let mut foot_acc = 0f64;
        for _ in 0..cfg.batch_size {
            let sample = &samples[rng.gen_range(0..samples.len())];
            let t = rng.gen_range(0..cfg.diffusion_steps);
            let mut noise = ChaChaNoise(ChaCha8Rng::seed_from_u64(rng.gen()));
            let eps: Tensor2<T> = noise.standard_normal(cfg.seq_len, MOTION_WIDTH);
            let x0 = &sample.motion.data;
            let x_t = q_sample(x0, t, &eps, &sched)?;
            let (out, cache) = forward_with_cache(&params, &x_t, Some(&sample.sparse.data), Some(t))?;

            let target = if cfg.predict_noise { &eps } else { x0 };
            let diff = out.sub(target)?;
            dm_acc += diff.mean_square_f64() / cfg.batch_size as f64;
            let mut d_out = diff.scale(T::from_f64(2.0 / (elem_count * cfg.batch_size as f64)));

            if weights.any() {
                // geometric losses act on the implied clean signal
                let (x0_hat, chain) = if cfg.predict_noise {
                    let ab = sched.alpha_bar(t);
                    (
                        eps_to_x0(&x_t, &out, t, &sched)?,
                        -( (1.0 - ab).sqrt() / ab.sqrt() ),
                    )
                } else {
                    (out.clone(), 1.0)
                };
                let (values, grad) = geometric_loss_with_grad(
                    tree,
                    &sample.motion,
                    &x0_hat,
                    &sample.root_trans,
                    &sample.contact,
                    &weights,
                )?;
                pos_acc += values.pos / cfg.batch_size as f64;
                vel_acc += values.vel / cfg.batch_size as f64;
                foot_acc += values.foot / cfg.batch_size as f64;
                d_out.add_assign(&grad.scale(T::from_f64(chain / cfg.batch_size as f64)))?;
            }
            backward(&mut params, &cache, &d_out)?;
        }
        let mut refs: Vec<&mut crate::numerics::ParamWithGrad<T>> = params
            .named_params_mut()
            .into_iter()
            .map(|(_, p)| p)
            .collect();
        opt.step(&mut refs);
        drop(refs);
        hook(iter + 1, &params)?;
        if (iter + 1) % cfg.log_interval == 0 || iter + 1 == cfg.total_iters {
            let total = dm_acc
                + weights.pos * pos_acc
                + weights.vel * vel_acc
                + weights.foot * foot_acc;
            log.push(TrainRecord {
                iter: iter + 1,
                loss: total,
                loss_dm: dm_acc,
                loss_pos: pos_acc,
                loss_vel: vel_acc,
                loss_foot: foot_acc,
                lr: opt.lr,
                elapsed_s: t0.elapsed().as_secs_f64(),
            });
        }
    }
    Ok((params, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{diffusion_training_loss, Prediction as Pred};
    use crate::gradcheck::{assert_grads_close, central_diff};
    use crate::skeleton::default_test_skeleton;
    use crate::synthdata::{generate_gait, GaitParams};

    fn toy_samples(count: usize, frames: usize) -> Vec<TrainSample<f32>> {
        let tree = default_test_skeleton::<f32>();
        let seqs: Vec<(MotionSequence<f32>, Vec<Vec3<f32>>)> = (0..count)
            .map(|i| {
                let params = GaitParams {
                    frames,
                    cycle_hz: 0.9 + 0.1 * i as f64,
                    phase_offset: 0.5 * i as f64,
                    ..GaitParams::default()
                };
                let (m, rt, _) = generate_gait(&tree, &params, i as u64).unwrap();
                (m, rt)
            })
            .collect();
        prepare_samples(&tree, &seqs, frames).unwrap()
    }

    #[test]
    fn lr_schedule_is_a_two_level_step() {
        let mut cfg = TrainConfig::paper();
        cfg.lr_switch_iter = 200_000;
        assert_eq!(cfg.lr_at(0), 3e-4);
        assert_eq!(cfg.lr_at(199_999), 3e-4);
        assert_eq!(cfg.lr_at(200_000), 1e-5);
        assert_eq!(cfg.lr_at(250_000), 1e-5);
    }

    #[test]
    fn config_file_round_trip_and_errors() {
        let cfg = TrainConfig {
            batch_size: 8,
            w_pos: 1.0,
            timestep_mode: TimestepMode::Concat,
            ..TrainConfig::toy()
        };
        let parsed = TrainConfig::from_str_kv(&cfg.to_kv_string()).unwrap();
        assert_eq!(parsed, cfg);
        assert!(TrainConfig::from_str_kv("preset = paper\n").unwrap().latent_dim == 512);
        assert!(TrainConfig::from_str_kv("bogus_key = 3\n").is_err());
        assert!(TrainConfig::from_str_kv("batch_size = abc\n").is_err());
    }

    #[test]
    fn mlp_overfits_a_single_sequence() {
        let samples = toy_samples(1, 32);
        let cfg = TrainConfig {
            batch_size: 2,
            total_iters: 500,
            log_interval: 50,
            seed: 5,
            num_blocks: 2,
            latent_dim: 32,
            seq_len: 32,
            embed_dim: 32,
            ..TrainConfig::toy()
        };
        let (_, log) = train_mlp(&samples, &cfg).unwrap();
        let first = log.records.first().unwrap().loss;
        let last = log.final_loss().unwrap();
        assert!(
            last < 0.01 * first,
            "loss {last:.3e} did not fall below 1% of {first:.3e}"
        );
    }

    #[test]
    fn training_is_bitwise_reproducible_per_seed() {
        let samples = toy_samples(2, 32);
        let cfg = TrainConfig {
            batch_size: 2,
            total_iters: 20,
            log_interval: 20,
            seed: 9,
            num_blocks: 1,
            latent_dim: 16,
            seq_len: 32,
            embed_dim: 16,
            ..TrainConfig::toy()
        };
        let (pa, la) = train_mlp(&samples, &cfg).unwrap();
        let (pb, lb) = train_mlp(&samples, &cfg).unwrap();
        assert_eq!(la.final_loss().unwrap().to_bits(), lb.final_loss().unwrap().to_bits());
        for ((_, a), (_, b)) in pa.named_params().iter().zip(pb.named_params()) {
            let bits_a: Vec<u32> = a.value.as_slice().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u32> = b.value.as_slice().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }

        let tree = default_test_skeleton::<f32>();
        let (da, dla) = train_diffusion(&tree, &samples, &cfg).unwrap();
        let (db, dlb) = train_diffusion(&tree, &samples, &cfg).unwrap();
        assert_eq!(
            dla.final_loss().unwrap().to_bits(),
            dlb.final_loss().unwrap().to_bits()
        );
        let a0 = &da.named_params()[0].1.value;
        let b0 = &db.named_params()[0].1.value;
        assert_eq!(a0.as_slice(), b0.as_slice());
    }

    #[test]
    fn zero_geometric_weights_match_pure_objective_bitwise() {
        let tree = default_test_skeleton::<f32>();
        let samples = toy_samples(2, 32);
        let base = TrainConfig {
            batch_size: 2,
            total_iters: 10,
            log_interval: 10,
            seed: 31,
            num_blocks: 1,
            latent_dim: 16,
            seq_len: 32,
            embed_dim: 16,
            ..TrainConfig::toy()
        };
        let zeroed = TrainConfig {
            w_pos: 0.0,
            w_vel: 0.0,
            w_foot: 0.0,
            ..base
        };
        let (_, la) = train_diffusion(&tree, &samples, &base).unwrap();
        let (_, lb) = train_diffusion(&tree, &samples, &zeroed).unwrap();
        assert_eq!(
            la.final_loss().unwrap().to_bits(),
            lb.final_loss().unwrap().to_bits()
        );
    }

    #[test]
    fn geometric_losses_participate_when_enabled() {
        let tree = default_test_skeleton::<f32>();
        let samples = toy_samples(2, 32);
        let cfg = TrainConfig {
            batch_size: 2,
            total_iters: 30,
            log_interval: 30,
            seed: 13,
            w_pos: 1.0,
            w_vel: 1.0,
            w_foot: 1.0,
            num_blocks: 1,
            latent_dim: 16,
            seq_len: 32,
            embed_dim: 16,
            ..TrainConfig::toy()
        };
        let (params, log) = train_diffusion(&tree, &samples, &cfg).unwrap();
        assert!(params.all_finite());
        let last = log.records.last().unwrap();
        // after the output projection warms up, the geometric terms engage
        assert!(last.loss_pos > 0.0, "loss_pos never engaged");
        assert!(last.loss.is_finite());
    }

    #[test]
    fn predict_noise_objective_passes_gradient_check() {
        // tiny f64 model, FD over a couple of parameters
        let cfg = MlpConfig {
            num_blocks: 1,
            latent_dim: 8,
            seq_len: 4,
            in_dim: 6,
            cond_dim: 4,
            out_dim: 6,
            timestep_mode: TimestepMode::RepIn,
            embed_dim: 6,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut params = ModelParams::<f64>::init(cfg, &mut rng).unwrap();
        for (_, p) in params.named_params_mut() {
            for v in p.value.as_mut_slice() {
                *v = rng.gen_range(-0.3..0.3);
            }
        }
        let sched = NoiseSchedule::cosine_default(20);
        let x0 = Tensor2::<f64>::from_fn(4, 6, |_, _| rng.gen_range(-1.0..1.0));
        let p = Tensor2::<f64>::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let eps = Tensor2::<f64>::from_fn(4, 6, |_, _| rng.gen_range(-1.0..1.0));
        let t = 7usize;

        for pred in [Pred::CleanSignal, Pred::Noise] {
            params.zero_grads();
            diffusion_training_loss(&mut params, &x0, &p, t, &eps, &sched, pred).unwrap();
            let name = "block00.feature.weight".to_string();
            let (flat, analytic): (Vec<f64>, Vec<f64>) = {
                let np = params.named_params();
                let q = &np.iter().find(|(n, _)| *n == name).unwrap().1;
                (q.value.as_slice().to_vec(), q.grad.as_slice().to_vec())
            };
            let numeric = central_diff(&flat, 1e-4, |vals| {
                let mut probe = params.clone();
                {
                    let mut np = probe.named_params_mut();
                    let target = np.iter_mut().find(|(n, _)| *n == name).unwrap();
                    target.1.value.as_mut_slice().copy_from_slice(vals);
                }
                probe.zero_grads();
                diffusion_training_loss(&mut probe, &x0, &p, t, &eps, &sched, pred).unwrap()
            });
            assert_grads_close(&analytic, &numeric, 1e-4, 1e-10);
        }
    }

    #[test]
    fn prepare_samples_windows_long_sequences() {
        let tree = default_test_skeleton::<f32>();
        let params = GaitParams {
            frames: 70,
            ..GaitParams::default()
        };
        let (m, rt, _) = generate_gait(&tree, &params, 3).unwrap();
        let samples = prepare_samples(&tree, &[(m, rt)], 32).unwrap();
        // offsets 0, 32, and the tail window at 38
        assert_eq!(samples.len(), 3);
        for s in &samples {
            assert_eq!(s.motion.frames(), 32);
            assert_eq!(s.sparse.frames(), 32);
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let cfg = TrainConfig::toy();
        assert!(train_mlp::<f32>(&[], &cfg).is_err());
    }
}
