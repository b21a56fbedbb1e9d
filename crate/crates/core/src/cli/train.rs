//! `train`: predictive baseline or diffusion model.

use std::path::Path;
use std::time::Instant;

use crate::cli::RunManifest;
use crate::error::{Error, Result};
use crate::features::MotionSequence;
use crate::network::{load_checkpoint, save_checkpoint, CheckpointMeta, TimestepMode};
use crate::skeleton::default_test_skeleton;
use crate::synthdata::{load_dataset, Split};
use crate::training::{
    prepare_samples, train_diffusion_from, train_mlp_from, TrainConfig, TrainSample,
};
use crate::Real;

/// Loads the train-split samples of a dataset directory.
pub(crate) fn load_train_samples(
    data: &Path,
    seq_len: usize,
) -> Result<Vec<TrainSample<Real>>> {
    let tree = default_test_skeleton::<Real>();
    let dataset = load_dataset::<Real>(data)?;
    let seqs: Vec<(MotionSequence<Real>, Vec<[Real; 3]>)> = dataset
        .into_iter()
        .filter(|(_, _, split)| *split == Split::Train)
        .map(|(name, file, _)| {
            let root = file.root_trans.ok_or_else(|| {
                Error::Config(format!("{name}: missing ROOT track needed for training"))
            })?;
            Ok((MotionSequence::new(file.data, file.fps)?, root))
        })
        .collect::<Result<_>>()?;
    if seqs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    prepare_samples(&tree, &seqs, seq_len)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_train(
    model: &str,
    config_path: &Path,
    data: &Path,
    out: &Path,
    timestep_mode: Option<&str>,
    seed: Option<u64>,
    iters: Option<u64>,
    resume: Option<&Path>,
) -> Result<()> {
    let t0 = Instant::now();
    let mut cfg = TrainConfig::from_file(config_path).map_err(|e| match e {
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            Error::Config(format!("config file not found: {}", config_path.display()))
        }
        other => other,
    })?;
    if let Some(mode) = timestep_mode {
        cfg.timestep_mode = TimestepMode::parse(mode)?;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(iters) = iters {
        cfg.total_iters = iters;
    }
    if !data.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("dataset directory not found: {}", data.display()),
        )));
    }
    let samples = load_train_samples(data, cfg.seq_len)?;
    std::fs::create_dir_all(out)?;

    let resume_state = match resume {
        Some(path) => {
            let (params, meta) = load_checkpoint::<Real>(path)?;
            println!(
                "resuming from {} at iteration {}",
                path.display(),
                meta.trained_iters
            );
            Some((params, meta.trained_iters))
        }
        None => None,
    };

    let make_meta = |iters: u64, cfg: &TrainConfig, is_diffusion: bool| CheckpointMeta {
        train_timesteps: if is_diffusion { cfg.diffusion_steps } else { 0 },
        predict_noise: cfg.predict_noise && is_diffusion,
        trained_iters: iters,
    };
    let ckpt_path = out.join("checkpoint.ckpt");

    let (params, log) = match model {
        "mlp" => {
            let interval = cfg.checkpoint_interval;
            let out_dir = out.to_path_buf();
            let cfg_copy = cfg;
            let mut hook = move |iter: u64, params: &crate::network::ModelParams<Real>| {
                if interval > 0 && iter % interval == 0 {
                    let path = out_dir.join(format!("checkpoint_{iter:08}.ckpt"));
                    save_checkpoint(params, &make_meta(iter, &cfg_copy, false), &path)?;
                }
                Ok(())
            };
            train_mlp_from(&samples, &cfg, resume_state, &mut hook)?
        }
        "diffusion" => {
            let tree = default_test_skeleton::<Real>();
            let interval = cfg.checkpoint_interval;
            let out_dir = out.to_path_buf();
            let cfg_copy = cfg;
            let mut hook = move |iter: u64, params: &crate::network::ModelParams<Real>| {
                if interval > 0 && iter % interval == 0 {
                    let path = out_dir.join(format!("checkpoint_{iter:08}.ckpt"));
                    save_checkpoint(params, &make_meta(iter, &cfg_copy, true), &path)?;
                }
                Ok(())
            };
            train_diffusion_from(&tree, &samples, &cfg, resume_state, &mut hook)?
        }
        other => {
            return Err(Error::Config(format!(
                "unknown model `{other}` (expected mlp or diffusion)"
            )))
        }
    };

    save_checkpoint(
        &params,
        &make_meta(cfg.total_iters, &cfg, model == "diffusion"),
        &ckpt_path,
    )?;
    let log_path = out.join("train_log.txt");
    std::fs::write(&log_path, log.to_lines())?;
    if let Some(last) = log.records.last() {
        println!("{}", last.to_line());
    }
    println!("checkpoint: {}", ckpt_path.display());

    let mut manifest = RunManifest::new(&format!("train:{model}"), cfg.seed);
    manifest.config_snapshot = Some(cfg.to_kv_string());
    manifest.add_artifact(&ckpt_path);
    manifest.add_artifact(&log_path);
    manifest.wall_clock_s = t0.elapsed().as_secs_f64();
    manifest.append_to(out)
}
