//! `bench`: wall-clock latency of sequence generation.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cli::{format_table, RunManifest};
use crate::diffusion::{ddim_sample_seeded, ModelDenoiser, NoiseSchedule, Prediction, SamplerSpec};
use crate::error::Result;
use crate::network::{
    diffusion_forward, load_checkpoint, mlp_forward, CheckpointMeta, MlpConfig, ModelParams,
};
use crate::numerics::Tensor2;
use crate::Real;

fn median_and_p95(samples: &mut [f64]) -> (f64, f64) {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = samples[samples.len() / 2];
    let p95_idx = ((samples.len() as f64) * 0.95).ceil() as usize - 1;
    (median, samples[p95_idx.min(samples.len() - 1)])
}

pub fn cmd_bench(
    checkpoint: Option<&Path>,
    ddim_steps: usize,
    repeats: usize,
    out: &Path,
) -> Result<()> {
    let t0 = Instant::now();
    let repeats = repeats.max(1);
    let (params, meta) = match checkpoint {
        Some(path) => load_checkpoint::<Real>(path)?,
        None => {
            // latency depends on the architecture, not the weight values
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let params = ModelParams::<Real>::init(MlpConfig::diffusion_default(), &mut rng)?;
            let meta = CheckpointMeta {
                train_timesteps: 1000,
                predict_noise: false,
                trained_iters: 0,
            };
            (params, meta)
        }
    };
    let cfg = *params.config();
    let n = cfg.seq_len;
    let t_total = meta.train_timesteps.max(1);
    let sched = NoiseSchedule::cosine_default(t_total);
    let spec = SamplerSpec::ddim(t_total, ddim_steps.min(t_total))?;
    let denoiser = ModelDenoiser {
        params: &params,
        prediction: if meta.predict_noise {
            Prediction::Noise
        } else {
            Prediction::CleanSignal
        },
    };
    let p = Tensor2::<Real>::filled(n, cfg.cond_dim.max(1), 0.1);

    println!(
        "benchmarking {}-frame generation, {} DDIM steps, {} repeats (3 warmups)",
        n,
        spec.num_steps(),
        repeats
    );
    for _ in 0..3 {
        ddim_sample_seeded(&denoiser, &p, &spec, &sched, 0)?;
    }
    let mut gen_ms = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let start = Instant::now();
        ddim_sample_seeded(&denoiser, &p, &spec, &sched, r as u64)?;
        gen_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let (gen_median, gen_p95) = median_and_p95(&mut gen_ms);

    // per-step breakdown: one raw model forward at each subset timestep
    let x = Tensor2::<Real>::filled(n, cfg.in_dim, 0.1);
    let mut step_rows = Vec::new();
    for &t in &spec.timesteps {
        let start = Instant::now();
        diffusion_forward(&params, &x, &p, t)?;
        let dt = start.elapsed().as_secs_f64() * 1e3;
        step_rows.push(vec![format!("t={t}"), format!("{dt:.2} ms")]);
    }

    // single-pass predictive baseline at matching scale
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mlp_cfg = MlpConfig {
        num_blocks: cfg.num_blocks,
        latent_dim: cfg.latent_dim,
        seq_len: cfg.seq_len,
        in_dim: crate::features::SPARSE_WIDTH,
        cond_dim: 0,
        out_dim: crate::features::MOTION_WIDTH,
        timestep_mode: crate::network::TimestepMode::None,
        embed_dim: cfg.embed_dim,
    };
    let mlp = ModelParams::<Real>::init(mlp_cfg, &mut rng)?;
    let mlp_in = Tensor2::<Real>::filled(n, mlp_cfg.in_dim, 0.1);
    for _ in 0..3 {
        mlp_forward(&mlp, &mlp_in)?;
    }
    let mut mlp_ms = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        mlp_forward(&mlp, &mlp_in)?;
        mlp_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let (mlp_median, mlp_p95) = median_and_p95(&mut mlp_ms);

    let summary_rows = vec![
        vec![
            format!("diffusion {}-step generation", spec.num_steps()),
            format!("{gen_median:.2} ms"),
            format!("{gen_p95:.2} ms"),
        ],
        vec![
            "predictive single forward".to_string(),
            format!("{mlp_median:.2} ms"),
            format!("{mlp_p95:.2} ms"),
        ],
    ];
    let summary = format_table(
        &["measurement".into(), "median".into(), "p95".into()],
        &summary_rows,
    );
    let breakdown = format_table(
        &["model forward".into(), "time".into()],
        &step_rows,
    );
    print!("{summary}");
    println!("per-step model-forward breakdown:");
    print!("{breakdown}");

    std::fs::create_dir_all(out)?;
    let report_path = out.join("bench.txt");
    std::fs::write(&report_path, format!("{summary}\n{breakdown}"))?;
    let mut manifest = RunManifest::new("bench", 0);
    manifest.add_artifact(&report_path);
    manifest.wall_clock_s = t0.elapsed().as_secs_f64();
    manifest.append_to(out)
}
