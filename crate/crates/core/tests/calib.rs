//! Scratch calibration harness (not part of the final suite).

use agrol::diffusion::{ddim_sample_seeded, ModelDenoiser, NoiseSchedule, SamplerSpec};
use agrol::features::{build_sparse_input, mask_tracking_loss, MotionSequence};
use agrol::lossmetrics::{evaluate, MetricReport};
use agrol::network::{forward_with_cache, ModelParams, TimestepMode};
use agrol::skeleton::default_test_skeleton;
use agrol::synthdata::{make_dataset, GaitRanges, GeneratedSequence, Split};
use agrol::training::{prepare_samples, train_diffusion_from, train_mlp, TrainConfig, TrainSample};
use agrol::Real;

fn toy_cfg(mode: TimestepMode, seed: u64, iters: u64) -> TrainConfig {
    TrainConfig {
        seed,
        total_iters: iters,
        timestep_mode: mode,
        log_interval: 500,
        ..TrainConfig::toy()
    }
}

fn eval_seqs(
    seqs: &[&GeneratedSequence<Real>],
    params: &ModelParams<Real>,
    t_total: usize,
    k: usize,
    seed: u64,
    mask: Option<(f64, usize)>,
) -> MetricReport {
    let tree = default_test_skeleton::<Real>();
    let sched = NoiseSchedule::cosine_default(t_total);
    let spec = SamplerSpec::ddim(t_total, k).unwrap();
    let den = ModelDenoiser::clean(params);
    let mut reports = Vec::new();
    for (i, s) in seqs.iter().enumerate() {
        let sparse = build_sparse_input(&tree, &s.motion, &s.root_trans).unwrap();
        let trials = mask.map(|(_, n)| n).unwrap_or(1);
        let mut tr = Vec::new();
        for trial in 0..trials {
            let sp = match mask {
                Some((f, _)) => mask_tracking_loss(&sparse, f, seed ^ (trial as u64 * 77 + i as u64)),
                None => sparse.clone(),
            };
            let out = ddim_sample_seeded(&den, &sp.data, &spec, &sched, seed + i as u64).unwrap();
            let pred = MotionSequence::new(out, 60).unwrap();
            tr.push(
                evaluate(&tree, &s.motion, &s.root_trans, &s.head, &pred, 60.0).unwrap(),
            );
        }
        reports.push(MetricReport::mean(&tr));
    }
    MetricReport::mean(&reports)
}

fn eval_mlp(
    seqs: &[&GeneratedSequence<Real>],
    params: &ModelParams<Real>,
    seed: u64,
    mask: Option<(f64, usize)>,
) -> MetricReport {
    let tree = default_test_skeleton::<Real>();
    let mut reports = Vec::new();
    for (i, s) in seqs.iter().enumerate() {
        let sparse = build_sparse_input(&tree, &s.motion, &s.root_trans).unwrap();
        let trials = mask.map(|(_, n)| n).unwrap_or(1);
        let mut tr = Vec::new();
        for trial in 0..trials {
            let sp = match mask {
                Some((f, _)) => mask_tracking_loss(&sparse, f, seed ^ (trial as u64 * 77 + i as u64)),
                None => sparse.clone(),
            };
            let (out, _) = forward_with_cache(params, &sp.data, None, None).unwrap();
            let pred = MotionSequence::new(out, 60).unwrap();
            tr.push(
                evaluate(&tree, &s.motion, &s.root_trans, &s.head, &pred, 60.0).unwrap(),
            );
        }
        reports.push(MetricReport::mean(&tr));
    }
    MetricReport::mean(&reports)
}

#[test]
#[ignore]
fn calibrate_overfit() {
    let tree = default_test_skeleton::<Real>();
    let ranges = GaitRanges {
        frames: 32,
        ..GaitRanges::default()
    };
    let data = make_dataset(&tree, 8, &ranges, 500).unwrap();
    let pairs: Vec<(MotionSequence<Real>, Vec<[f32; 3]>)> = data
        .iter()
        .map(|s| (s.motion.clone(), s.root_trans.clone()))
        .collect();
    let samples: Vec<TrainSample<Real>> = prepare_samples(&tree, &pairs, 32).unwrap();
    let all: Vec<&GeneratedSequence<Real>> = data.iter().collect();

    let cfg = toy_cfg(TimestepMode::RepIn, 7, 0);
    let mut params = None;
    let mut done_iters = 0u64;
    let t0 = std::time::Instant::now();
    for segment in [500u64, 500, 1000, 1000, 1000, 1000] {
        let target = done_iters + segment;
        let cfg_seg = TrainConfig {
            total_iters: target,
            ..cfg
        };
        let resume = params.take().map(|p| (p, done_iters));
        let (p, log) = train_diffusion_from(&tree, &samples, &cfg_seg, resume, &mut |_, _| Ok(()))
            .unwrap();
        done_iters = target;
        let report = eval_seqs(&all, &p, cfg.diffusion_steps, 5, 99, None);
        println!(
            "iters {done_iters}: dm loss {:.4e}, train MPJPE {:.3} cm, jitter {:.2}, {:.1}s",
            log.final_loss().unwrap(),
            report.mpjpe_cm,
            report.jitter,
            t0.elapsed().as_secs_f64()
        );
        params = Some(p);
    }
}

#[test]
#[ignore]
fn calibrate_timestep_trend() {
    let tree = default_test_skeleton::<Real>();
    let ranges = GaitRanges {
        frames: 32,
        ..GaitRanges::default()
    };
    let data = make_dataset(&tree, 40, &ranges, 1000).unwrap();
    let pairs: Vec<(MotionSequence<Real>, Vec<[f32; 3]>)> = data
        .iter()
        .filter(|s| s.split == Split::Train)
        .map(|s| (s.motion.clone(), s.root_trans.clone()))
        .collect();
    let samples = prepare_samples(&tree, &pairs, 32).unwrap();
    let test: Vec<&GeneratedSequence<Real>> =
        data.iter().filter(|s| s.split == Split::Test).collect();
    println!("train {} test {}", pairs.len(), test.len());

    let iters = 3000u64;
    for mode in [TimestepMode::RepIn, TimestepMode::Concat, TimestepMode::None] {
        for seed in [0u64, 1, 2] {
            let t0 = std::time::Instant::now();
            let cfg = toy_cfg(mode, seed, iters);
            let (p, log) =
                train_diffusion_from(&tree, &samples, &cfg, None, &mut |_, _| Ok(())).unwrap();
            let r = eval_seqs(&test, &p, cfg.diffusion_steps, 5, 42, None);
            println!(
                "mode {:>6} seed {seed}: loss {:.3e} MPJPE {:.3} MPJVE {:.2} jitter {:.2} ({:.0}s)",
                mode.name(),
                log.final_loss().unwrap(),
                r.mpjpe_cm,
                r.mpjve_cm_s,
                r.jitter,
                t0.elapsed().as_secs_f64()
            );
        }
    }
}

#[test]
#[ignore]
fn calibrate_robustness() {
    let tree = default_test_skeleton::<Real>();
    let ranges = GaitRanges {
        frames: 32,
        ..GaitRanges::default()
    };
    let data = make_dataset(&tree, 40, &ranges, 1000).unwrap();
    let pairs: Vec<(MotionSequence<Real>, Vec<[f32; 3]>)> = data
        .iter()
        .filter(|s| s.split == Split::Train)
        .map(|s| (s.motion.clone(), s.root_trans.clone()))
        .collect();
    let samples = prepare_samples(&tree, &pairs, 32).unwrap();
    let test: Vec<&GeneratedSequence<Real>> =
        data.iter().filter(|s| s.split == Split::Test).collect();

    for seed in [0u64, 1, 2] {
        let cfg = toy_cfg(TimestepMode::RepIn, seed, 3000);
        let (dp, _) =
            train_diffusion_from(&tree, &samples, &cfg, None, &mut |_, _| Ok(())).unwrap();
        let clean = eval_seqs(&test, &dp, cfg.diffusion_steps, 5, 42, None);
        let masked = eval_seqs(&test, &dp, cfg.diffusion_steps, 5, 42, Some((0.1, 5)));
        let d_deg = (masked.mpjpe_cm - clean.mpjpe_cm) / clean.mpjpe_cm;

        let (mp, _) = train_mlp(&samples, &cfg).unwrap();
        let m_clean = eval_mlp(&test, &mp, 42, None);
        let m_masked = eval_mlp(&test, &mp, 42, Some((0.1, 5)));
        let m_deg = (m_masked.mpjpe_cm - m_clean.mpjpe_cm) / m_clean.mpjpe_cm;
        println!(
            "seed {seed}: diffusion {:.3}→{:.3} (+{:.1}%), mlp {:.3}→{:.3} (+{:.1}%)",
            clean.mpjpe_cm,
            masked.mpjpe_cm,
            d_deg * 100.0,
            m_clean.mpjpe_cm,
            m_masked.mpjpe_cm,
            m_deg * 100.0
        );
    }
}
