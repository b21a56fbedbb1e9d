//! `ablate`: toy-scale experiment grids mirroring the study suites
//! (timestep injection, training step count, sequence length, block count,
//! loss combinations, and output parameterization).

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::cli::{format_table, RunManifest};
use crate::error::{Error, Result};
use crate::features::{build_sparse_input, MotionSequence};
use crate::lossmetrics::{evaluate, head_trajectory, MetricReport};
use crate::network::{save_checkpoint, CheckpointMeta, TimestepMode};
use crate::skeleton::default_test_skeleton;
use crate::synthdata::{load_dataset, MseqFile, Split};
use crate::training::{train_diffusion, TrainConfig};
use crate::Real;

struct Cell {
    label: String,
    cfg: TrainConfig,
}

fn cells_for_suite(suite: &str, base: &TrainConfig) -> Result<Vec<Cell>> {
    let mk = |label: &str, cfg: TrainConfig| Cell {
        label: label.to_string(),
        cfg,
    };
    Ok(match suite {
        "timestep" => [
            TimestepMode::None,
            TimestepMode::Add,
            TimestepMode::Concat,
            TimestepMode::RepIn,
        ]
        .iter()
        .map(|&mode| {
            mk(
                mode.name(),
                TrainConfig {
                    timestep_mode: mode,
                    ..*base
                },
            )
        })
        .collect(),
        "steps-train" => [10usize, 100, 1000]
            .iter()
            .map(|&t| {
                mk(
                    &format!("T{t}"),
                    TrainConfig {
                        diffusion_steps: t,
                        ..*base
                    },
                )
            })
            .collect(),
        "length" => [16usize, 32, 64]
            .iter()
            .map(|&n| {
                mk(
                    &format!("N{n}"),
                    TrainConfig {
                        seq_len: n,
                        ..*base
                    },
                )
            })
            .collect(),
        "blocks" => [1usize, 2, 4, 8]
            .iter()
            .map(|&m| {
                mk(
                    &format!("M{m}"),
                    TrainConfig {
                        num_blocks: m,
                        ..*base
                    },
                )
            })
            .collect(),
        "losses" => {
            let combos: [(&str, f64, f64, f64); 5] = [
                ("dm-only", 0.0, 0.0, 0.0),
                ("foot", 0.0, 0.0, 1.0),
                ("pos", 1.0, 0.0, 0.0),
                ("pos+vel", 1.0, 1.0, 0.0),
                ("pos+vel+foot", 1.0, 1.0, 1.0),
            ];
            combos
                .iter()
                .map(|&(label, pos, vel, foot)| {
                    mk(
                        label,
                        TrainConfig {
                            w_pos: pos,
                            w_vel: vel,
                            w_foot: foot,
                            ..*base
                        },
                    )
                })
                .collect()
        }
        "predict-noise" => vec![
            mk("pred-x0", TrainConfig { predict_noise: false, ..*base }),
            mk("pred-noise", TrainConfig { predict_noise: true, ..*base }),
        ],
        other => {
            return Err(Error::Config(format!(
                "unknown ablation suite `{other}` \
                 (timestep|steps-train|length|blocks|losses|predict-noise)"
            )))
        }
    })
}

/// Mean metric report of a checkpoint over test sequences (5-step DDIM,
/// windowed/stitched for sequences longer than the model's N).
fn eval_on_test(
    sequences: &[(String, MseqFile<Real>, Split)],
    params: &crate::network::ModelParams<Real>,
    meta: &CheckpointMeta,
    seed: u64,
) -> Result<MetricReport> {
    let tree = default_test_skeleton::<Real>();
    let mut reports = Vec::new();
    for (i, (_, file, split)) in sequences.iter().enumerate() {
        if *split != Split::Test {
            continue;
        }
        let gt = MotionSequence::new(file.data.clone(), file.fps)?;
        let root = file
            .root_trans
            .clone()
            .ok_or_else(|| Error::Config("test sequence lacks ROOT track".into()))?;
        let head = match &file.head {
            Some(h) => h.clone(),
            None => head_trajectory(&tree, &gt, &root)?,
        };
        let sparse = build_sparse_input(&tree, &gt, &root)?;
        let data = super::sample::sample_sequence(
            params,
            meta,
            &sparse.data,
            5,
            seed.wrapping_add(i as u64),
        )?;
        let pred = MotionSequence::new(data, gt.fps)?;
        reports.push(evaluate(&tree, &gt, &root, &head, &pred, gt.fps as f64)?);
    }
    if reports.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(MetricReport::mean(&reports))
}

pub fn cmd_ablate(
    suite: &str,
    config_path: &Path,
    data: &Path,
    out: &Path,
    seed: Option<u64>,
    iters: Option<u64>,
) -> Result<()> {
    let t0 = Instant::now();
    let mut base = TrainConfig::from_file(config_path).map_err(|e| match e {
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            Error::Config(format!("config file not found: {}", config_path.display()))
        }
        other => other,
    })?;
    if let Some(seed) = seed {
        base.seed = seed;
    }
    if let Some(iters) = iters {
        base.total_iters = iters;
    }
    if !data.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("dataset directory not found: {}", data.display()),
        )));
    }
    let cells = cells_for_suite(suite, &base)?;
    let sequences = load_dataset::<Real>(data)?;
    let tree = default_test_skeleton::<Real>();
    std::fs::create_dir_all(out)?;

    let mut rows = Vec::new();
    for cell in &cells {
        let cell_dir: PathBuf = out.join(format!("cell_{}", cell.label));
        std::fs::create_dir_all(&cell_dir)?;
        let cell_t0 = Instant::now();
        let samples = super::train::load_train_samples(data, cell.cfg.seq_len)?;
        let (params, log) = train_diffusion(&tree, &samples, &cell.cfg)?;
        let meta = CheckpointMeta {
            train_timesteps: cell.cfg.diffusion_steps,
            predict_noise: cell.cfg.predict_noise,
            trained_iters: cell.cfg.total_iters,
        };
        let ckpt = cell_dir.join("checkpoint.ckpt");
        save_checkpoint(&params, &meta, &ckpt)?;
        std::fs::write(cell_dir.join("train_log.txt"), log.to_lines())?;

        let report = eval_on_test(&sequences, &params, &meta, base.seed)?;
        std::fs::write(cell_dir.join("metrics.txt"), report.to_text_block())?;

        let mut manifest = RunManifest::new(&format!("ablate:{suite}:{}", cell.label), cell.cfg.seed);
        manifest.config_snapshot = Some(cell.cfg.to_kv_string());
        manifest.add_artifact(&ckpt);
        manifest.wall_clock_s = cell_t0.elapsed().as_secs_f64();
        manifest.append_to(&cell_dir)?;

        let mut row = vec![cell.label.clone()];
        row.extend(report.fields().iter().map(|(_, v)| format!("{v:.3}")));
        row.push(cell_dir.join("manifest.json").display().to_string());
        rows.push(row);
        println!("cell {} done in {:.1}s", cell.label, cell_t0.elapsed().as_secs_f64());
    }

    let mut header = vec!["cell".to_string()];
    header.extend(
        MetricReport::mean(&[MetricReport {
            mpjre_deg: 0.0,
            mpjpe_cm: 0.0,
            mpjve_cm_s: 0.0,
            jitter: 0.0,
            hand_pe_cm: 0.0,
            upper_pe_cm: 0.0,
            lower_pe_cm: 0.0,
            root_pe_cm: 0.0,
            upper_jitter: 0.0,
            lower_jitter: 0.0,
        }])
        .fields()
        .iter()
        .map(|(k, _)| k.to_string()),
    );
    header.push("manifest".to_string());
    let table = format_table(&header, &rows);
    print!("{table}");
    let table_path = out.join(format!("{suite}_table.txt"));
    std::fs::write(&table_path, &table)?;

    let mut manifest = RunManifest::new(&format!("ablate:{suite}"), base.seed);
    manifest.config_snapshot = Some(base.to_kv_string());
    manifest.add_artifact(&table_path);
    manifest.wall_clock_s = t0.elapsed().as_secs_f64();
    manifest.append_to(out)
}
