//! `sample`: run the sampler over a sparse-input file, windowing and
//! stitching longer sequences.

use std::path::Path;
use std::time::Instant;

use crate::cli::{format_table, RunManifest};
use crate::diffusion::{
    ddim_sample_seeded, ModelDenoiser, NoiseSchedule, Prediction, SamplerSpec,
};
use crate::error::{Error, Result};
use crate::features::{
    build_sparse_input, stitch, window, MotionSequence, MOTION_WIDTH, SPARSE_WIDTH,
};
use crate::lossmetrics::{evaluate, head_trajectory};
use crate::network::{load_checkpoint, mlp_forward, CheckpointMeta, ModelParams};
use crate::numerics::Tensor2;
use crate::rotations::Vec3;
use crate::skeleton::default_test_skeleton;
use crate::synthdata::{load_mseq, save_mseq, MseqFile};
use crate::Real;

/// Ground truth available when the input file is a motion file.
struct GtTracks {
    motion: MotionSequence<Real>,
    root: Vec<Vec3<Real>>,
    head: Vec<Vec3<Real>>,
}

/// Extracts the conditioning signal from the input file: either a direct
/// 54-channel sparse file or a 132-channel motion file with a ROOT track.
fn resolve_sparse(file: &MseqFile<Real>) -> Result<(Tensor2<Real>, Option<GtTracks>)> {
    if file.data.cols() == SPARSE_WIDTH {
        return Ok((file.data.clone(), None));
    }
    if file.data.cols() == MOTION_WIDTH {
        let root = file.root_trans.clone().ok_or(Error::WidthMismatch {
            context: "motion input needs a ROOT track to derive the sparse signal",
            expected: SPARSE_WIDTH,
            got: file.data.cols(),
        })?;
        let tree = default_test_skeleton::<Real>();
        let motion = MotionSequence::new(file.data.clone(), file.fps)?;
        let sparse = build_sparse_input(&tree, &motion, &root)?;
        let head = match &file.head {
            Some(h) => h.clone(),
            None => head_trajectory(&tree, &motion, &root)?,
        };
        return Ok((
            sparse.data,
            Some(GtTracks {
                motion,
                root,
                head,
            }),
        ));
    }
    Err(Error::WidthMismatch {
        context: "sample input",
        expected: SPARSE_WIDTH,
        got: file.data.cols(),
    })
}

/// Windowed generation: one seeded DDIM run per chunk, later-wins stitching.
pub(crate) fn sample_sequence(
    params: &ModelParams<Real>,
    meta: &CheckpointMeta,
    sparse: &Tensor2<Real>,
    ddim_steps: usize,
    seed: u64,
) -> Result<Tensor2<Real>> {
    let cfg = params.config();
    if sparse.cols() != cfg.cond_dim && cfg.is_diffusion() {
        return Err(Error::WidthMismatch {
            context: "checkpoint conditioning width",
            expected: cfg.cond_dim,
            got: sparse.cols(),
        });
    }
    if !cfg.is_diffusion() && sparse.cols() != cfg.in_dim {
        return Err(Error::WidthMismatch {
            context: "checkpoint input width",
            expected: cfg.in_dim,
            got: sparse.cols(),
        });
    }
    let total = sparse.rows();
    let chunks = window(sparse, cfg.seq_len, cfg.seq_len)?;
    let mut outputs = Vec::with_capacity(chunks.len());
    if cfg.is_diffusion() {
        let t_total = meta.train_timesteps;
        let sched = NoiseSchedule::cosine_default(t_total);
        let spec = SamplerSpec::ddim(t_total, ddim_steps)?;
        let denoiser = ModelDenoiser {
            params,
            prediction: if meta.predict_noise {
                Prediction::Noise
            } else {
                Prediction::CleanSignal
            },
        };
        for (i, (offset, chunk)) in chunks.iter().enumerate() {
            let out = ddim_sample_seeded(&denoiser, chunk, &spec, &sched, seed.wrapping_add(i as u64))?;
            outputs.push((*offset, out));
        }
    } else {
        for (offset, chunk) in &chunks {
            outputs.push((*offset, mlp_forward(params, chunk)?));
        }
    }
    stitch(&outputs, total)
}

pub fn cmd_sample(
    checkpoint: &Path,
    input: &Path,
    ddim_steps: usize,
    seed: u64,
    out: &Path,
    sweep: Option<&str>,
) -> Result<()> {
    let t0 = Instant::now();
    let (params, meta) = load_checkpoint::<Real>(checkpoint)?;
    let file = load_mseq::<Real>(input)?;
    let (sparse, gt) = resolve_sparse(&file)?;

    let out_dir = out.parent().map(Path::to_path_buf).unwrap_or_default();
    if !out_dir.as_os_str().is_empty() {
        std::fs::create_dir_all(&out_dir)?;
    }
    let mut manifest = RunManifest::new("sample", seed);

    let t_total = meta.train_timesteps.max(1);
    let steps_list: Vec<usize> = match sweep {
        None => vec![ddim_steps],
        Some(s) => {
            let mut v = Vec::new();
            for item in s.split(',') {
                let k: usize = item
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad sweep entry `{item}`")))?;
                let clamped = k.min(t_total);
                if clamped != k {
                    println!("note: clamping sweep step count {k} to the schedule length {t_total}");
                }
                v.push(clamped);
            }
            v.dedup();
            v
        }
    };

    let tree = default_test_skeleton::<Real>();
    let mut table_rows = Vec::new();
    for &k in &steps_list {
        let motion = sample_sequence(&params, &meta, &sparse, k, seed)?;
        let path = if steps_list.len() == 1 {
            out.to_path_buf()
        } else {
            let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("sample");
            let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("mseq");
            out.with_file_name(format!("{stem}_k{k}.{ext}"))
        };
        save_mseq(
            &path,
            &MseqFile {
                fps: file.fps,
                data: motion.clone(),
                root_trans: None,
                head: None,
            },
        )?;
        manifest.add_artifact(&path);
        println!("wrote {} ({} frames, K = {k})", path.display(), motion.rows());

        if let Some(gt) = &gt {
            let pred = MotionSequence::new(motion, file.fps)?;
            let report = evaluate(&tree, &gt.motion, &gt.root, &gt.head, &pred, file.fps as f64)?;
            let mut row = vec![k.to_string()];
            row.extend(report.fields().iter().map(|(_, v)| format!("{v:.3}")));
            table_rows.push(row);
        }
    }

    if !table_rows.is_empty() {
        let mut header = vec!["ddim_steps".to_string()];
        header.extend(
            table_rows
                .first()
                .map(|_| {
                    [
                        "mpjre_deg",
                        "mpjpe_cm",
                        "mpjve_cm_s",
                        "hand_pe_cm",
                        "upper_pe_cm",
                        "lower_pe_cm",
                        "root_pe_cm",
                        "jitter",
                        "upper_jitter",
                        "lower_jitter",
                    ]
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                })
                .unwrap_or_default(),
        );
        let table = format_table(&header, &table_rows);
        print!("{table}");
        if steps_list.len() > 1 {
            let table_path = out.with_file_name("sweep_table.txt");
            std::fs::write(&table_path, &table)?;
            manifest.add_artifact(&table_path);
        }
    }

    manifest.wall_clock_s = t0.elapsed().as_secs_f64();
    let manifest_dir = if out_dir.as_os_str().is_empty() {
        Path::new(".").to_path_buf()
    } else {
        out_dir
    };
    manifest.append_to(&manifest_dir)
}
