//! `evaluate`: metric reports for predictions against ground truth, with
//! the seeded tracking-loss protocol.

use std::path::Path;
use std::time::Instant;

use crate::cli::{format_table, RunManifest};
use crate::error::{Error, Result};
use crate::features::{build_sparse_input, mask_tracking_loss, MotionSequence};
use crate::lossmetrics::{evaluate, head_trajectory, MetricReport};
use crate::network::{load_checkpoint, CheckpointMeta, ModelParams};
use crate::skeleton::default_test_skeleton;
use crate::synthdata::{load_dataset, load_mseq, Split};
use crate::Real;

enum PredSource {
    Dir(std::path::PathBuf),
    Model(Box<(ModelParams<Real>, CheckpointMeta)>),
}

fn mix_seed(base: u64, seq: usize, trial: usize) -> u64 {
    let mut x = base ^ ((seq as u64) << 32) ^ trial as u64;
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x ^ (x >> 31)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_evaluate(
    gt: &Path,
    pred: Option<&Path>,
    checkpoint: Option<&Path>,
    mask_fraction: f64,
    trials: usize,
    ddim_steps: usize,
    seed: u64,
    split: &str,
    out: &Path,
) -> Result<()> {
    let t0 = Instant::now();
    if !(0.0..=1.0).contains(&mask_fraction) {
        return Err(Error::Config("mask fraction must be in [0, 1]".into()));
    }
    let source = match (pred, checkpoint) {
        (Some(dir), None) => {
            if mask_fraction > 0.0 {
                return Err(Error::Config(
                    "tracking-loss masking needs --checkpoint (it perturbs model input)".into(),
                ));
            }
            PredSource::Dir(dir.to_path_buf())
        }
        (None, Some(ckpt)) => PredSource::Model(Box::new(load_checkpoint::<Real>(ckpt)?)),
        _ => {
            return Err(Error::Config(
                "exactly one of --pred or --checkpoint is required".into(),
            ))
        }
    };
    let keep = |s: Split| match split {
        "train" => s == Split::Train,
        "test" => s == Split::Test,
        _ => true,
    };
    let tree = default_test_skeleton::<Real>();
    let dataset = load_dataset::<Real>(gt)?;
    let sequences: Vec<_> = dataset
        .into_iter()
        .filter(|(_, _, s)| keep(*s))
        .collect();
    if sequences.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let trials = if mask_fraction > 0.0 { trials.max(1) } else { 1 };

    let mut pairing_errors: Vec<String> = Vec::new();
    let mut per_seq: Vec<(String, MetricReport)> = Vec::new();
    for (i, (name, file, _)) in sequences.iter().enumerate() {
        let gt_motion = MotionSequence::new(file.data.clone(), file.fps)?;
        let Some(gt_root) = file.root_trans.clone() else {
            pairing_errors.push(format!("{name}: ground truth lacks a ROOT track"));
            continue;
        };
        let gt_head = match &file.head {
            Some(h) => h.clone(),
            None => head_trajectory(&tree, &gt_motion, &gt_root)?,
        };

        let mut trial_reports = Vec::with_capacity(trials);
        for trial in 0..trials {
            let pred_motion = match &source {
                PredSource::Dir(dir) => {
                    let path = dir.join(name);
                    match load_mseq::<Real>(&path) {
                        Ok(pf) => {
                            if pf.data.rows() != gt_motion.frames() {
                                pairing_errors.push(format!(
                                    "{name}: prediction has {} frames, ground truth {}",
                                    pf.data.rows(),
                                    gt_motion.frames()
                                ));
                                continue;
                            }
                            MotionSequence::new(pf.data, pf.fps)?
                        }
                        Err(_) => {
                            pairing_errors.push(format!(
                                "{name}: no matching prediction at {}",
                                path.display()
                            ));
                            continue;
                        }
                    }
                }
                PredSource::Model(model) => {
                    let (params, meta) = model.as_ref();
                    let sparse = build_sparse_input(&tree, &gt_motion, &gt_root)?;
                    let sparse = if mask_fraction > 0.0 {
                        mask_tracking_loss(&sparse, mask_fraction, mix_seed(seed, i, trial))
                    } else {
                        sparse
                    };
                    let data = super::sample::sample_sequence(
                        params,
                        meta,
                        &sparse.data,
                        ddim_steps,
                        seed.wrapping_add(i as u64 * 7919),
                    )?;
                    MotionSequence::new(data, gt_motion.fps)?
                }
            };
            let report = evaluate(
                &tree,
                &gt_motion,
                &gt_root,
                &gt_head,
                &pred_motion,
                gt_motion.fps as f64,
            )?;
            trial_reports.push(report);
        }
        if !trial_reports.is_empty() {
            per_seq.push((name.clone(), MetricReport::mean(&trial_reports)));
        }
    }

    if !pairing_errors.is_empty() {
        for e in &pairing_errors {
            eprintln!("error: {e}");
        }
        return Err(Error::LengthMismatch {
            context: "evaluate: sequence pairing",
            left: per_seq.len(),
            right: sequences.len(),
        });
    }

    std::fs::create_dir_all(out)?;
    let mut records = String::new();
    let mut rows = Vec::new();
    for (name, r) in &per_seq {
        records.push_str(&format!("{name} {}\n", r.to_record_line()));
        let mut row = vec![name.clone()];
        row.extend(r.fields().iter().map(|(_, v)| format!("{v:.3}")));
        rows.push(row);
    }
    let aggregate = MetricReport::mean(&per_seq.iter().map(|(_, r)| *r).collect::<Vec<_>>());
    records.push_str(&format!("aggregate {}\n", aggregate.to_record_line()));
    let mut agg_row = vec!["aggregate".to_string()];
    agg_row.extend(aggregate.fields().iter().map(|(_, v)| format!("{v:.3}")));
    rows.push(agg_row);

    let mut header = vec!["sequence".to_string()];
    header.extend(
        aggregate
            .fields()
            .iter()
            .map(|(k, _)| k.to_string()),
    );
    let table = format_table(&header, &rows);
    print!("{table}");
    if mask_fraction > 0.0 {
        println!("(mean over {trials} masked trials, fraction {mask_fraction})");
    }

    let records_path = out.join("records.txt");
    std::fs::write(&records_path, records)?;
    let table_path = out.join("metrics.txt");
    std::fs::write(&table_path, &table)?;
    let aggregate_path = out.join("aggregate.txt");
    std::fs::write(&aggregate_path, aggregate.to_text_block())?;

    let mut manifest = RunManifest::new("evaluate", seed);
    manifest.add_artifact(&records_path);
    manifest.add_artifact(&table_path);
    manifest.add_artifact(&aggregate_path);
    manifest.wall_clock_s = t0.elapsed().as_secs_f64();
    manifest.append_to(out)
}
