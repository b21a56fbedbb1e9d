//! `gen-data`: deterministic synthetic dataset generation.

use std::path::Path;
use std::time::Instant;

use crate::cli::RunManifest;
use crate::error::{Error, Result};
use crate::features::FPS;
use crate::skeleton::default_test_skeleton;
use crate::synthdata::{make_dataset, save_dataset, GaitRanges};
use crate::Real;

#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub count: usize,
    pub seed: u64,
    pub ranges: GaitRanges,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            count: 16,
            seed: 0,
            ranges: GaitRanges::default(),
        }
    }
}

impl GenConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::Config(format!("config file not found: {}", path.display()))
            } else {
                Error::Io(e)
            }
        })?;
        let mut cfg = Self::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected `key = value`, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            let f = || -> Result<f64> {
                v.parse()
                    .map_err(|_| Error::Config(format!("bad number for `{k}`: `{v}`")))
            };
            let u = || -> Result<u64> {
                v.parse()
                    .map_err(|_| Error::Config(format!("bad integer for `{k}`: `{v}`")))
            };
            match k {
                "count" => cfg.count = u()? as usize,
                "seed" => cfg.seed = u()?,
                "frames" => cfg.ranges.frames = u()? as usize,
                "fps" => cfg.ranges.fps = u()? as u32,
                "cycle_hz_min" => cfg.ranges.cycle_hz.0 = f()?,
                "cycle_hz_max" => cfg.ranges.cycle_hz.1 = f()?,
                "stride_min" => cfg.ranges.stride_amplitude.0 = f()?,
                "stride_max" => cfg.ranges.stride_amplitude.1 = f()?,
                "arm_min" => cfg.ranges.arm_swing.0 = f()?,
                "arm_max" => cfg.ranges.arm_swing.1 = f()?,
                "speed_min" => cfg.ranges.forward_speed.0 = f()?,
                "speed_max" => cfg.ranges.forward_speed.1 = f()?,
                "turn_min" => cfg.ranges.turning_rate.0 = f()?,
                "turn_max" => cfg.ranges.turning_rate.1 = f()?,
                "sway_min" => cfg.ranges.torso_sway.0 = f()?,
                "sway_max" => cfg.ranges.torso_sway.1 = f()?,
                other => return Err(Error::Config(format!("unknown gen-data key `{other}`"))),
            }
        }
        if cfg.ranges.fps != FPS {
            return Err(Error::Config(format!(
                "fps is fixed at {FPS} across the toolchain"
            )));
        }
        Ok(cfg)
    }
}

pub fn cmd_gen_data(config_path: &Path, out: &Path) -> Result<()> {
    let t0 = Instant::now();
    let cfg = GenConfig::from_file(config_path)?;
    let tree = default_test_skeleton::<Real>();
    let dataset = make_dataset(&tree, cfg.count, &cfg.ranges, cfg.seed)?;
    save_dataset(out, &dataset)?;
    let trains = dataset
        .iter()
        .filter(|s| s.split == crate::synthdata::Split::Train)
        .count();
    println!(
        "wrote {} sequences ({} train, {} test) to {}",
        dataset.len(),
        trains,
        dataset.len() - trains,
        out.display()
    );
    let mut manifest = RunManifest::new("gen-data", cfg.seed);
    manifest.config_snapshot = std::fs::read_to_string(config_path).ok();
    manifest.add_artifact(&out.join("manifest.txt"));
    manifest.wall_clock_s = t0.elapsed().as_secs_f64();
    manifest.append_to(out)
}
