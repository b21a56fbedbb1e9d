//! Model checkpoint container.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "AGRL" | u32 version
//! u32 model_kind (0 predictive, 1 diffusion)
//! u32 num_blocks | u32 latent_dim | u32 seq_len | u32 in_dim
//! u32 cond_dim | u32 out_dim | u32 timestep_mode | u32 embed_dim
//! u32 train_timesteps | u32 flags (bit 0: model predicts noise)
//! u64 trained_iters
//! u32 param_count
//! then per parameter:
//!   u32 name_len | name bytes | u32 rows | u32 cols | rows·cols f32
//! ```
//!
//! Values are stored as raw 32-bit floats, so an f32 model round-trips
//! bit-exactly. Parameters appear in the model's documented order.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::params::{MlpConfig, ModelParams, TimestepMode};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"AGRL";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Training metadata carried alongside the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointMeta {
    /// Diffusion steps the model was trained with (0 for the predictive
    /// baseline).
    pub train_timesteps: usize,
    /// Whether the model output is the residual noise rather than the clean
    /// signal.
    pub predict_noise: bool,
    /// Completed training iterations; lets a resumed run continue the
    /// schedule.
    pub trained_iters: u64,
}

pub fn save_checkpoint<T: Scalar>(
    params: &ModelParams<T>,
    meta: &CheckpointMeta,
    path: &Path,
) -> Result<()> {
    let cfg = params.config();
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    let push_u32 = |buf: &mut Vec<u8>, v: u32| buf.extend_from_slice(&v.to_le_bytes());
    push_u32(&mut buf, CHECKPOINT_VERSION);
    push_u32(&mut buf, u32::from(cfg.is_diffusion()));
    push_u32(&mut buf, cfg.num_blocks as u32);
    push_u32(&mut buf, cfg.latent_dim as u32);
    push_u32(&mut buf, cfg.seq_len as u32);
    push_u32(&mut buf, cfg.in_dim as u32);
    push_u32(&mut buf, cfg.cond_dim as u32);
    push_u32(&mut buf, cfg.out_dim as u32);
    push_u32(&mut buf, cfg.timestep_mode.code());
    push_u32(&mut buf, cfg.embed_dim as u32);
    push_u32(&mut buf, meta.train_timesteps as u32);
    push_u32(&mut buf, u32::from(meta.predict_noise));
    buf.extend_from_slice(&meta.trained_iters.to_le_bytes());
    let named = params.named_params();
    push_u32(&mut buf, named.len() as u32);
    for (name, p) in named {
        push_u32(&mut buf, name.len() as u32);
        buf.extend_from_slice(name.as_bytes());
        push_u32(&mut buf, p.value.rows() as u32);
        push_u32(&mut buf, p.value.cols() as u32);
        for &v in p.value.as_slice() {
            buf.extend_from_slice(&v.to_f32().to_bits().to_le_bytes());
        }
    }
    std::fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Truncated {
                context: "checkpoint",
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(ModelParams<T>, CheckpointMeta)> {
    let data = std::fs::read(path)?;
    let mut r = Reader { data: &data, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            context: "checkpoint",
            expected: CHECKPOINT_MAGIC,
            found: magic,
        });
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            context: "checkpoint",
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let _model_kind = r.u32()?;
    let config = MlpConfig {
        num_blocks: r.u32()? as usize,
        latent_dim: r.u32()? as usize,
        seq_len: r.u32()? as usize,
        in_dim: r.u32()? as usize,
        cond_dim: r.u32()? as usize,
        out_dim: r.u32()? as usize,
        timestep_mode: TimestepMode::from_code(r.u32()?)?,
        embed_dim: r.u32()? as usize,
    };
    let meta = CheckpointMeta {
        train_timesteps: r.u32()? as usize,
        predict_noise: r.u32()? & 1 == 1,
        trained_iters: r.u64()?,
    };
    // build the parameter structure, then overwrite every value
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut params = ModelParams::<T>::init(config, &mut rng)?;
    let count = r.u32()? as usize;
    let mut named = params.named_params_mut();
    if count != named.len() {
        return Err(Error::Config(format!(
            "checkpoint has {count} parameters, model expects {}",
            named.len()
        )));
    }
    for (name, p) in named.iter_mut() {
        let name_len = r.u32()? as usize;
        let got_name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Config("checkpoint parameter name is not utf8".into()))?;
        if got_name != name {
            return Err(Error::Config(format!(
                "checkpoint parameter `{got_name}` does not match expected `{name}`"
            )));
        }
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        if (rows, cols) != p.value.shape() {
            return Err(Error::ShapeMismatch {
                context: "checkpoint parameter",
                left: (rows, cols),
                right: p.value.shape(),
            });
        }
        let raw = r.take(rows * cols * 4)?;
        for (i, chunk) in raw.chunks_exact(4).enumerate() {
            let bits = u32::from_le_bytes(chunk.try_into().unwrap());
            p.value.as_mut_slice()[i] = T::from_f32(f32::from_bits(bits));
        }
    }
    Ok((params, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sample_model() -> (ModelParams<f32>, CheckpointMeta) {
        let cfg = MlpConfig {
            num_blocks: 2,
            latent_dim: 8,
            seq_len: 5,
            in_dim: 4,
            cond_dim: 3,
            out_dim: 4,
            timestep_mode: TimestepMode::RepIn,
            embed_dim: 6,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let mut params = ModelParams::<f32>::init(cfg, &mut rng).unwrap();
        for (_, p) in params.named_params_mut() {
            for v in p.value.as_mut_slice() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let meta = CheckpointMeta {
            train_timesteps: 100,
            predict_noise: false,
            trained_iters: 1234,
        };
        (params, meta)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (params, meta) = sample_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &meta, &path).unwrap();
        let (loaded, got_meta) = load_checkpoint::<f32>(&path).unwrap();
        assert_eq!(got_meta, meta);
        assert_eq!(loaded.config(), params.config());
        for ((na, a), (nb, b)) in params.named_params().iter().zip(loaded.named_params()) {
            assert_eq!(*na, nb);
            let bits_a: Vec<u32> = a.value.as_slice().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u32> = b.value.as_slice().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b, "parameter {na}");
        }
        // re-saving reproduces the same bytes
        let path2 = dir.path().join("model2.ckpt");
        save_checkpoint(&loaded, &got_meta, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let (params, meta) = sample_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &meta, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint::<f32>(&path),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn truncation_is_detected() {
        let (params, meta) = sample_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &meta, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(
            load_checkpoint::<f32>(&path),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let (params, meta) = sample_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &meta, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint::<f32>(&path),
            Err(Error::VersionMismatch { .. })
        ));
    }
}
