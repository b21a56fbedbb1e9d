//! The MLP backbone, the diffusion conditioning head, sinusoidal timestep
//! embedding, the four timestep-injection strategies, and full manual
//! backpropagation, plus the checkpoint container.

mod checkpoint;
mod embed;
mod forward;
mod params;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use embed::timestep_embed;
pub use forward::{backward, diffusion_forward, forward_with_cache, mlp_forward, ModelCache};
pub use params::{BlockParams, LinearParams, LnParams, MlpConfig, ModelParams, TimestepMode};
