//! The encoder network: embeddings, transformer stack, tied MLM head.

pub mod attention;
pub mod backward;
pub mod checkpoint;
pub mod config;
pub mod embed;
pub mod forward;
mod layer;
pub mod params;

pub use attention::{
    alignment_scores, export_attention, uniform_baseline, write_attention_grids, AttentionExport,
};
pub use backward::{backward, backward_from_hidden, backward_with, Trainable};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::ModelConfig;
pub use embed::{embed, sinusoid};
pub use forward::{forward, forward_masked, mlm_loss, AttentionRecord, ForwardTrace, LossValue, Mode};
pub use params::{Block, Gradients, LayerParams, ModelParams};
