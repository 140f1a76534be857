//! Masked-language-model pre-training and its evaluation harness.

pub mod eval;
pub mod optimizer;
pub mod train;

pub use eval::{evaluate, EvalMode, EvalReport, EVAL_SEED};
pub use optimizer::{learning_rate, Adam, AdamConfig};
pub use train::{pretrain, pretrain_examples, smoothed, PretrainOutput, StepLog, TrainConfig};
