//! Token prediction accuracy under three evaluation-time maskings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{forward_masked, Mode, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};
use crate::scalar::Scalar;
use crate::sequence::{apply_masking, InputSequence, MaskedInput, MaskingPolicy, Vocab};

/// Fixed seed for evaluation masks, shared across compared models.
pub const EVAL_SEED: u64 = 20_210_415;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMode {
    /// The training-time random policy.
    Mlm,
    /// All phonemes masked.
    G2p,
    /// All graphemes masked.
    P2g,
}

impl EvalMode {
    pub fn name(&self) -> &'static str {
        match self {
            EvalMode::Mlm => "MLM",
            EvalMode::G2p => "G2P",
            EvalMode::P2g => "P2G",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlm" => Some(EvalMode::Mlm),
            "g2p" => Some(EvalMode::G2p),
            "p2g" => Some(EvalMode::P2g),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub token_accuracy: f64,
    pub tokens_evaluated: usize,
    pub correct: usize,
}

impl EvalReport {
    /// Binomial standard error of the accuracy estimate.
    pub fn standard_error(&self) -> f64 {
        let p = self.token_accuracy;
        (p * (1.0 - p) / self.tokens_evaluated as f64).sqrt()
    }

    pub fn summary(&self) -> String {
        format!(
            "mode={}\taccuracy={:.4}\ttokens={}\tcorrect={}",
            self.mode.name(),
            self.token_accuracy,
            self.tokens_evaluated,
            self.correct
        )
    }
}

/// Builds the evaluation-time masked inputs. MLM mode draws from the
/// evaluation substream of `seed` with the training `policy`.
pub fn eval_inputs(
    examples: &[InputSequence],
    vocab: &Vocab,
    mode: EvalMode,
    policy: &MaskingPolicy,
    seed: u64,
) -> Vec<MaskedInput> {
    let mut rng = substream(seed, Stream::Eval);
    let policy = match mode {
        EvalMode::Mlm => *policy,
        EvalMode::G2p => MaskingPolicy::SegmentG2p,
        EvalMode::P2g => MaskingPolicy::SegmentP2g,
    };
    examples
        .iter()
        .map(|e| apply_masking(e, &policy, &mut rng, vocab))
        .collect()
}

fn argmax<T: Scalar>(row: ndarray::ArrayView1<'_, T>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of labeled positions whose arg-max logit is the original token.
pub fn accuracy_on<T: Scalar>(
    inputs: &[MaskedInput],
    params: &ModelParams<T>,
    config: &ModelConfig,
    mode: EvalMode,
) -> Result<EvalReport> {
    let counts: Vec<(usize, usize)> = inputs
        .par_iter()
        .filter(|m| !m.labels.is_empty())
        .map(|m| {
            let trace = forward_masked(m, params, config, Mode::Eval)?;
            let correct = trace
                .mlm_logits
                .rows()
                .into_iter()
                .zip(&m.labels)
                .filter(|(row, l)| argmax(*row) == l.target)
                .count();
            Ok((correct, m.labels.len()))
        })
        .collect::<Result<_>>()?;
    let (correct, total) = counts
        .iter()
        .fold((0, 0), |(c, t), (dc, dt)| (c + dc, t + dt));
    if total == 0 {
        return Err(Error::NoLabels);
    }
    Ok(EvalReport {
        mode,
        token_accuracy: correct as f64 / total as f64,
        tokens_evaluated: total,
        correct,
    })
}

pub fn evaluate<T: Scalar>(
    params: &ModelParams<T>,
    config: &ModelConfig,
    examples: &[InputSequence],
    vocab: &Vocab,
    mode: EvalMode,
    policy: &MaskingPolicy,
    seed: u64,
) -> Result<EvalReport> {
    if examples.is_empty() {
        return Err(Error::NoUsableData { skipped: 0 });
    }
    let inputs = eval_inputs(examples, vocab, mode, policy, seed);
    accuracy_on(&inputs, params, config, mode)
}
