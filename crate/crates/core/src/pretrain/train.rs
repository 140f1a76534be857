use rand::seq::SliceRandom;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{backward, forward_masked, mlm_loss, Checkpoint, Gradients, Mode, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::pipeline::Frontend;
use crate::pretrain::optimizer::{clip_factor, learning_rate, Adam, AdamConfig};
use crate::rng::{substream, Stream};
use crate::scalar::Scalar;
use crate::sequence::{apply_masking, InputSequence, MaskedInput, MaskingPolicy, Vocab, DEFAULT_MAX_LEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub num_steps: usize,
    pub peak_lr: f64,
    pub warmup_steps: usize,
    pub seed: u64,
    pub max_len: usize,
    pub policy: MaskingPolicy,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    /// Desk defaults: batch 32, 2000 steps, peak 1e-3, 100 warmup steps.
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            num_steps: 2000,
            peak_lr: 1e-3,
            warmup_steps: 100,
            seed: 0,
            max_len: DEFAULT_MAX_LEN,
            policy: MaskingPolicy::word_consistent(),
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_len == 0 {
            return Err(Error::Config("batch_size and max_len must be positive".into()));
        }
        if self.warmup_steps > self.num_steps {
            return Err(Error::Config("warmup_steps exceeds num_steps".into()));
        }
        if !(self.peak_lr.is_finite() && self.peak_lr >= 0.0) {
            return Err(Error::Config("peak_lr must be finite and non-negative".into()));
        }
        self.policy.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

impl StepLog {
    /// `step<TAB>loss<TAB>lr`
    pub fn to_line(&self) -> String {
        format!("{}\t{:.6}\t{:.6e}", self.step, self.loss, self.lr)
    }
}

#[derive(Debug, Clone)]
pub struct PretrainOutput<T> {
    pub checkpoint: Checkpoint<T>,
    pub log: Vec<StepLog>,
}

/// Cycles through example indices in per-epoch shuffled order.
pub(crate) struct Batcher {
    order: Vec<usize>,
    cursor: usize,
    rng: rand_chacha::ChaCha8Rng,
}

impl Batcher {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut rng = substream(seed, Stream::DataOrder);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Batcher {
            order,
            cursor: 0,
            rng,
        }
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        (0..size)
            .map(|_| {
                if self.cursor == self.order.len() {
                    self.order.shuffle(&mut self.rng);
                    self.cursor = 0;
                }
                self.cursor += 1;
                self.order[self.cursor - 1]
            })
            .collect()
    }
}

/// Mean loss and summed gradients of one masked batch, each example weighted
/// by its share of the batch's labeled tokens.
pub(crate) fn batch_gradients<T: Scalar>(
    batch: &[MaskedInput],
    dropout_seeds: &[u64],
    params: &ModelParams<T>,
    config: &ModelConfig,
) -> Result<(f64, Gradients<T>, usize)> {
    let total: usize = batch.iter().map(|m| m.labels.len()).sum();
    let mut grads = Gradients::zeros(config);
    if total == 0 {
        return Ok((0.0, grads, 0));
    }
    let per_example: Vec<(f64, Gradients<T>)> = batch
        .par_iter()
        .zip(dropout_seeds)
        .filter(|(m, _)| !m.labels.is_empty())
        .map(|(m, &seed)| {
            let trace = forward_masked(m, params, config, Mode::Train { seed })?;
            let targets = m.label_targets();
            let weight = targets.len() as f64 / total as f64;
            let loss = mlm_loss(&trace, &targets).value.to_f64_lossy() * weight;
            let g = backward(&trace, &targets, params, config, T::lit(weight))?;
            Ok((loss, g))
        })
        .collect::<Result<_>>()?;
    let mut loss = 0.0;
    for (l, g) in &per_example {
        loss += l;
        grads.add_assign(g);
    }
    Ok((loss, grads, total))
}

/// MLM pre-training from an initial parameter set.
///
/// Randomness comes from named substreams of `train.seed`: data order,
/// masking and dropout never share a stream, so changing the policy leaves
/// initialization and batch order untouched.
pub fn pretrain_examples<T: Scalar>(
    examples: &[InputSequence],
    vocab: &Vocab,
    model: &ModelConfig,
    train: &TrainConfig,
    init: Option<ModelParams<T>>,
    mut on_step: impl FnMut(&StepLog),
) -> Result<PretrainOutput<T>> {
    model.validate()?;
    train.validate()?;
    if examples.is_empty() {
        return Err(Error::NoUsableData { skipped: 0 });
    }
    let mut params = match init {
        Some(p) => {
            p.check_shapes(model)?;
            p
        }
        None => ModelParams::init(model, &mut substream(train.seed, Stream::Init)),
    };
    let mut batcher = Batcher::new(examples.len(), train.seed);
    let mut mask_rng = substream(train.seed, Stream::Masking);
    let mut dropout_rng = substream(train.seed, Stream::Dropout);
    let mut adam = Adam::new(model, train.adam);
    let mut log = Vec::with_capacity(train.num_steps);

    for step in 0..train.num_steps {
        let idx = batcher.next_batch(train.batch_size);
        let batch: Vec<MaskedInput> = idx
            .iter()
            .map(|&i| apply_masking(&examples[i], &train.policy, &mut mask_rng, vocab))
            .collect();
        let seeds: Vec<u64> = idx.iter().map(|_| dropout_rng.next_u64()).collect();
        let lr = learning_rate(step, train.peak_lr, train.warmup_steps, train.num_steps);
        let (loss, mut grads, labeled) = batch_gradients(&batch, &seeds, &params, model)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite { step });
        }
        if labeled > 0 {
            let norm = grads.norm_squared().to_f64_lossy().sqrt();
            let f = clip_factor(norm, train.adam.clip_norm);
            if f < 1.0 {
                grads.scale(T::lit(f));
            }
            adam.step(&mut params, &grads, lr, |_| true);
            if !params.all_finite() {
                return Err(Error::NonFinite { step });
            }
        }
        let entry = StepLog { step, loss, lr };
        on_step(&entry);
        log.push(entry);
    }
    Ok(PretrainOutput {
        checkpoint: Checkpoint {
            config: model.clone(),
            step: train.num_steps as u64,
            params,
            head: None,
        },
        log,
    })
}

/// Runs the frontend over `sentences`, then pre-trains from a fresh initialization.
pub fn pretrain<T: Scalar, I, S>(
    sentences: I,
    frontend: &Frontend,
    model: &ModelConfig,
    train: &TrainConfig,
    on_step: impl FnMut(&StepLog),
) -> Result<PretrainOutput<T>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let prepared = frontend.prepare(sentences, train.max_len)?;
    if prepared.examples.is_empty() {
        return Err(Error::NoUsableData {
            skipped: prepared.skipped,
        });
    }
    pretrain_examples(&prepared.examples, &frontend.vocab, model, train, None, on_step)
}

/// Exponential moving average of a loss curve.
pub fn smoothed(losses: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(losses.len());
    let mut acc = None;
    for &l in losses {
        let v = match acc {
            None => l,
            Some(a) => alpha * l + (1.0 - alpha) * a,
        };
        acc = Some(v);
        out.push(v);
    }
    out
}
