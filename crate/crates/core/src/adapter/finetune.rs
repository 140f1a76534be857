use std::path::Path;

use ndarray::{s, Array1, Array2, Axis};
use rand::RngCore;
use rayon::prelude::*;

use crate::encoder::params::{truncated_normal, INIT_STD};
use crate::encoder::{
    backward_from_hidden, forward, Block, Checkpoint, Gradients, Mode, ModelConfig, ModelParams,
    Trainable,
};
use crate::error::{Error, Result};
use crate::pipeline::Frontend;
use crate::pretrain::optimizer::{clip_factor, learning_rate, Adam, AdamSlot};
use crate::pretrain::train::{Batcher, StepLog};
use crate::pretrain::TrainConfig;
use crate::rng::{substream, Stream};
use crate::scalar::Scalar;
use crate::sequence::InputSequence;

/// Fine-tuning runs at this fraction of the pre-training peak rate.
pub const FINETUNE_LR_FACTOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreezeSpec {
    pub trainable_top_layers: usize,
    pub embeddings_frozen: bool,
}

impl FreezeSpec {
    /// Fine-tune the top `k` layers; embeddings always stay frozen.
    pub fn top(k: usize) -> Self {
        FreezeSpec {
            trainable_top_layers: k,
            embeddings_frozen: true,
        }
    }

    pub fn validate(&self, num_layers: usize) -> Result<()> {
        if self.trainable_top_layers > num_layers {
            return Err(Error::Config(format!(
                "cannot fine-tune {} of {num_layers} layers",
                self.trainable_top_layers
            )));
        }
        if self.trainable_top_layers < num_layers && !self.embeddings_frozen {
            return Err(Error::Config(
                "embeddings must stay frozen while lower layers are frozen".into(),
            ));
        }
        Ok(())
    }

    pub fn trainable(&self, num_layers: usize) -> Trainable {
        Trainable {
            embeddings: !self.embeddings_frozen,
            first_layer: num_layers - self.trainable_top_layers.min(num_layers),
            mlm_head: false,
        }
    }

    fn allows(&self, block: Block, num_layers: usize) -> bool {
        let t = self.trainable(num_layers);
        match block {
            Block::Embeddings => t.embeddings,
            Block::Layer(l) => l >= t.first_layer,
            Block::MlmHead => false,
        }
    }
}

/// Linear map from a phoneme state to one scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyHead<T> {
    pub weight: Array1<T>,
    pub bias: T,
}

impl<T: Scalar> ToyHead<T> {
    pub fn init(hidden: usize, seed: u64) -> Self {
        let mut rng = substream(seed, Stream::HeadInit);
        ToyHead {
            weight: (0..hidden)
                .map(|_| T::lit(truncated_normal(&mut rng, INIT_STD)))
                .collect(),
            bias: T::zero(),
        }
    }

    pub fn zeros(hidden: usize) -> Self {
        ToyHead {
            weight: Array1::zeros(hidden),
            bias: T::zero(),
        }
    }

    pub fn predict(&self, states: &Array2<T>) -> Array1<T> {
        states.dot(&self.weight) + self.bias
    }
}

#[derive(Debug, Clone)]
pub struct SupervisedExample {
    pub text: String,
    pub input: InputSequence,
    pub targets: Vec<f64>,
}

impl SupervisedExample {
    pub fn new(text: impl Into<String>, input: InputSequence, targets: Vec<f64>) -> Result<Self> {
        let text = text.into();
        if targets.len() != input.phoneme_span.len() {
            return Err(Error::TargetLength {
                utterance: text,
                expected: input.phoneme_span.len(),
                found: targets.len(),
            });
        }
        Ok(SupervisedExample {
            text,
            input,
            targets,
        })
    }
}

/// Parses `sentence<TAB>t1 t2 ...` records.
pub fn parse_supervised(text: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse {
            what: "supervised set".into(),
            line: idx + 1,
            msg,
        };
        let (sentence, targets) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected `sentence<TAB>targets`".into()))?;
        let targets = targets
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad target `{t}`"))))
            .collect::<Result<Vec<_>>>()?;
        out.push((sentence.to_string(), targets));
    }
    Ok(out)
}

pub fn load_supervised(
    path: impl AsRef<Path>,
    frontend: &Frontend,
    max_len: usize,
) -> Result<Vec<SupervisedExample>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_supervised(&text).map_err(|e| e.in_file(path))?
        .into_iter()
        .map(|(s, t)| SupervisedExample::new(s.clone(), frontend.encode(&s, max_len)?, t))
        .collect()
}

#[derive(Debug, Clone)]
pub struct FinetuneOutput<T> {
    pub checkpoint: Checkpoint<T>,
    pub log: Vec<StepLog>,
    /// Head MSE over the whole set, eval mode, before and after training.
    pub initial_mse: f64,
    pub final_mse: f64,
}

/// Mean squared error of the head over every phoneme of `examples`, eval mode.
pub fn head_mse<T: Scalar>(
    params: &ModelParams<T>,
    head: &ToyHead<T>,
    config: &ModelConfig,
    examples: &[SupervisedExample],
) -> Result<f64> {
    let sums: Vec<(f64, usize)> = examples
        .par_iter()
        .map(|ex| {
            let trace = forward(&ex.input, &[], params, config, Mode::Eval)?;
            let states = trace
                .final_hidden
                .slice(s![ex.input.phoneme_span.clone(), ..])
                .to_owned();
            let pred = head.predict(&states);
            let se: f64 = pred
                .iter()
                .zip(&ex.targets)
                .map(|(p, t)| (p.to_f64_lossy() - t).powi(2))
                .sum();
            Ok((se, ex.targets.len()))
        })
        .collect::<Result<_>>()?;
    let (se, n) = sums.iter().fold((0.0, 0), |(a, b), (c, d)| (a + c, b + d));
    Ok(if n == 0 { 0.0 } else { se / n as f64 })
}

struct ExampleGrad<T> {
    se: f64,
    grads: Gradients<T>,
    head_w: Array1<T>,
    head_b: T,
}

/// Trains the head and the top layers on per-phoneme regression targets.
///
/// No MLM loss is computed and parameters outside the trainable set are never
/// written, so their bytes are unchanged afterwards.
pub fn finetune<T: Scalar>(
    checkpoint: &Checkpoint<T>,
    examples: &[SupervisedExample],
    freeze: FreezeSpec,
    train: &TrainConfig,
) -> Result<FinetuneOutput<T>> {
    let config = &checkpoint.config;
    config.validate()?;
    train.validate()?;
    freeze.validate(config.num_layers)?;
    checkpoint.params.check_shapes(config)?;
    for ex in examples {
        if ex.targets.len() != ex.input.phoneme_span.len() {
            return Err(Error::TargetLength {
                utterance: ex.text.clone(),
                expected: ex.input.phoneme_span.len(),
                found: ex.targets.len(),
            });
        }
    }
    if examples.iter().all(|e| e.targets.is_empty()) {
        return Err(Error::NoLabels);
    }

    let trainable = freeze.trainable(config.num_layers);
    let mut params = checkpoint.params.clone();
    let mut head = checkpoint
        .head
        .clone()
        .unwrap_or_else(|| ToyHead::init(config.hidden_size, train.seed));
    let initial_mse = head_mse(&params, &head, config, examples)?;

    let mut adam = Adam::new(config, train.adam);
    let mut head_w_slot = AdamSlot::new(config.hidden_size);
    let mut head_b_slot = AdamSlot::new(1);
    let mut batcher = Batcher::new(examples.len(), train.seed);
    let mut dropout_rng = substream(train.seed, Stream::Dropout);
    let peak = train.peak_lr * FINETUNE_LR_FACTOR;
    let mut log = Vec::with_capacity(train.num_steps);

    for step in 0..train.num_steps {
        let idx = batcher.next_batch(train.batch_size);
        let seeds: Vec<u64> = idx.iter().map(|_| dropout_rng.next_u64()).collect();
        let total: usize = idx.iter().map(|&i| examples[i].targets.len()).sum();
        let lr = learning_rate(step, peak, train.warmup_steps, train.num_steps);
        if total == 0 {
            log.push(StepLog { step, loss: 0.0, lr });
            continue;
        }
        let scale = T::lit(2.0 / total as f64);
        let per_example: Vec<ExampleGrad<T>> = idx
            .par_iter()
            .zip(&seeds)
            .map(|(&i, &seed)| {
                let ex = &examples[i];
                let trace = forward(&ex.input, &[], &params, config, Mode::Train { seed })?;
                let span = ex.input.phoneme_span.clone();
                let states = trace.final_hidden.slice(s![span.clone(), ..]).to_owned();
                let pred = head.predict(&states);
                let err: Array1<T> = pred
                    .iter()
                    .zip(&ex.targets)
                    .map(|(&p, &t)| p - T::lit(t))
                    .collect();
                let se = err.iter().map(|e| e.to_f64_lossy().powi(2)).sum();
                let derr = &err * scale;
                let head_w = states.t().dot(&derr);
                let head_b = derr.sum();
                let mut d_hidden = Array2::zeros(trace.final_hidden.raw_dim());
                let d_states = derr
                    .view()
                    .insert_axis(Axis(1))
                    .dot(&head.weight.view().insert_axis(Axis(0)));
                d_hidden.slice_mut(s![span, ..]).assign(&d_states);
                let mut grads = Gradients::zeros(config);
                backward_from_hidden(&trace, &d_hidden, &params, config, trainable, &mut grads)?;
                Ok(ExampleGrad {
                    se,
                    grads,
                    head_w,
                    head_b,
                })
            })
            .collect::<Result<_>>()?;

        let mut grads = Gradients::zeros(config);
        let mut gw = Array1::zeros(config.hidden_size);
        let mut gb = T::zero();
        let mut se = 0.0;
        for e in &per_example {
            grads.add_assign(&e.grads);
            gw += &e.head_w;
            gb += e.head_b;
            se += e.se;
        }
        let loss = se / total as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite { step });
        }
        let norm_sq = grads.norm_squared() + gw.dot(&gw) + gb * gb;
        let f = T::lit(clip_factor(norm_sq.to_f64_lossy().sqrt(), train.adam.clip_norm));
        if f < T::one() {
            grads.scale(f);
            gw *= f;
            gb *= f;
        }
        let n_layers = config.num_layers;
        adam.step(&mut params, &grads, lr, |b| freeze.allows(b, n_layers));
        head_w_slot.update(
            head.weight.as_slice_mut().expect("contiguous"),
            gw.as_slice().expect("contiguous"),
            lr,
            adam.steps(),
            &train.adam,
        );
        let mut b = [head.bias];
        head_b_slot.update(&mut b, &[gb], lr, adam.steps(), &train.adam);
        head.bias = b[0];
        if !params.all_finite() || !head.bias.is_finite() {
            return Err(Error::NonFinite { step });
        }
        log.push(StepLog { step, loss, lr });
    }

    let final_mse = head_mse(&params, &head, config, examples)?;
    Ok(FinetuneOutput {
        checkpoint: Checkpoint {
            config: config.clone(),
            step: checkpoint.step + train.num_steps as u64,
            params,
            head: Some(head),
        },
        log,
        initial_mse,
        final_mse,
    })
}
