use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoder::config::ModelConfig;
use crate::encoder::embed::{check_ids, embed_with, sinusoid_table};
use crate::encoder::layer::{dropout_mask, layer_forward, LayerCache};
use crate::encoder::params::ModelParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sequence::{InputSequence, MaskedInput, PAD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active with masks drawn from `seed`; intermediates are cached for backward.
    Train { seed: u64 },
    Eval,
}

/// Attention probabilities, indexed `[layer][head]`, each `seq x seq`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord<T> {
    pub probs: Vec<Vec<Array2<T>>>,
}

#[derive(Debug, Clone)]
pub(crate) struct TraceCache<T> {
    pub word_sin: Array2<T>,
    pub embed_drop: Option<Array2<T>>,
    pub layers: Vec<LayerCache<T>>,
}

#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    pub final_hidden: Array2<T>,
    /// Positions at which `mlm_logits` rows were computed.
    pub label_positions: Vec<usize>,
    pub mlm_logits: Array2<T>,
    pub attention: AttentionRecord<T>,
    pub mode: Mode,
    pub(crate) token_ids: Vec<usize>,
    pub(crate) segment_ids: Vec<usize>,
    pub(crate) cache: Option<TraceCache<T>>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }

    /// Bitwise comparison of every output, for determinism checks.
    pub fn same_outputs(&self, other: &Self) -> bool {
        self.final_hidden == other.final_hidden
            && self.mlm_logits == other.mlm_logits
            && self.attention == other.attention
            && self.label_positions == other.label_positions
    }
}

/// Runs the encoder and the tied MLM head at `label_positions`.
pub fn forward<T: Scalar>(
    input: &InputSequence,
    label_positions: &[usize],
    params: &ModelParams<T>,
    config: &ModelConfig,
    mode: Mode,
) -> Result<ForwardTrace<T>> {
    config.validate()?;
    params.check_shapes(config)?;
    check_ids(input, config)?;
    let n = input.len();
    if let Some(&p) = label_positions.iter().find(|&&p| p >= n) {
        return Err(Error::IdOutOfRange {
            stream: "label_positions",
            index: 0,
            value: p,
            limit: n,
        });
    }
    let train = matches!(mode, Mode::Train { .. });
    let mut rng = match mode {
        Mode::Train { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Mode::Eval => None,
    };

    let word_sin = sinusoid_table::<T>(&input.word_ids, config.hidden_size);
    let mut x = embed_with(input, params, config, &word_sin);
    let embed_drop = match rng.as_mut() {
        Some(r) if config.dropout_rate > 0.0 => {
            let m = dropout_mask(r, x.dim(), config.dropout_rate);
            x *= &m;
            Some(m)
        }
        _ => None,
    };

    let keys: Vec<bool> = input.token_ids.iter().map(|&t| t != PAD).collect();
    let mut caches = Vec::with_capacity(config.num_layers);
    let mut probs = Vec::with_capacity(config.num_layers);
    for layer in &params.layers {
        let out = layer_forward(&x, layer, config, &keys, rng.as_mut(), train);
        x = out.y;
        probs.push(out.probs);
        caches.extend(out.cache);
    }

    let rows = x.select(Axis(0), label_positions);
    let mlm_logits = rows.dot(&params.token_embedding.t()) + &params.mlm_bias;
    Ok(ForwardTrace {
        final_hidden: x,
        label_positions: label_positions.to_vec(),
        mlm_logits,
        attention: AttentionRecord { probs },
        mode,
        token_ids: input.token_ids.clone(),
        segment_ids: input.segment_ids.clone(),
        cache: train.then_some(TraceCache {
            word_sin,
            embed_drop,
            layers: caches,
        }),
    })
}

/// Forward pass with logits at the masked input's labeled positions.
pub fn forward_masked<T: Scalar>(
    masked: &MaskedInput,
    params: &ModelParams<T>,
    config: &ModelConfig,
    mode: Mode,
) -> Result<ForwardTrace<T>> {
    forward(&masked.input, &masked.label_positions(), params, config, mode)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue<T> {
    pub value: T,
    /// Set when there was nothing to predict; `value` is then 0.
    pub no_labels: bool,
}

/// Mean softmax cross-entropy of the MLM logits against `targets`.
pub fn mlm_loss<T: Scalar>(trace: &ForwardTrace<T>, targets: &[usize]) -> LossValue<T> {
    assert_eq!(targets.len(), trace.mlm_logits.nrows(), "one target per logit row");
    if targets.is_empty() {
        log::warn!("mlm_loss: no labeled positions");
        return LossValue {
            value: T::zero(),
            no_labels: true,
        };
    }
    let total = trace
        .mlm_logits
        .rows()
        .into_iter()
        .zip(targets)
        .fold(T::zero(), |acc, (row, &t)| {
            let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let lse = row.iter().fold(T::zero(), |s, &v| s + (v - max).exp()).ln() + max;
            acc + lse - row[t]
        });
    LossValue {
        value: total / T::lit(targets.len() as f64),
        no_labels: false,
    }
}

/// `scale * d(mean CE)/d(logits)`.
pub(crate) fn mlm_logit_grad<T: Scalar>(
    trace: &ForwardTrace<T>,
    targets: &[usize],
    scale: T,
) -> Array2<T> {
    let mut g = trace.mlm_logits.clone();
    let k = scale / T::lit(targets.len().max(1) as f64);
    for (mut row, &t) in g.rows_mut().into_iter().zip(targets) {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum * k);
        row[t] -= k;
    }
    g
}
