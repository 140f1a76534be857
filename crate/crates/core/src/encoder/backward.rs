//! Exact gradients of the MLM loss, or of any loss on the final hidden states.

use ndarray::{Array2, Axis};

use crate::encoder::config::ModelConfig;
use crate::encoder::forward::{mlm_logit_grad, ForwardTrace};
use crate::encoder::layer::layer_backward;
use crate::encoder::params::{Gradients, ModelParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which parameter groups receive gradients. Frozen groups get exact zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trainable {
    /// Token, segment and word-position tables (the token table doubles as the MLM output).
    pub embeddings: bool,
    /// Layers with index >= this are trainable.
    pub first_layer: usize,
    pub mlm_head: bool,
}

impl Trainable {
    pub const ALL: Trainable = Trainable {
        embeddings: true,
        first_layer: 0,
        mlm_head: true,
    };
}

/// Gradients of `scale * mlm_loss` with respect to every parameter.
pub fn backward<T: Scalar>(
    trace: &ForwardTrace<T>,
    targets: &[usize],
    params: &ModelParams<T>,
    config: &ModelConfig,
    scale: T,
) -> Result<Gradients<T>> {
    backward_with(trace, targets, params, config, scale, Trainable::ALL)
}

pub fn backward_with<T: Scalar>(
    trace: &ForwardTrace<T>,
    targets: &[usize],
    params: &ModelParams<T>,
    config: &ModelConfig,
    scale: T,
    trainable: Trainable,
) -> Result<Gradients<T>> {
    if trace.cache.is_none() {
        return Err(Error::MissingCache);
    }
    if targets.len() != trace.label_positions.len() {
        return Err(Error::ShapeMismatch {
            tensor: "targets".into(),
            expected: vec![trace.label_positions.len()],
            found: vec![targets.len()],
        });
    }
    let mut grads = Gradients::zeros(config);
    if targets.is_empty() {
        return Ok(grads);
    }
    let dlogits = mlm_logit_grad(trace, targets, scale);
    if trainable.mlm_head {
        grads.mlm_bias += &dlogits.sum_axis(Axis(0));
    }
    if trainable.embeddings {
        let rows = trace.final_hidden.select(Axis(0), &trace.label_positions);
        grads.token_embedding += &dlogits.t().dot(&rows);
    }
    let dh_rows = dlogits.dot(&params.token_embedding);
    let mut d_hidden = Array2::zeros(trace.final_hidden.raw_dim());
    for (r, &p) in trace.label_positions.iter().enumerate() {
        let mut row = d_hidden.row_mut(p);
        row += &dh_rows.row(r);
    }
    backward_from_hidden(trace, &d_hidden, params, config, trainable, &mut grads)?;
    Ok(grads)
}

/// Backpropagates `d_hidden` (gradient w.r.t. the final hidden states) into
/// `grads`, stopping as soon as no lower group is trainable.
pub fn backward_from_hidden<T: Scalar>(
    trace: &ForwardTrace<T>,
    d_hidden: &Array2<T>,
    params: &ModelParams<T>,
    config: &ModelConfig,
    trainable: Trainable,
    grads: &mut Gradients<T>,
) -> Result<()> {
    let cache = trace.cache.as_ref().ok_or(Error::MissingCache)?;
    let mut dx = d_hidden.clone();
    for l in (0..config.num_layers).rev() {
        if l < trainable.first_layer && !trainable.embeddings {
            return Ok(());
        }
        let g = (l >= trainable.first_layer).then(|| &mut grads.layers[l]);
        dx = layer_backward(
            &dx,
            &cache.layers[l],
            &trace.attention.probs[l],
            &params.layers[l],
            config,
            g,
        );
    }
    if !trainable.embeddings {
        return Ok(());
    }
    if let Some(m) = &cache.embed_drop {
        dx *= m;
    }
    for (r, row) in dx.rows().into_iter().enumerate() {
        let mut t = grads.token_embedding.row_mut(trace.token_ids[r]);
        t += &row;
        let mut s = grads.segment_embedding.row_mut(trace.segment_ids[r]);
        s += &row;
    }
    if config.word_position {
        grads.word_pos_weight += &cache.word_sin.t().dot(&dx);
        grads.word_pos_bias += &dx.sum_axis(Axis(0));
    }
    Ok(())
}
