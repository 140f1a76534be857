//! Input embedding: token + segment + position sinusoid + projected word-position sinusoid.

use ndarray::{Array1, Array2};

use crate::encoder::config::ModelConfig;
use crate::encoder::params::ModelParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sequence::InputSequence;

/// Interleaved sinusoid: even dims `sin(pos / 10000^(2i/d))`, odd dims the cosine.
pub fn sinusoid<T: Scalar>(pos: usize, dim: usize) -> Array1<T> {
    Array1::from_shape_fn(dim, |k| {
        let i = (k / 2) as f64;
        let angle = pos as f64 / 10000f64.powf(2.0 * i / dim as f64);
        T::lit(if k % 2 == 0 { angle.sin() } else { angle.cos() })
    })
}

pub fn sinusoid_table<T: Scalar>(ids: &[usize], dim: usize) -> Array2<T> {
    let mut out = Array2::zeros((ids.len(), dim));
    for (r, &id) in ids.iter().enumerate() {
        out.row_mut(r).assign(&sinusoid::<T>(id, dim));
    }
    out
}

pub(crate) fn check_ids(input: &InputSequence, config: &ModelConfig) -> Result<()> {
    let n = input.len();
    if n == 0 {
        return Err(Error::EmptyUtterance);
    }
    let streams: [(&'static str, &[usize], usize); 4] = [
        ("token_ids", &input.token_ids, config.vocab_size),
        ("segment_ids", &input.segment_ids, 2),
        ("position_ids", &input.position_ids, config.max_positions),
        ("word_ids", &input.word_ids, config.max_positions),
    ];
    for (stream, ids, limit) in streams {
        if ids.len() != n {
            return Err(Error::ShapeMismatch {
                tensor: stream.into(),
                expected: vec![n],
                found: vec![ids.len()],
            });
        }
        if let Some((index, &value)) = ids.iter().enumerate().find(|(_, &v)| v >= limit) {
            return Err(Error::IdOutOfRange {
                stream,
                index,
                value,
                limit,
            });
        }
    }
    Ok(())
}

/// Summed input embedding, one row per token.
pub fn embed<T: Scalar>(
    input: &InputSequence,
    params: &ModelParams<T>,
    config: &ModelConfig,
) -> Result<Array2<T>> {
    check_ids(input, config)?;
    let word_sin = sinusoid_table(&input.word_ids, config.hidden_size);
    Ok(embed_with(input, params, config, &word_sin))
}

pub(crate) fn embed_with<T: Scalar>(
    input: &InputSequence,
    params: &ModelParams<T>,
    config: &ModelConfig,
    word_sin: &Array2<T>,
) -> Array2<T> {
    let d = config.hidden_size;
    let mut x = sinusoid_table::<T>(&input.position_ids, d);
    for (r, mut row) in x.rows_mut().into_iter().enumerate() {
        row += &params.token_embedding.row(input.token_ids[r]);
        row += &params.segment_embedding.row(input.segment_ids[r]);
    }
    if config.word_position {
        x += &word_sin.dot(&params.word_pos_weight);
        x += &params.word_pos_bias;
    }
    x
}
