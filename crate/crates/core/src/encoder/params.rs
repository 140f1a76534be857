//! Learnable tensors of the encoder and their bookkeeping.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::encoder::config::ModelConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub wq: Array2<T>,
    pub bq: Array1<T>,
    pub wk: Array2<T>,
    pub bk: Array1<T>,
    pub wv: Array2<T>,
    pub bv: Array1<T>,
    pub wo: Array2<T>,
    pub bo: Array1<T>,
    pub ln1_gamma: Array1<T>,
    pub ln1_beta: Array1<T>,
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array2<T>,
    pub b2: Array1<T>,
    pub ln2_gamma: Array1<T>,
    pub ln2_beta: Array1<T>,
}

/// All encoder weights. The MLM head reuses `token_embedding` as its output
/// projection, so only its bias is separate.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub token_embedding: Array2<T>,
    pub segment_embedding: Array2<T>,
    pub word_pos_weight: Array2<T>,
    pub word_pos_bias: Array1<T>,
    pub layers: Vec<LayerParams<T>>,
    pub mlm_bias: Array1<T>,
}

/// Gradients share the parameter layout.
pub type Gradients<T> = ModelParams<T>;

/// Parameter group a tensor belongs to, used for freezing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Embeddings,
    Layer(usize),
    MlmHead,
}

pub struct TensorRef<'a, T> {
    pub name: String,
    pub block: Block,
    pub shape: Vec<usize>,
    pub data: &'a [T],
}

pub struct TensorMut<'a, T> {
    pub name: String,
    pub block: Block,
    pub shape: Vec<usize>,
    pub data: &'a mut [T],
}

macro_rules! tensor_list {
    ($self:expr, $entry:ident, $slice:ident, $iter:ident) => {{
        let mut out = Vec::with_capacity(5 + 16 * $self.layers.len());
        macro_rules! push {
            ($name:expr, $block:expr, $t:expr) => {{
                let shape = $t.shape().to_vec();
                out.push($entry {
                    name: $name.to_string(),
                    block: $block,
                    shape,
                    data: $t.$slice().expect("standard layout"),
                });
            }};
        }
        push!("embeddings.token", Block::Embeddings, $self.token_embedding);
        push!("embeddings.segment", Block::Embeddings, $self.segment_embedding);
        push!("embeddings.word_pos.weight", Block::Embeddings, $self.word_pos_weight);
        push!("embeddings.word_pos.bias", Block::Embeddings, $self.word_pos_bias);
        for (i, l) in $self.layers.$iter().enumerate() {
            let b = Block::Layer(i);
            push!(format!("layer{i}.attn.query.weight"), b, l.wq);
            push!(format!("layer{i}.attn.query.bias"), b, l.bq);
            push!(format!("layer{i}.attn.key.weight"), b, l.wk);
            push!(format!("layer{i}.attn.key.bias"), b, l.bk);
            push!(format!("layer{i}.attn.value.weight"), b, l.wv);
            push!(format!("layer{i}.attn.value.bias"), b, l.bv);
            push!(format!("layer{i}.attn.output.weight"), b, l.wo);
            push!(format!("layer{i}.attn.output.bias"), b, l.bo);
            push!(format!("layer{i}.attn.norm.gamma"), b, l.ln1_gamma);
            push!(format!("layer{i}.attn.norm.beta"), b, l.ln1_beta);
            push!(format!("layer{i}.ffn.in.weight"), b, l.w1);
            push!(format!("layer{i}.ffn.in.bias"), b, l.b1);
            push!(format!("layer{i}.ffn.out.weight"), b, l.w2);
            push!(format!("layer{i}.ffn.out.bias"), b, l.b2);
            push!(format!("layer{i}.ffn.norm.gamma"), b, l.ln2_gamma);
            push!(format!("layer{i}.ffn.norm.beta"), b, l.ln2_beta);
        }
        push!("mlm.bias", Block::MlmHead, $self.mlm_bias);
        out
    }};
}

pub(crate) fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, std: f64) -> f64 {
    let normal = Normal::new(0.0, std).expect("positive std");
    loop {
        let x: f64 = normal.sample(rng);
        if x.abs() <= 2.0 * std {
            return x;
        }
    }
}

fn random_matrix<T: Scalar, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Array2<T> {
    Array2::from_shape_simple_fn((rows, cols), || T::lit(truncated_normal(rng, INIT_STD)))
}

impl<T: Scalar> LayerParams<T> {
    fn zeros(d: usize, ff: usize) -> Self {
        let m = |r, c| Array2::zeros((r, c));
        let v = |n| Array1::zeros(n);
        LayerParams {
            wq: m(d, d),
            bq: v(d),
            wk: m(d, d),
            bk: v(d),
            wv: m(d, d),
            bv: v(d),
            wo: m(d, d),
            bo: v(d),
            ln1_gamma: v(d),
            ln1_beta: v(d),
            w1: m(d, ff),
            b1: v(ff),
            w2: m(ff, d),
            b2: v(d),
            ln2_gamma: v(d),
            ln2_beta: v(d),
        }
    }

    fn init<R: Rng + ?Sized>(d: usize, ff: usize, rng: &mut R) -> Self {
        let mut l = Self::zeros(d, ff);
        l.wq = random_matrix(rng, d, d);
        l.wk = random_matrix(rng, d, d);
        l.wv = random_matrix(rng, d, d);
        l.wo = random_matrix(rng, d, d);
        l.w1 = random_matrix(rng, d, ff);
        l.w2 = random_matrix(rng, ff, d);
        l.ln1_gamma.fill(T::one());
        l.ln2_gamma.fill(T::one());
        l
    }
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let d = config.hidden_size;
        ModelParams {
            token_embedding: Array2::zeros((config.vocab_size, d)),
            segment_embedding: Array2::zeros((2, d)),
            word_pos_weight: Array2::zeros((d, d)),
            word_pos_bias: Array1::zeros(d),
            layers: (0..config.num_layers)
                .map(|_| LayerParams::zeros(d, config.ff_size))
                .collect(),
            mlm_bias: Array1::zeros(config.vocab_size),
        }
    }

    /// Truncated normal (std 0.02) weights, zero biases, unit layer-norm gains,
    /// and an identity-plus-noise word-position projection.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let d = config.hidden_size;
        let token_embedding = random_matrix(rng, config.vocab_size, d);
        let segment_embedding = random_matrix(rng, 2, d);
        let mut word_pos_weight: Array2<T> = random_matrix(rng, d, d);
        for i in 0..d {
            word_pos_weight[[i, i]] += T::one();
        }
        let layers = (0..config.num_layers)
            .map(|_| LayerParams::init(d, config.ff_size, rng))
            .collect();
        ModelParams {
            token_embedding,
            segment_embedding,
            word_pos_weight,
            word_pos_bias: Array1::zeros(d),
            layers,
            mlm_bias: Array1::zeros(config.vocab_size),
        }
    }

    pub fn tensors(&self) -> Vec<TensorRef<'_, T>> {
        tensor_list!(self, TensorRef, as_slice, iter)
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_, T>> {
        tensor_list!(self, TensorMut, as_slice_mut, iter_mut)
    }

    /// Expected `(name, shape)` list for a configuration, in storage order.
    pub fn expected_shapes(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
        Self::zeros(config)
            .tensors()
            .into_iter()
            .map(|t| (t.name, t.shape))
            .collect()
    }

    pub fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        let expected = Self::expected_shapes(config);
        let found = self.tensors();
        if expected.len() != found.len() {
            return Err(Error::ShapeMismatch {
                tensor: "layers".into(),
                expected: vec![config.num_layers],
                found: vec![self.layers.len()],
            });
        }
        for ((name, shape), t) in expected.into_iter().zip(found) {
            if shape != t.shape {
                return Err(Error::ShapeMismatch {
                    tensor: name,
                    expected: shape,
                    found: t.shape,
                });
            }
        }
        Ok(())
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.data.iter_mut().zip(b.data) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn norm_squared(&self) -> T {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .fold(T::zero(), |acc, &x| acc + x * x)
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let c2 = |a: &Array2<T>| a.mapv(|x| U::lit(x.to_f64_lossy()));
        let c1 = |a: &Array1<T>| a.mapv(|x| U::lit(x.to_f64_lossy()));
        ModelParams {
            token_embedding: c2(&self.token_embedding),
            segment_embedding: c2(&self.segment_embedding),
            word_pos_weight: c2(&self.word_pos_weight),
            word_pos_bias: c1(&self.word_pos_bias),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    wq: c2(&l.wq),
                    bq: c1(&l.bq),
                    wk: c2(&l.wk),
                    bk: c1(&l.bk),
                    wv: c2(&l.wv),
                    bv: c1(&l.bv),
                    wo: c2(&l.wo),
                    bo: c1(&l.bo),
                    ln1_gamma: c1(&l.ln1_gamma),
                    ln1_beta: c1(&l.ln1_beta),
                    w1: c2(&l.w1),
                    b1: c1(&l.b1),
                    w2: c2(&l.w2),
                    b2: c1(&l.b2),
                    ln2_gamma: c1(&l.ln2_gamma),
                    ln2_beta: c1(&l.ln2_beta),
                })
                .collect(),
            mlm_bias: c1(&self.mlm_bias),
        }
    }
}
