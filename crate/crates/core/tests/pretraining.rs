#[allow(dead_code)]
mod common;

use common::corpus::{toy_corpus, toy_frontend};
use pngbert::encoder::{ModelConfig, ModelParams};
use pngbert::pretrain::{pretrain, pretrain_examples, smoothed, TrainConfig};
use pngbert::rng::{substream, Stream};
use pngbert::sequence::MaskingPolicy;

fn small_model(vocab: usize) -> ModelConfig {
    ModelConfig {
        num_layers: 1,
        hidden_size: 16,
        num_heads: 2,
        ff_size: 32,
        vocab_size: vocab,
        max_positions: 64,
        dropout_rate: 0.1,
        word_position: true,
    }
}

fn train_config(steps: usize) -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        num_steps: steps,
        peak_lr: 3e-3,
        warmup_steps: steps / 10,
        seed: 17,
        max_len: 64,
        policy: MaskingPolicy::plain_random(),
        ..TrainConfig::default()
    }
}

#[test]
fn zero_steps_returns_initialization() {
    let corpus = toy_corpus(20, 1);
    let fe = toy_frontend(&corpus);
    let model = small_model(fe.vocab.len());
    let train = train_config(0);
    let out = pretrain::<f32, _, _>(&corpus, &fe, &model, &train, |_| {}).unwrap();
    let init = ModelParams::<f32>::init(&model, &mut substream(train.seed, Stream::Init));
    assert_eq!(out.checkpoint.params, init);
    assert!(out.log.is_empty());
}

#[test]
fn same_seed_same_bytes_other_seed_differs() {
    let corpus = toy_corpus(40, 2);
    let fe = toy_frontend(&corpus);
    let model = small_model(fe.vocab.len());
    let train = train_config(6);
    let a = pretrain::<f32, _, _>(&corpus, &fe, &model, &train, |_| {}).unwrap();
    let b = pretrain::<f32, _, _>(&corpus, &fe, &model, &train, |_| {}).unwrap();
    assert_eq!(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
    assert_eq!(a.log, b.log);
    let other = TrainConfig { seed: 18, ..train };
    let c = pretrain::<f32, _, _>(&corpus, &fe, &model, &other, |_| {}).unwrap();
    assert_ne!(a.checkpoint.to_bytes(), c.checkpoint.to_bytes());
}

#[test]
fn loss_decreases_on_toy_corpus() {
    let corpus = toy_corpus(200, 3);
    let fe = toy_frontend(&corpus);
    let model = small_model(fe.vocab.len());
    let train = train_config(150);
    let mut seen = 0;
    let out = pretrain::<f32, _, _>(&corpus, &fe, &model, &train, |_| seen += 1).unwrap();
    assert_eq!(seen, 150);
    let losses: Vec<f64> = out.log.iter().map(|l| l.loss).collect();
    let s = smoothed(&losses, 0.1);
    assert!(
        s[149] < 0.8 * s[10],
        "smoothed loss went from {} to {}",
        s[10],
        s[149]
    );
    assert_eq!(out.checkpoint.step, 150);
}

#[test]
fn learning_rate_follows_schedule() {
    let corpus = toy_corpus(20, 4);
    let fe = toy_frontend(&corpus);
    let model = small_model(fe.vocab.len());
    let train = train_config(20);
    let out = pretrain::<f32, _, _>(&corpus, &fe, &model, &train, |_| {}).unwrap();
    let lrs: Vec<f64> = out.log.iter().map(|l| l.lr).collect();
    assert!((lrs[0] - 1.5e-3).abs() < 1e-12);
    assert!((lrs[1] - 3e-3).abs() < 1e-12);
    assert!(lrs.windows(2).skip(1).all(|w| w[1] <= w[0]));
    assert!(lrs[19] > 0.0);
}

#[test]
fn continuing_from_given_parameters() {
    let corpus = toy_corpus(30, 5);
    let fe = toy_frontend(&corpus);
    let model = small_model(fe.vocab.len());
    let prepared = fe.prepare(&corpus, 64).unwrap();
    let start = ModelParams::<f32>::init(&model, &mut substream(99, Stream::Init));
    let train = train_config(0);
    let out =
        pretrain_examples(&prepared.examples, &fe.vocab, &model, &train, Some(start.clone()), |_| {})
            .unwrap();
    assert_eq!(out.checkpoint.params, start);
    let mut wrong = model.clone();
    wrong.hidden_size = 8;
    let bad = ModelParams::<f32>::init(&wrong, &mut substream(1, Stream::Init));
    assert!(pretrain_examples(&prepared.examples, &fe.vocab, &model, &train, Some(bad), |_| {}).is_err());
}

#[test]
fn corpus_with_nothing_usable_is_an_error() {
    let corpus = toy_corpus(10, 6);
    let fe = toy_frontend(&corpus);
    let model = small_model(fe.vocab.len());
    let train = TrainConfig {
        max_len: 4,
        ..train_config(1)
    };
    let err = pretrain::<f32, _, _>(&corpus, &fe, &model, &train, |_| {}).unwrap_err();
    assert!(matches!(err, pngbert::Error::NoUsableData { skipped: 10 }));
}
