#[allow(dead_code)]
mod common;

use ndarray::Array2;
use pngbert::encoder::embed::sinusoid_table;
use pngbert::encoder::{
    backward, embed, forward, mlm_loss, Checkpoint, Mode, ModelConfig, ModelParams,
};
use pngbert::error::Error;
use pngbert::rng::{substream, Stream};
use pngbert::sequence::{InputSequence, PAD};
use proptest::prelude::*;

fn params_f64(config: &ModelConfig, seed: u64) -> ModelParams<f64> {
    ModelParams::init(config, &mut substream(seed, Stream::Init))
}

/// Random well-formed input: 1..=4 words, each with 0..=3 phonemes and 1..=3 subwords.
fn arb_input() -> impl Strategy<Value = InputSequence> {
    let word = (
        prop::collection::vec(4usize..7, 0..=3),
        prop::collection::vec(7usize..12, 1..=3),
    );
    (prop::collection::vec(word, 1..=4), 0usize..6).prop_map(|(words, pad)| {
        let refs: Vec<(&[usize], &[usize])> =
            words.iter().map(|(p, g)| (p.as_slice(), g.as_slice())).collect();
        let seq = common::input_from_words(&refs);
        let n = seq.len();
        seq.padded(n + pad)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attention_rows_normalized_and_pad_columns_zero(input in arb_input(), seed in 0u64..1000) {
        let config = common::tiny_config(0.1);
        let params = params_f64(&config, seed);
        for mode in [Mode::Eval, Mode::Train { seed }] {
            let trace = forward(&input, &[], &params, &config, mode).unwrap();
            for layer in &trace.attention.probs {
                for head in layer {
                    for row in head.rows() {
                        prop_assert!((row.sum() - 1.0).abs() < 1e-12);
                    }
                    for (j, &t) in input.token_ids.iter().enumerate() {
                        if t == PAD {
                            prop_assert!(head.column(j).iter().all(|&p| p == 0.0));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn word_position_term_depends_only_on_word_id(input in arb_input(), seed in 0u64..1000) {
        let on = common::tiny_config(0.0);
        let mut off = on.clone();
        off.word_position = false;
        let params = params_f64(&on, seed);
        let term = sinusoid_table::<f64>(&input.word_ids, 8).dot(&params.word_pos_weight)
            + &params.word_pos_bias;
        let diff = embed(&input, &params, &on).unwrap() - embed(&input, &params, &off).unwrap();
        for (a, b) in diff.iter().zip(&term) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for i in 0..input.len() {
            for j in 0..input.len() {
                let same = term.row(i) == term.row(j);
                prop_assert_eq!(same, input.word_ids[i] == input.word_ids[j]);
            }
        }
    }

    #[test]
    fn padding_does_not_change_real_rows(input in arb_input(), seed in 0u64..1000) {
        let config = common::tiny_config(0.0);
        let params = params_f64(&config, seed);
        let extra = input.padded(input.len() + 5);
        let a = forward(&input, &[], &params, &config, Mode::Eval).unwrap();
        let b = forward(&extra, &[], &params, &config, Mode::Eval).unwrap();
        for i in 0..input.len() {
            for (x, y) in a.final_hidden.row(i).iter().zip(b.final_hidden.row(i)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn eval_mode_is_bit_identical() {
    let config = common::tiny_config(0.3);
    let params = ModelParams::<f32>::init(&config, &mut substream(3, Stream::Init));
    let input = common::tiny_input();
    let a = forward(&input, &[1, 2, 7], &params, &config, Mode::Eval).unwrap();
    let b = forward(&input, &[1, 2, 7], &params, &config, Mode::Eval).unwrap();
    assert!(a.same_outputs(&b));
    assert!(!a.has_cache());
    let t1 = forward(&input, &[1], &params, &config, Mode::Train { seed: 5 }).unwrap();
    let t2 = forward(&input, &[1], &params, &config, Mode::Train { seed: 5 }).unwrap();
    assert!(t1.same_outputs(&t2));
    let t3 = forward(&input, &[1], &params, &config, Mode::Train { seed: 6 }).unwrap();
    assert!(!t1.same_outputs(&t3));
}

#[test]
fn tied_head_logits_are_exact() {
    let config = common::tiny_config(0.0);
    let mut params = ModelParams::<f32>::init(&config, &mut substream(8, Stream::Init));
    params.mlm_bias.iter_mut().enumerate().for_each(|(i, b)| *b = i as f32 * 0.01);
    let input = common::tiny_input();
    let positions = [1, 4, 5, 8];
    let trace = forward(&input, &positions, &params, &config, Mode::Eval).unwrap();
    for (r, &p) in positions.iter().enumerate() {
        for t in 0..config.vocab_size {
            let h = trace.final_hidden.row(p);
            let e = params.token_embedding.row(t);
            let dot: f32 = h.iter().zip(e).map(|(a, b)| a * b).sum();
            let expected = dot + params.mlm_bias[t];
            let got = trace.mlm_logits[[r, t]];
            assert!((got - expected).abs() <= 1e-6 * expected.abs().max(1.0), "{got} vs {expected}");
        }
    }
}

#[test]
fn zero_layer_model_outputs_embeddings() {
    let mut config = common::tiny_config(0.0);
    config.num_layers = 0;
    let params = params_f64(&config, 2);
    let input = common::tiny_input();
    let trace = forward(&input, &[], &params, &config, Mode::Eval).unwrap();
    assert_eq!(trace.final_hidden, embed(&input, &params, &config).unwrap());
    assert!(trace.attention.probs.is_empty());
}

#[test]
fn uniform_logits_give_log_vocab_loss() {
    let config = common::tiny_config(0.0);
    let params = ModelParams::<f64>::zeros(&config);
    let input = common::tiny_input();
    let trace = forward(&input, &[1, 2], &params, &config, Mode::Eval).unwrap();
    let loss = mlm_loss(&trace, &[4, 9]);
    assert!((loss.value - (12f64).ln()).abs() < 1e-12);
    assert!(!loss.no_labels);
}

#[test]
fn loss_of_confident_correct_prediction_is_small() {
    // logits all equal except the target, which is 20 higher
    let config = common::tiny_config(0.0);
    let mut params = ModelParams::<f64>::zeros(&config);
    params.mlm_bias[5] = 20.0;
    let input = common::tiny_input();
    let trace = forward(&input, &[3], &params, &config, Mode::Eval).unwrap();
    let expected = (1.0 + 11.0 * (-20f64).exp()).ln();
    assert!((mlm_loss(&trace, &[5]).value - expected).abs() < 1e-15);
}

#[test]
fn empty_labels_give_zero_loss_and_gradients() {
    let config = common::tiny_config(0.1);
    let params = params_f64(&config, 1);
    let input = common::tiny_input();
    let trace = forward(&input, &[], &params, &config, Mode::Train { seed: 1 }).unwrap();
    let loss = mlm_loss(&trace, &[]);
    assert_eq!(loss.value, 0.0);
    assert!(loss.no_labels);
    let g = backward(&trace, &[], &params, &config, 1.0).unwrap();
    assert_eq!(g.norm_squared(), 0.0);
}

#[test]
fn backward_scales_linearly() {
    let config = common::tiny_config(0.1);
    let params = params_f64(&config, 1);
    let input = common::tiny_input();
    let trace = forward(&input, &[1, 7], &params, &config, Mode::Train { seed: 2 }).unwrap();
    let g1 = backward(&trace, &[5, 8], &params, &config, 1.0).unwrap();
    let mut g3 = backward(&trace, &[5, 8], &params, &config, 3.0).unwrap();
    g3.scale(1.0 / 3.0);
    for (a, b) in g1.tensors().iter().zip(g3.tensors()) {
        for (x, y) in a.data.iter().zip(b.data) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}

#[test]
fn eval_trace_cannot_be_backpropagated() {
    let config = common::tiny_config(0.0);
    let params = params_f64(&config, 1);
    let trace = forward(&common::tiny_input(), &[1], &params, &config, Mode::Eval).unwrap();
    assert!(matches!(
        backward(&trace, &[4], &params, &config, 1.0),
        Err(Error::MissingCache)
    ));
}

#[test]
fn out_of_range_ids_are_rejected() {
    let config = common::tiny_config(0.0);
    let params = params_f64(&config, 1);
    let mut input = common::tiny_input();
    input.token_ids[2] = 12;
    let err = forward(&input, &[], &params, &config, Mode::Eval).unwrap_err();
    assert!(matches!(err, Error::IdOutOfRange { stream: "token_ids", index: 2, .. }));
    let mut input = common::tiny_input();
    input.segment_ids[0] = 2;
    assert!(forward(&input, &[], &params, &config, Mode::Eval).is_err());
    let long = common::tiny_input().padded(40);
    assert!(matches!(
        forward(&long, &[], &params, &config, Mode::Eval),
        Err(Error::IdOutOfRange { .. })
    ));
}

#[test]
fn wrong_parameter_shapes_are_named() {
    let config = common::tiny_config(0.0);
    let mut params = params_f64(&config, 1);
    params.layers[1].w1 = Array2::zeros((8, 15));
    match forward(&common::tiny_input(), &[], &params, &config, Mode::Eval) {
        Err(Error::ShapeMismatch { tensor, .. }) => assert_eq!(tensor, "layer1.ffn.in.weight"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn checkpoints_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::tiny_config(0.1);
    let params = ModelParams::<f32>::init(&config, &mut substream(11, Stream::Init));
    let mut ckpt = Checkpoint::new(config.clone(), params);
    ckpt.step = 42;
    let path = dir.path().join("m.ckpt");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::<f32>::load(&path).unwrap();
    assert_eq!(back.params, ckpt.params);
    assert_eq!(back.step, 42);
    assert_eq!(back.config, config);
    assert_eq!(back.to_bytes(), std::fs::read(&path).unwrap());

    let p64 = params_f64(&config, 12);
    let c64 = Checkpoint::new(config.clone(), p64.clone());
    assert_eq!(Checkpoint::<f64>::from_bytes(&c64.to_bytes()).unwrap().params, p64);
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let config = common::tiny_config(0.1);
    let ckpt = Checkpoint::new(config.clone(), ModelParams::<f32>::zeros(&config));
    let bytes = ckpt.to_bytes();
    assert!(matches!(
        Checkpoint::<f32>::from_bytes(&bytes[..bytes.len() - 3]),
        Err(Error::Format(_))
    ));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(Checkpoint::<f32>::from_bytes(&bad), Err(Error::Format(_))));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    ckpt.save(&path).unwrap();
    let mut other = config.clone();
    other.ff_size = 32;
    match Checkpoint::<f32>::load_expecting(&path, &other) {
        Err(Error::ShapeMismatch { tensor, .. }) => assert_eq!(tensor, "layer0.ffn.in.weight"),
        r => panic!("unexpected {:?}", r.map(|c| c.step)),
    }
}
