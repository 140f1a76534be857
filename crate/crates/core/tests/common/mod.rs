
pub mod corpus;
use pngbert::encoder::ModelConfig;
use pngbert::sequence::{InputSequence, Vocab, CLS, SEP};

/// Vocab of 12: 4 specials, phonemes A B C, subwords a b c d, unk.
pub fn tiny_vocab() -> Vocab {
    Vocab::from_symbols(["A", "B", "C"], ["a", "b", "c", "d"], "<unk>").unwrap()
}

pub fn tiny_config(dropout: f64) -> ModelConfig {
    ModelConfig {
        num_layers: 2,
        hidden_size: 8,
        num_heads: 2,
        ff_size: 16,
        vocab_size: 12,
        max_positions: 32,
        dropout_rate: dropout,
        word_position: true,
    }
}

/// Hand-built input over `words`, each word a list of (phoneme ids, subword ids).
pub fn input_from_words(words: &[(&[usize], &[usize])]) -> InputSequence {
    let w_end = words.len() + 1;
    let mut tokens = vec![CLS];
    let mut segs = vec![0];
    let mut wids = vec![0];
    for (i, (ph, _)) in words.iter().enumerate() {
        for &p in *ph {
            tokens.push(p);
            segs.push(0);
            wids.push(i + 1);
        }
    }
    let phoneme_span = 1..tokens.len();
    tokens.push(SEP);
    segs.push(0);
    wids.push(w_end);
    let g0 = tokens.len();
    for (i, (_, gr)) in words.iter().enumerate() {
        for &g in *gr {
            tokens.push(g);
            segs.push(1);
            wids.push(i + 1);
        }
    }
    let grapheme_span = g0..tokens.len();
    tokens.push(SEP);
    segs.push(1);
    wids.push(w_end);
    InputSequence {
        position_ids: (0..tokens.len()).collect(),
        token_ids: tokens,
        segment_ids: segs,
        word_ids: wids,
        phoneme_span,
        grapheme_span,
        word_count: words.len(),
    }
}

/// Two words ("A B" / "a b") and ("C" / "c d"), padded to 12 tokens.
pub fn tiny_input() -> InputSequence {
    input_from_words(&[(&[4, 5], &[7, 8]), (&[6], &[9, 10])]).padded(12)
}
