use std::ops::Range;

use crate::error::{Error, Result};
use crate::frontend::AlignedUtterance;
use crate::sequence::vocab::{Vocab, CLS, PAD, SEP};

/// Default maximum sequence length.
pub const DEFAULT_MAX_LEN: usize = 480;

/// Two-segment input `[CLS, phonemes.., SEP, graphemes.., SEP]` with its
/// parallel index streams.
///
/// Word ids: CLS is 0, words are 1..=W, both SEPs are W+1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputSequence {
    pub token_ids: Vec<usize>,
    pub segment_ids: Vec<usize>,
    pub position_ids: Vec<usize>,
    pub word_ids: Vec<usize>,
    pub phoneme_span: Range<usize>,
    pub grapheme_span: Range<usize>,
    pub word_count: usize,
}

impl InputSequence {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Positions of the two segment terminators.
    pub fn sep_positions(&self) -> [usize; 2] {
        [self.phoneme_span.end, self.grapheme_span.end]
    }

    /// Positions belonging to real words (phonemes and graphemes, no specials).
    pub fn content_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.phoneme_span.clone().chain(self.grapheme_span.clone())
    }

    /// Appends PAD tokens up to `len`. Padding sits in segment 1 with the
    /// terminator's word id and continuing positions.
    pub fn padded(&self, len: usize) -> InputSequence {
        let mut out = self.clone();
        let word = self.word_count + 1;
        while out.token_ids.len() < len {
            let pos = out.token_ids.len();
            out.token_ids.push(PAD);
            out.segment_ids.push(1);
            out.position_ids.push(pos);
            out.word_ids.push(word);
        }
        out
    }
}

pub fn build_input(
    utt: &AlignedUtterance,
    vocab: &Vocab,
    max_len: usize,
) -> Result<InputSequence> {
    if utt.words.is_empty() {
        return Err(Error::EmptyUtterance);
    }
    let required = 3 + utt.phoneme_count() + utt.grapheme_count();
    if required > max_len {
        return Err(Error::SequenceTooLong {
            required,
            allowed: max_len,
        });
    }
    let w_end = utt.words.len() + 1;
    let mut tokens = Vec::with_capacity(required);
    let mut segments = Vec::with_capacity(required);
    let mut words = Vec::with_capacity(required);

    tokens.push(CLS);
    segments.push(0);
    words.push(0);
    for (i, w) in utt.words.iter().enumerate() {
        for p in &w.phonemes {
            let id = vocab.phoneme_id(p).ok_or_else(|| Error::UnknownSymbol {
                block: "phoneme",
                symbol: p.clone(),
            })?;
            tokens.push(id);
            segments.push(0);
            words.push(i + 1);
        }
    }
    let phoneme_span = 1..tokens.len();
    tokens.push(SEP);
    segments.push(0);
    words.push(w_end);

    let g0 = tokens.len();
    for (i, w) in utt.words.iter().enumerate() {
        for g in &w.graphemes {
            tokens.push(vocab.subword_id(g).unwrap_or(vocab.unk_id()));
            segments.push(1);
            words.push(i + 1);
        }
    }
    let grapheme_span = g0..tokens.len();
    tokens.push(SEP);
    segments.push(1);
    words.push(w_end);

    Ok(InputSequence {
        position_ids: (0..tokens.len()).collect(),
        token_ids: tokens,
        segment_ids: segments,
        word_ids: words,
        phoneme_span,
        grapheme_span,
        word_count: utt.words.len(),
    })
}
