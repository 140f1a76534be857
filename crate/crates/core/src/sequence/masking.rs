//! Corruption policies producing MLM training and evaluation examples.

use std::collections::BTreeSet;
use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::input::InputSequence;
use crate::sequence::vocab::{Vocab, MSK};

/// Probabilities of the three corruption categories for one sampling unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskRatios {
    pub mask: f64,
    pub random: f64,
    pub keep: f64,
}

impl MaskRatios {
    pub const WORD_DEFAULT: MaskRatios = MaskRatios {
        mask: 0.12,
        random: 0.015,
        keep: 0.015,
    };
    pub const PLAIN_DEFAULT: MaskRatios = MaskRatios {
        mask: 0.24,
        random: 0.03,
        keep: 0.03,
    };

    pub fn total(&self) -> f64 {
        self.mask + self.random + self.keep
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.mask, self.random, self.keep]
            .iter()
            .all(|p| p.is_finite() && *p >= 0.0)
            && self.total() <= 1.0 + 1e-12;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid masking ratios {self:?}")))
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<MaskCategory> {
        let u: f64 = rng.random();
        if u < self.mask {
            Some(MaskCategory::Mask)
        } else if u < self.mask + self.random {
            Some(MaskCategory::Random)
        } else if u < self.total() {
            Some(MaskCategory::Keep)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskingPolicy {
    /// Whole words, both segments together.
    WordConsistent(MaskRatios),
    /// Independent per-token draws, as in original BERT.
    PlainRandom(MaskRatios),
    /// Every phoneme masked, graphemes visible.
    SegmentG2p,
    /// Every grapheme masked, phonemes visible.
    SegmentP2g,
}

impl MaskingPolicy {
    pub fn word_consistent() -> Self {
        MaskingPolicy::WordConsistent(MaskRatios::WORD_DEFAULT)
    }

    pub fn plain_random() -> Self {
        MaskingPolicy::PlainRandom(MaskRatios::PLAIN_DEFAULT)
    }

    pub fn name(&self) -> &'static str {
        match self {
            MaskingPolicy::WordConsistent(_) => "consistent",
            MaskingPolicy::PlainRandom(_) => "plain",
            MaskingPolicy::SegmentG2p => "g2p",
            MaskingPolicy::SegmentP2g => "p2g",
        }
    }

    /// Parses the command-line spelling, with default ratios.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "consistent" => Some(Self::word_consistent()),
            "plain" => Some(Self::plain_random()),
            "g2p" => Some(MaskingPolicy::SegmentG2p),
            "p2g" => Some(MaskingPolicy::SegmentP2g),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MaskingPolicy::WordConsistent(r) | MaskingPolicy::PlainRandom(r) => r.validate(),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MaskCategory {
    Mask,
    Random,
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Label {
    pub position: usize,
    pub target: usize,
    pub category: MaskCategory,
}

/// An input after corruption, with prediction targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedInput {
    pub input: InputSequence,
    /// Sorted by position.
    pub labels: Vec<Label>,
    pub selected_words: BTreeSet<usize>,
}

impl MaskedInput {
    pub fn unmasked(input: InputSequence) -> Self {
        MaskedInput {
            input,
            labels: Vec::new(),
            selected_words: BTreeSet::new(),
        }
    }

    pub fn label_positions(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.position).collect()
    }

    pub fn label_targets(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.target).collect()
    }

    /// The token sequence before corruption.
    pub fn original_tokens(&self) -> Vec<usize> {
        let mut t = self.input.token_ids.clone();
        for l in &self.labels {
            t[l.position] = l.target;
        }
        t
    }
}

struct Corruptor {
    out: MaskedInput,
    phonemes: Range<usize>,
    subwords: Range<usize>,
    phoneme_span: Range<usize>,
}

impl Corruptor {
    fn new(input: &InputSequence, vocab: &Vocab) -> Self {
        Corruptor {
            phonemes: vocab.phoneme_range(),
            subwords: vocab.random_subword_range(),
            phoneme_span: input.phoneme_span.clone(),
            out: MaskedInput::unmasked(input.clone()),
        }
    }

    fn apply<R: Rng + ?Sized>(&mut self, pos: usize, category: MaskCategory, rng: &mut R) {
        let target = self.out.input.token_ids[pos];
        let replacement = match category {
            MaskCategory::Mask => MSK,
            MaskCategory::Random if self.phoneme_span.contains(&pos) => {
                rng.random_range(self.phonemes.clone())
            }
            MaskCategory::Random => rng.random_range(self.subwords.clone()),
            MaskCategory::Keep => target,
        };
        self.record(pos, category, replacement);
    }

    fn record(&mut self, pos: usize, category: MaskCategory, replacement: usize) {
        let target = self.out.input.token_ids[pos];
        self.out.input.token_ids[pos] = replacement;
        self.out.labels.push(Label {
            position: pos,
            target,
            category,
        });
        self.out.selected_words.insert(self.out.input.word_ids[pos]);
    }

    fn finish(mut self) -> MaskedInput {
        self.out.labels.sort_by_key(|l| l.position);
        self.out
    }
}

/// Selects whole words; every phoneme and grapheme of a selected word shares
/// one category. Random replacements stay within the token's own block.
pub fn apply_word_masking<R: Rng + ?Sized>(
    input: &InputSequence,
    ratios: &MaskRatios,
    rng: &mut R,
    vocab: &Vocab,
) -> MaskedInput {
    let mut by_word: Vec<Vec<usize>> = vec![Vec::new(); input.word_count + 1];
    for pos in input.content_positions() {
        by_word[input.word_ids[pos]].push(pos);
    }
    let mut c = Corruptor::new(input, vocab);
    for positions in by_word.iter().skip(1) {
        if let Some(category) = ratios.draw(rng) {
            for &pos in positions {
                c.apply(pos, category, rng);
            }
        }
    }
    c.finish()
}

/// Independent draw per token; a word may lose its phonemes yet keep its graphemes.
pub fn apply_plain_masking<R: Rng + ?Sized>(
    input: &InputSequence,
    ratios: &MaskRatios,
    rng: &mut R,
    vocab: &Vocab,
) -> MaskedInput {
    let mut c = Corruptor::new(input, vocab);
    for pos in input.content_positions() {
        if let Some(category) = ratios.draw(rng) {
            c.apply(pos, category, rng);
        }
    }
    c.finish()
}

/// Masks one whole segment. `g2p = true` hides phonemes, otherwise graphemes.
pub fn apply_segment_masking(input: &InputSequence, g2p: bool, vocab: &Vocab) -> MaskedInput {
    let span = if g2p {
        input.phoneme_span.clone()
    } else {
        input.grapheme_span.clone()
    };
    let mut c = Corruptor::new(input, vocab);
    for pos in span {
        c.record(pos, MaskCategory::Mask, MSK);
    }
    c.finish()
}

pub fn apply_masking<R: Rng + ?Sized>(
    input: &InputSequence,
    policy: &MaskingPolicy,
    rng: &mut R,
    vocab: &Vocab,
) -> MaskedInput {
    match policy {
        MaskingPolicy::WordConsistent(r) => apply_word_masking(input, r, rng, vocab),
        MaskingPolicy::PlainRandom(r) => apply_plain_masking(input, r, rng, vocab),
        MaskingPolicy::SegmentG2p => apply_segment_masking(input, true, vocab),
        MaskingPolicy::SegmentP2g => apply_segment_masking(input, false, vocab),
    }
}
