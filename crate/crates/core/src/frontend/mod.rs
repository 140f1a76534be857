//! Text to word-aligned phoneme and subword streams.

pub mod align;
pub mod bpe;
pub mod lexicon;

pub use align::{align_utterance, normalize, AlignedUtterance, Word};
pub use bpe::{tokenize_graphemes, train_bpe, SubwordModel};
pub use lexicon::{g2p, load_lexicon, Lexicon};
