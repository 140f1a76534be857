//! Normalization, word splitting and the word-aligned phoneme/grapheme view.

use crate::error::{Error, Result};
use crate::frontend::bpe::{tokenize_graphemes, SubwordModel};
use crate::frontend::lexicon::{g2p, is_punctuation, Lexicon};

/// Lowercases and collapses whitespace runs to single spaces.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct RawWord {
    pub surface: String,
    pub space_before: bool,
}

/// Splits normalized text into words, detaching leading and trailing
/// punctuation runs into words of their own.
pub(crate) fn split_words(normalized: &str) -> Vec<RawWord> {
    let mut out = Vec::new();
    for (t, token) in normalized.split(' ').filter(|s| !s.is_empty()).enumerate() {
        let first_space = t > 0;
        let Some(start) = token.find(char::is_alphanumeric) else {
            out.push(RawWord {
                surface: token.to_string(),
                space_before: first_space,
            });
            continue;
        };
        let (last_idx, last_char) = token
            .char_indices()
            .rev()
            .find(|(_, c)| c.is_alphanumeric())
            .expect("has alphanumeric");
        let end = last_idx + last_char.len_utf8();
        let pieces = [&token[..start], &token[start..end], &token[end..]];
        let mut space = first_space;
        for piece in pieces.into_iter().filter(|p| !p.is_empty()) {
            out.push(RawWord {
                surface: piece.to_string(),
                space_before: space,
            });
            space = false;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub surface: String,
    pub phonemes: Vec<String>,
    pub graphemes: Vec<String>,
    pub is_punctuation: bool,
    /// Whether a space separated this word from the previous one in the normalized text.
    pub space_before: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedUtterance {
    pub words: Vec<Word>,
}

impl AlignedUtterance {
    /// Rebuilds the normalized text from the word surfaces.
    pub fn text(&self) -> String {
        let mut s = String::new();
        for w in &self.words {
            if w.space_before {
                s.push(' ');
            }
            s.push_str(&w.surface);
        }
        s
    }

    pub fn phoneme_count(&self) -> usize {
        self.words.iter().map(|w| w.phonemes.len()).sum()
    }

    pub fn grapheme_count(&self) -> usize {
        self.words.iter().map(|w| w.graphemes.len()).sum()
    }

    pub fn phonemes(&self) -> impl Iterator<Item = &str> {
        self.words
            .iter()
            .flat_map(|w| w.phonemes.iter().map(String::as_str))
    }
}

pub fn align_utterance(
    text: &str,
    lexicon: &Lexicon,
    model: &SubwordModel,
) -> Result<AlignedUtterance> {
    let normalized = normalize(text);
    if normalized.is_empty() {
        return Err(Error::EmptyText);
    }
    let words = split_words(&normalized)
        .into_iter()
        .map(|raw| {
            let punct = is_punctuation(&raw.surface);
            Word {
                phonemes: if punct {
                    Vec::new()
                } else {
                    g2p(&raw.surface, lexicon)
                },
                graphemes: tokenize_graphemes(&raw.surface, model),
                is_punctuation: punct,
                surface: raw.surface,
                space_before: raw.space_before,
            }
        })
        .collect();
    Ok(AlignedUtterance { words })
}
