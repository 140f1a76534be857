//! Frontend artifacts bundled for turning raw text into model inputs.

use crate::error::{Error, Result};
use crate::frontend::{align_utterance, AlignedUtterance, Lexicon, SubwordModel};
use crate::sequence::{build_input, build_vocab, InputSequence, Vocab};

#[derive(Debug, Clone)]
pub struct Frontend {
    pub lexicon: Lexicon,
    pub subwords: SubwordModel,
    pub vocab: Vocab,
}

/// Result of running a corpus through the frontend.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub examples: Vec<InputSequence>,
    pub texts: Vec<String>,
    /// Sentences dropped as over-length (never truncated) or empty.
    pub skipped: usize,
}

impl Frontend {
    pub fn new(lexicon: Lexicon, subwords: SubwordModel) -> Result<Self> {
        let vocab = build_vocab(&lexicon, &subwords)?;
        Ok(Frontend {
            lexicon,
            subwords,
            vocab,
        })
    }

    pub fn align(&self, text: &str) -> Result<AlignedUtterance> {
        align_utterance(text, &self.lexicon, &self.subwords)
    }

    pub fn encode(&self, text: &str, max_len: usize) -> Result<InputSequence> {
        build_input(&self.align(text)?, &self.vocab, max_len)
    }

    pub fn prepare<I, S>(&self, sentences: I, max_len: usize) -> Result<Prepared>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = Prepared {
            examples: Vec::new(),
            texts: Vec::new(),
            skipped: 0,
        };
        for s in sentences {
            match self.encode(s.as_ref(), max_len) {
                Ok(seq) => {
                    out.examples.push(seq);
                    out.texts.push(s.as_ref().to_string());
                }
                Err(Error::SequenceTooLong { .. } | Error::EmptyText | Error::EmptyUtterance) => {
                    out.skipped += 1
                }
                Err(e) => return Err(e),
            }
        }
        if out.skipped > 0 {
            log::info!("frontend: skipped {} sentences", out.skipped);
        }
        Ok(out)
    }
}
