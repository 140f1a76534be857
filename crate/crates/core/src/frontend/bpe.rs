//! Byte-pair encoding over characters, trained on whitespace-split words.
//!
//! Merges never cross word boundaries and there is no end-of-word marker, so
//! the subwords of a word concatenate back to the word itself.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::frontend::align::{normalize, split_words};

pub const DEFAULT_UNK: &str = "<unk>";
const MAGIC: &str = "pngbert-bpe";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordModel {
    merges: Vec<(String, String)>,
    vocab: BTreeSet<String>,
    unk_symbol: String,
    vocab_size: usize,
    ranks: HashMap<(String, String), usize>,
}

impl SubwordModel {
    pub fn new(
        merges: Vec<(String, String)>,
        vocab: BTreeSet<String>,
        unk_symbol: impl Into<String>,
        vocab_size: usize,
    ) -> Self {
        let ranks = merges
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, pair)| (pair, i))
            .collect();
        SubwordModel {
            merges,
            vocab,
            unk_symbol: unk_symbol.into(),
            vocab_size,
            ranks,
        }
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    pub fn unk_symbol(&self) -> &str {
        &self.unk_symbol
    }

    /// Requested size at training time. The actual vocab can be smaller when
    /// the corpus runs out of pairs to merge.
    pub fn target_vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{MAGIC}\t{VERSION}\tvocab_size={}\tunk={}\n",
            self.vocab_size, self.unk_symbol
        );
        for (l, r) in &self.merges {
            let _ = writeln!(out, "{l}\t{r}");
        }
        out.push('\n');
        for sym in &self.vocab {
            let _ = writeln!(out, "{sym}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Parse {
            what: "subword model".into(),
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let fields: Vec<&str> = header.split('\t').collect();
        if fields.len() != 4 || fields[0] != MAGIC {
            return Err(bad(1, "not a subword model file"));
        }
        if fields[1] != VERSION.to_string() {
            return Err(Error::Format(format!(
                "subword model version {} (expected {VERSION})",
                fields[1]
            )));
        }
        let vocab_size = fields[2]
            .strip_prefix("vocab_size=")
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| bad(1, "bad vocab_size field"))?;
        let unk = fields[3]
            .strip_prefix("unk=")
            .filter(|u| !u.is_empty())
            .ok_or_else(|| bad(1, "bad unk field"))?;

        let mut merges = Vec::new();
        let mut in_vocab = false;
        let mut vocab = BTreeSet::new();
        for (idx, line) in lines {
            if !in_vocab {
                if line.is_empty() {
                    in_vocab = true;
                    continue;
                }
                let (l, r) = line
                    .split_once('\t')
                    .filter(|(l, r)| !l.is_empty() && !r.is_empty() && !r.contains('\t'))
                    .ok_or_else(|| bad(idx + 1, "expected `left<TAB>right`"))?;
                merges.push((l.to_string(), r.to_string()));
            } else if !line.is_empty() {
                vocab.insert(line.to_string());
            }
        }
        if !in_vocab {
            return Err(bad(0, "missing blank line before vocab"));
        }
        Ok(SubwordModel::new(merges, vocab, unk, vocab_size))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| e.in_file(path))
    }
}

fn merge_pair(symbols: &[String], left: &str, right: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
            out.push(format!("{left}{right}"));
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

/// Trains a character-level BPE model on the words of `corpus`.
///
/// The most frequent adjacent pair is merged until the vocabulary holds
/// `vocab_size` symbols; equal counts go to the lexicographically smaller pair.
pub fn train_bpe<I, S>(corpus: I, vocab_size: usize) -> Result<SubwordModel>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut freqs: BTreeMap<String, usize> = BTreeMap::new();
    for sentence in corpus {
        for word in split_words(&normalize(sentence.as_ref())) {
            *freqs.entry(word.surface).or_default() += 1;
        }
    }
    if freqs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut words: Vec<(Vec<String>, usize)> = freqs
        .into_iter()
        .map(|(w, n)| (w.chars().map(String::from).collect(), n))
        .collect();
    let mut vocab: BTreeSet<String> = words.iter().flat_map(|(s, _)| s.iter().cloned()).collect();
    if vocab_size < vocab.len() {
        return Err(Error::VocabTooSmall {
            requested: vocab_size,
            chars: vocab.len(),
        });
    }

    let mut merges = Vec::new();
    while vocab.len() < vocab_size {
        let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
        for (symbols, n) in &words {
            for pair in symbols.windows(2) {
                *counts.entry((&pair[0], &pair[1])).or_default() += n;
            }
        }
        // BTreeMap iterates pairs in ascending order, so keeping the first
        // maximum resolves ties lexicographically.
        let mut best: Option<((&str, &str), usize)> = None;
        for (pair, n) in counts {
            if best.is_none_or(|(_, m)| n > m) {
                best = Some((pair, n));
            }
        }
        let Some(((l, r), _)) = best else {
            log::warn!(
                "bpe: corpus exhausted at {} symbols (requested {vocab_size})",
                vocab.len()
            );
            break;
        };
        let (l, r) = (l.to_string(), r.to_string());
        for (symbols, _) in words.iter_mut() {
            *symbols = merge_pair(symbols, &l, &r);
        }
        vocab.insert(format!("{l}{r}"));
        merges.push((l, r));
    }
    Ok(SubwordModel::new(merges, vocab, DEFAULT_UNK, vocab_size))
}

/// Splits `word` into subwords by replaying the merge rules in training order.
///
/// Characters never seen in training come out as the model's unk symbol.
pub fn tokenize_graphemes(word: &str, model: &SubwordModel) -> Vec<String> {
    let mut symbols: Vec<Option<String>> = word
        .chars()
        .map(|c| {
            let s = c.to_string();
            model.vocab.contains(&s).then_some(s)
        })
        .collect();
    loop {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..symbols.len().saturating_sub(1) {
            if let (Some(l), Some(r)) = (&symbols[i], &symbols[i + 1]) {
                if let Some(&rank) = model.ranks.get(&(l.clone(), r.clone())) {
                    if best.is_none_or(|(b, _)| rank < b) {
                        best = Some((rank, i));
                    }
                }
            }
        }
        let Some((rank, _)) = best else { break };
        let (l, r) = &model.merges[rank];
        let mut out = Vec::with_capacity(symbols.len());
        let mut i = 0;
        while i < symbols.len() {
            let hit = i + 1 < symbols.len()
                && symbols[i].as_deref() == Some(l.as_str())
                && symbols[i + 1].as_deref() == Some(r.as_str());
            if hit {
                out.push(Some(format!("{l}{r}")));
                i += 2;
            } else {
                out.push(symbols[i].take());
                i += 1;
            }
        }
        symbols = out;
    }
    symbols
        .into_iter()
        .map(|s| match s {
            Some(s) if model.vocab.contains(&s) => s,
            _ => model.unk_symbol.clone(),
        })
        .collect()
}
