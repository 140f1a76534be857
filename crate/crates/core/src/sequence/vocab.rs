use std::collections::{BTreeSet, HashMap};
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};
use crate::frontend::{Lexicon, SubwordModel};

pub const PAD: usize = 0;
pub const CLS: usize = 1;
pub const SEP: usize = 2;
pub const MSK: usize = 3;
pub const SPECIALS: [&str; 4] = ["[PAD]", "[CLS]", "[SEP]", "[MSK]"];

const MAGIC: &str = "pngbert-vocab";
const VERSION: u32 = 1;

/// Shared ID space: specials, then phonemes, then subwords.
///
/// Phoneme and subword blocks are each sorted; the subword block ends with the
/// unk symbol. A phoneme and a subword with the same spelling get distinct IDs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    symbols: Vec<String>,
    phoneme_count: usize,
    subword_count: usize,
    unk_id: usize,
    phoneme_index: HashMap<String, usize>,
    subword_index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_symbols<'a>(
        phonemes: impl IntoIterator<Item = &'a str>,
        subwords: impl IntoIterator<Item = &'a str>,
        unk: &str,
    ) -> Result<Self> {
        let phonemes: BTreeSet<&str> = phonemes.into_iter().collect();
        let mut subwords: BTreeSet<&str> = subwords.into_iter().collect();
        subwords.remove(unk);
        if subwords.is_empty() {
            return Err(Error::EmptySubwordVocab);
        }
        let mut symbols: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        symbols.extend(phonemes.iter().map(|s| s.to_string()));
        symbols.extend(subwords.iter().map(|s| s.to_string()));
        symbols.push(unk.to_string());
        Ok(Self::from_layout(symbols, phonemes.len(), subwords.len() + 1))
    }

    fn from_layout(symbols: Vec<String>, phoneme_count: usize, subword_count: usize) -> Self {
        let p0 = SPECIALS.len();
        let s0 = p0 + phoneme_count;
        let phoneme_index = (p0..s0).map(|i| (symbols[i].clone(), i)).collect();
        let subword_index = (s0..s0 + subword_count)
            .map(|i| (symbols[i].clone(), i))
            .collect();
        Vocab {
            unk_id: s0 + subword_count - 1,
            symbols,
            phoneme_count,
            subword_count,
            phoneme_index,
            subword_index,
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn phoneme_id(&self, symbol: &str) -> Option<usize> {
        self.phoneme_index.get(symbol).copied()
    }

    pub fn subword_id(&self, symbol: &str) -> Option<usize> {
        self.subword_index.get(symbol).copied()
    }

    pub fn unk_id(&self) -> usize {
        self.unk_id
    }

    pub fn phoneme_range(&self) -> Range<usize> {
        SPECIALS.len()..SPECIALS.len() + self.phoneme_count
    }

    /// Whole subword block, unk included.
    pub fn subword_range(&self) -> Range<usize> {
        let s0 = self.phoneme_range().end;
        s0..s0 + self.subword_count
    }

    /// Subwords eligible as random replacements (unk excluded).
    pub fn random_subword_range(&self) -> Range<usize> {
        let r = self.subword_range();
        r.start..r.end - 1
    }

    pub fn phoneme_count(&self) -> usize {
        self.phoneme_count
    }

    /// Number of subword IDs, unk included.
    pub fn subword_count(&self) -> usize {
        self.subword_count
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{MAGIC}\t{VERSION}\tphonemes={}\tsubwords={}\n",
            self.phoneme_count, self.subword_count
        );
        for s in &self.symbols {
            out.push_str(s);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Format(format!("vocab file: {msg}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        let fields: Vec<&str> = header.split('\t').collect();
        if fields.len() != 4 || fields[0] != MAGIC || fields[1] != VERSION.to_string() {
            return Err(bad("bad magic or version"));
        }
        let count = |f: &str, key: &str| -> Result<usize> {
            f.strip_prefix(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("bad block count"))
        };
        let phoneme_count = count(fields[2], "phonemes=")?;
        let subword_count = count(fields[3], "subwords=")?;
        let symbols: Vec<String> = lines.map(str::to_string).collect();
        if symbols.len() != SPECIALS.len() + phoneme_count + subword_count || subword_count < 2 {
            return Err(bad("symbol count does not match header"));
        }
        if symbols[..SPECIALS.len()] != SPECIALS {
            return Err(bad("special block mismatch"));
        }
        Ok(Self::from_layout(symbols, phoneme_count, subword_count))
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

pub fn build_vocab(lexicon: &Lexicon, model: &SubwordModel) -> Result<Vocab> {
    Vocab::from_symbols(
        lexicon.phoneme_inventory().iter().map(String::as_str),
        model.vocab().iter().map(String::as_str),
        model.unk_symbol(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::train_bpe;

    #[test]
    fn block_order_by_hand() {
        let v = Vocab::from_symbols(["UW", "T"], ["b", "a"], "<unk>").unwrap();
        let ids: Vec<_> = (0..8).map(|i| v.symbol(i).unwrap()).collect();
        assert_eq!(
            ids,
            ["[PAD]", "[CLS]", "[SEP]", "[MSK]", "T", "UW", "a", "b"]
        );
        assert_eq!(v.phoneme_id("T"), Some(4));
        assert_eq!(v.phoneme_id("UW"), Some(5));
        assert_eq!(v.subword_id("a"), Some(6));
        assert_eq!(v.subword_id("b"), Some(7));
        assert_eq!(v.unk_id(), 8);
        assert_eq!(v.random_subword_range(), 6..8);
    }

    #[test]
    fn empty_subwords_rejected() {
        assert!(matches!(
            Vocab::from_symbols(["T"], [], "<unk>"),
            Err(Error::EmptySubwordVocab)
        ));
    }

    #[test]
    fn same_spelling_in_both_blocks() {
        let v = Vocab::from_symbols(["a"], ["a"], "<unk>").unwrap();
        assert_eq!(v.phoneme_id("a"), Some(4));
        assert_eq!(v.subword_id("a"), Some(5));
    }

    #[test]
    fn deterministic_and_round_trips() {
        let lex = Lexicon::parse("two T UW\n").unwrap();
        let model = train_bpe(["two too to"], 8).unwrap();
        let a = build_vocab(&lex, &model).unwrap();
        let b = build_vocab(&lex, &model).unwrap();
        assert_eq!(a, b);
        assert_eq!(Vocab::parse(&a.to_text()).unwrap(), a);
        assert_eq!(a.len(), 4 + lex.phoneme_inventory().len() + model.vocab().len() + 1);
    }
}
