//! Pronunciation lexicon and lexicon-backed grapheme-to-phoneme lookup.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};

/// Phoneme emitted for words whose letters have no table entry (digits, non-Latin scripts).
pub const SPOKEN_NOISE: &str = "SPN";

/// Letter-to-phoneme table used for out-of-lexicon words, one phoneme per letter.
pub const LETTER_PHONEMES: [(char, &str); 26] = [
    ('a', "AE"),
    ('b', "B"),
    ('c', "K"),
    ('d', "D"),
    ('e', "EH"),
    ('f', "F"),
    ('g', "G"),
    ('h', "HH"),
    ('i', "IH"),
    ('j', "JH"),
    ('k', "K"),
    ('l', "L"),
    ('m', "M"),
    ('n', "N"),
    ('o', "AA"),
    ('p', "P"),
    ('q', "K"),
    ('r', "R"),
    ('s', "S"),
    ('t', "T"),
    ('u', "AH"),
    ('v', "V"),
    ('w', "W"),
    ('x', "K"),
    ('y', "Y"),
    ('z', "Z"),
];

fn letter_phoneme(c: char) -> Option<&'static str> {
    LETTER_PHONEMES
        .iter()
        .find(|(l, _)| *l == c)
        .map(|(_, p)| *p)
}

/// A word counts as punctuation when it has no alphanumeric character.
pub fn is_punctuation(word: &str) -> bool {
    !word.chars().any(char::is_alphanumeric)
}

/// Word to phoneme mapping. Keys are lowercase.
///
/// The inventory covers every phoneme the lexicon can emit, including the
/// letter fallback table and [`SPOKEN_NOISE`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<String>>,
    phoneme_inventory: BTreeSet<String>,
}

impl Lexicon {
    pub fn from_entries<I, W, P>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (W, Vec<P>)>,
        W: Into<String>,
        P: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (word, phonemes) in entries {
            let word = word.into().to_lowercase();
            let phonemes: Vec<String> = phonemes.into_iter().map(Into::into).collect();
            insert_entry(&mut map, word, phonemes)?;
        }
        Self::from_map(map)
    }

    fn from_map(entries: BTreeMap<String, Vec<String>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyLexicon);
        }
        if let Some((word, _)) = entries.iter().find(|(_, p)| p.is_empty()) {
            return Err(Error::Parse {
                what: "lexicon".into(),
                line: 0,
                msg: format!("word `{word}` has no phonemes"),
            });
        }
        let mut phoneme_inventory: BTreeSet<String> =
            entries.values().flatten().cloned().collect();
        phoneme_inventory.extend(LETTER_PHONEMES.iter().map(|(_, p)| p.to_string()));
        phoneme_inventory.insert(SPOKEN_NOISE.to_string());
        Ok(Lexicon {
            entries,
            phoneme_inventory,
        })
    }

    /// Parses `word phoneme phoneme ...` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().expect("non-empty line").to_lowercase();
            let phonemes: Vec<String> = fields.map(str::to_string).collect();
            if phonemes.is_empty() {
                return Err(Error::Parse {
                    what: "lexicon".into(),
                    line: idx + 1,
                    msg: format!("word `{word}` has no phonemes"),
                });
            }
            insert_entry(&mut map, word, phonemes)?;
        }
        Self::from_map(map)
    }

    pub fn entries(&self) -> &BTreeMap<String, Vec<String>> {
        &self.entries
    }

    pub fn phoneme_inventory(&self) -> &BTreeSet<String> {
        &self.phoneme_inventory
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn insert_entry(
    map: &mut BTreeMap<String, Vec<String>>,
    word: String,
    phonemes: Vec<String>,
) -> Result<()> {
    match map.get(&word) {
        Some(existing) if *existing != phonemes => Err(Error::DuplicateEntry { word }),
        Some(_) => Ok(()),
        None => {
            map.insert(word, phonemes);
            Ok(())
        }
    }
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Lexicon::parse(&text).map_err(|e| e.in_file(path))
}

/// Looks `word` up in the lexicon, falling back to spelling it out letter by letter.
///
/// Punctuation-only words have no pronunciation and yield an empty list.
pub fn g2p(word: &str, lexicon: &Lexicon) -> Vec<String> {
    let word = word.to_lowercase();
    if let Some(p) = lexicon.get(&word) {
        return p.to_vec();
    }
    if is_punctuation(&word) {
        return Vec::new();
    }
    let spelled: Vec<String> = word
        .chars()
        .filter_map(letter_phoneme)
        .map(str::to_string)
        .collect();
    if spelled.is_empty() {
        vec![SPOKEN_NOISE.to_string()]
    } else {
        spelled
    }
}
