use pngbert::frontend::{train_bpe, Lexicon};
use pngbert::Frontend;
use rand::Rng;
use rand_distr::{Distribution, Zipf};

use pngbert::rng::{substream, Stream};

/// Fifty frequent English words with stress-free ARPAbet pronunciations.
pub const TOY_LEXICON: [(&str, &str); 50] = [
    ("the", "DH AH"),
    ("a", "AH"),
    ("of", "AH V"),
    ("and", "AE N D"),
    ("to", "T UW"),
    ("in", "IH N"),
    ("is", "IH Z"),
    ("it", "IH T"),
    ("you", "Y UW"),
    ("that", "DH AE T"),
    ("he", "HH IY"),
    ("was", "W AA Z"),
    ("for", "F AO R"),
    ("on", "AA N"),
    ("are", "AA R"),
    ("with", "W IH DH"),
    ("they", "DH EY"),
    ("be", "B IY"),
    ("at", "AE T"),
    ("one", "W AH N"),
    ("have", "HH AE V"),
    ("this", "DH IH S"),
    ("from", "F R AH M"),
    ("by", "B AY"),
    ("hot", "HH AA T"),
    ("word", "W ER D"),
    ("but", "B AH T"),
    ("what", "W AH T"),
    ("some", "S AH M"),
    ("we", "W IY"),
    ("can", "K AE N"),
    ("out", "AW T"),
    ("other", "AH DH ER"),
    ("were", "W ER"),
    ("all", "AO L"),
    ("there", "DH EH R"),
    ("when", "W EH N"),
    ("up", "AH P"),
    ("use", "Y UW Z"),
    ("your", "Y AO R"),
    ("how", "HH AW"),
    ("said", "S EH D"),
    ("an", "AE N"),
    ("each", "IY CH"),
    ("she", "SH IY"),
    ("which", "W IH CH"),
    ("do", "D UW"),
    ("their", "DH EH R"),
    ("time", "T AY M"),
    ("if", "IH F"),
];

pub fn toy_lexicon() -> Lexicon {
    Lexicon::from_entries(
        TOY_LEXICON
            .iter()
            .map(|(w, p)| (*w, p.split_whitespace().collect::<Vec<_>>())),
    )
    .unwrap()
}

/// `n` sentences of 3..=8 Zipf-distributed lexicon words ending in a period.
pub fn toy_corpus(n: usize, seed: u64) -> Vec<String> {
    let mut rng = substream(seed, Stream::DataOrder);
    let zipf = Zipf::new(TOY_LEXICON.len() as f64, 0.8).unwrap();
    (0..n)
        .map(|_| {
            let len = rng.random_range(3..=8);
            let words: Vec<&str> = (0..len)
                .map(|_| TOY_LEXICON[zipf.sample(&mut rng) as usize - 1].0)
                .collect();
            format!("{}.", words.join(" "))
        })
        .collect()
}

/// Frontend with a BPE model trained on `corpus`, 24 merges past the alphabet.
pub fn toy_frontend(corpus: &[String]) -> Frontend {
    let chars: std::collections::BTreeSet<char> =
        corpus.iter().flat_map(|s| s.chars()).filter(|c| !c.is_whitespace()).collect();
    let bpe = train_bpe(corpus, chars.len() + 24).unwrap();
    Frontend::new(toy_lexicon(), bpe).unwrap()
}
