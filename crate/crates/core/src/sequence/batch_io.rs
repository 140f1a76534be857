//! Line-oriented serialization of masked examples.
//!
//! ```text
//! PNGBERT-MASKED<TAB>1
//! <p0> <p1> <g0> <g1> <W><TAB><tokens><TAB><segments><TAB><positions><TAB><words><TAB><targets><TAB><categories>
//! ```
//!
//! Each stream is space-separated integers of the sequence length. `targets`
//! holds the original token id at labeled positions and `-1` elsewhere;
//! `categories` is one character per position: `.` unlabeled, `m` mask,
//! `r` random, `k` keep.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::sequence::input::InputSequence;
use crate::sequence::masking::{Label, MaskCategory, MaskedInput};

pub const MAGIC: &str = "PNGBERT-MASKED";
pub const VERSION: u32 = 1;

fn join(xs: &[usize]) -> String {
    xs.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

pub fn write_masked<W: Write>(mut w: W, batch: &[MaskedInput]) -> std::io::Result<()> {
    writeln!(w, "{MAGIC}\t{VERSION}")?;
    for m in batch {
        let s = &m.input;
        let n = s.len();
        let mut targets = vec!["-1".to_string(); n];
        let mut cats = vec!['.'; n];
        for l in &m.labels {
            targets[l.position] = l.target.to_string();
            cats[l.position] = match l.category {
                MaskCategory::Mask => 'm',
                MaskCategory::Random => 'r',
                MaskCategory::Keep => 'k',
            };
        }
        writeln!(
            w,
            "{} {} {} {} {}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.phoneme_span.start,
            s.phoneme_span.end,
            s.grapheme_span.start,
            s.grapheme_span.end,
            s.word_count,
            join(&s.token_ids),
            join(&s.segment_ids),
            join(&s.position_ids),
            join(&s.word_ids),
            targets.join(" "),
            cats.into_iter().collect::<String>(),
        )?;
    }
    Ok(())
}

pub fn read_masked<R: BufRead>(r: R) -> Result<Vec<MaskedInput>> {
    let mut lines = r.lines().enumerate();
    let bad = |line: usize, msg: String| Error::Parse {
        what: "masked batch".into(),
        line,
        msg,
    };
    let io = |e| Error::io("<masked batch>", e);
    let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
    let header = header.map_err(io)?;
    if header != format!("{MAGIC}\t{VERSION}") {
        return Err(Error::Format(format!("masked batch header `{header}`")));
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(io)?;
        if line.is_empty() {
            continue;
        }
        let lno = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(bad(lno, format!("expected 7 fields, found {}", fields.len())));
        }
        let ints = |f: &str| -> Result<Vec<usize>> {
            f.split_whitespace()
                .map(|x| x.parse().map_err(|_| bad(lno, format!("bad integer `{x}`"))))
                .collect()
        };
        let meta = ints(fields[0])?;
        if meta.len() != 5 {
            return Err(bad(lno, "expected 5 span fields".into()));
        }
        let token_ids = ints(fields[1])?;
        let n = token_ids.len();
        let segment_ids = ints(fields[2])?;
        let position_ids = ints(fields[3])?;
        let word_ids = ints(fields[4])?;
        let targets: Vec<&str> = fields[5].split_whitespace().collect();
        let cats: Vec<char> = fields[6].chars().collect();
        if [segment_ids.len(), position_ids.len(), word_ids.len(), targets.len(), cats.len()]
            .iter()
            .any(|&l| l != n)
            || meta[1] > n
            || meta[3] > n
            || meta[0] > meta[1]
            || meta[2] > meta[3]
        {
            return Err(bad(lno, "stream lengths disagree".into()));
        }
        let mut labels = Vec::new();
        let mut selected_words = BTreeSet::new();
        for (pos, (t, c)) in targets.iter().zip(&cats).enumerate() {
            let category = match c {
                '.' => continue,
                'm' => MaskCategory::Mask,
                'r' => MaskCategory::Random,
                'k' => MaskCategory::Keep,
                other => return Err(bad(lno, format!("bad category `{other}`"))),
            };
            let target = t
                .parse()
                .map_err(|_| bad(lno, format!("bad target `{t}` at {pos}")))?;
            labels.push(Label {
                position: pos,
                target,
                category,
            });
            selected_words.insert(word_ids[pos]);
        }
        out.push(MaskedInput {
            input: InputSequence {
                token_ids,
                segment_ids,
                position_ids,
                word_ids,
                phoneme_span: meta[0]..meta[1],
                grapheme_span: meta[2]..meta[3],
                word_count: meta[4],
            },
            labels,
            selected_words,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use crate::sequence::masking::{apply_plain_masking, MaskRatios};
    use crate::sequence::vocab::{Vocab, CLS, SEP};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(nwords in 1usize..6, seed in any::<u64>()) {
            let v = Vocab::from_symbols(["A", "B", "C"], ["x", "y"], "<unk>").unwrap();
            let mut tokens = vec![CLS];
            let mut words = vec![0];
            for k in 0..nwords { tokens.push(4 + k % 3); words.push(k + 1); }
            let p_end = tokens.len();
            tokens.push(SEP); words.push(nwords + 1);
            for k in 0..nwords { tokens.push(7 + k % 2); words.push(k + 1); }
            let g_end = tokens.len();
            tokens.push(SEP); words.push(nwords + 1);
            let n = tokens.len();
            let seq = InputSequence {
                segment_ids: (0..n).map(|i| usize::from(i > p_end)).collect(),
                position_ids: (0..n).collect(),
                token_ids: tokens,
                word_ids: words,
                phoneme_span: 1..p_end,
                grapheme_span: p_end + 1..g_end,
                word_count: nwords,
            };
            let r = MaskRatios { mask: 0.4, random: 0.2, keep: 0.2 };
            let batch: Vec<_> = (0..3)
                .map(|i| apply_plain_masking(&seq, &r, &mut substream(seed + i, Stream::Masking), &v))
                .collect();
            let mut buf = Vec::new();
            write_masked(&mut buf, &batch).unwrap();
            let back = read_masked(buf.as_slice()).unwrap();
            prop_assert_eq!(back, batch);
        }
    }

    #[test]
    fn rejects_bad_header() {
        let err = read_masked("PNGBERT-MASKED\t9\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }
}
