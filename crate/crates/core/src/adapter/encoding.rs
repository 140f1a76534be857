use std::io::Read;
use std::path::Path;

use ndarray::{s, Array2};

use crate::encoder::ForwardTrace;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sequence::{InputSequence, Vocab};

pub const MAGIC: &str = "PNGBERT-PHONEMES";

#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeEncoding<T> {
    /// `P x hidden`, rows in phoneme order.
    pub states: Array2<T>,
    pub phoneme_symbols: Vec<String>,
    pub word_ids: Vec<usize>,
    /// Set when the input had no phoneme tokens.
    pub empty: bool,
}

impl<T> PhonemeEncoding<T> {
    pub fn len(&self) -> usize {
        self.phoneme_symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phoneme_symbols.is_empty()
    }
}

pub fn extract_phoneme_states<T: Scalar>(
    trace: &ForwardTrace<T>,
    input: &InputSequence,
    vocab: &Vocab,
) -> PhonemeEncoding<T> {
    let span = input.phoneme_span.clone();
    if span.is_empty() {
        log::warn!("phoneme encoding: input has no phoneme tokens");
    }
    PhonemeEncoding {
        states: trace.final_hidden.slice(s![span.clone(), ..]).to_owned(),
        phoneme_symbols: span
            .clone()
            .map(|i| vocab.symbol(input.token_ids[i]).unwrap_or("?").to_string())
            .collect(),
        word_ids: input.word_ids[span.clone()].to_vec(),
        empty: span.is_empty(),
    }
}

/// Header line `PNGBERT-PHONEMES<TAB>P<TAB>hidden`, then `P * hidden`
/// little-endian `f32` values, row-major.
pub fn write_phoneme_encoding<T: Scalar>(
    path: impl AsRef<Path>,
    enc: &PhonemeEncoding<T>,
) -> Result<()> {
    let path = path.as_ref();
    let (p, d) = enc.states.dim();
    let mut out = format!("{MAGIC}\t{p}\t{d}\n").into_bytes();
    for &x in enc.states.iter() {
        (x.to_f64_lossy() as f32).write_le(&mut out);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_phoneme_encoding(path: impl AsRef<Path>) -> Result<Array2<f32>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("phoneme encoding: missing header".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).unwrap_or("");
    let fields: Vec<&str> = header.split('\t').collect();
    let dims: Option<(usize, usize)> = match fields.as_slice() {
        [m, p, d] if *m == MAGIC => p.parse().ok().zip(d.parse().ok()),
        _ => None,
    };
    let (p, d) = dims.ok_or_else(|| Error::Format(format!("phoneme encoding header `{header}`")))?;
    let body = &bytes[nl + 1..];
    if body.len() != p * d * 4 {
        return Err(Error::Format(format!(
            "phoneme encoding body is {} bytes, expected {}",
            body.len(),
            p * d * 4
        )));
    }
    let data: Vec<f32> = body.chunks_exact(4).map(f32::read_le).collect();
    Ok(Array2::from_shape_vec((p, d), data).expect("length checked"))
}
