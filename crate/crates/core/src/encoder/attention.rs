//! Attention export and the same-word cross-segment alignment score.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::encoder::forward::{AttentionRecord, ForwardTrace};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sequence::{InputSequence, PAD};

#[derive(Debug, Clone)]
pub struct AttentionExport<T> {
    pub record: AttentionRecord<T>,
    /// Per layer, head-averaged mass that phoneme tokens put on graphemes of their own word.
    pub layer_scores: Vec<f64>,
    /// The same score under uniform attention over the non-PAD tokens.
    pub baseline: f64,
}

/// Mean over phoneme tokens of the attention mass on same-word grapheme tokens,
/// one value per layer (averaged over heads). Zero when there are no phonemes.
pub fn alignment_scores<T: Scalar>(record: &AttentionRecord<T>, input: &InputSequence) -> Vec<f64> {
    let phonemes = input.phoneme_span.clone();
    if phonemes.is_empty() {
        return vec![0.0; record.probs.len()];
    }
    record
        .probs
        .iter()
        .map(|heads| {
            let total: f64 = heads
                .iter()
                .map(|a| {
                    phonemes
                        .clone()
                        .map(|i| {
                            input
                                .grapheme_span
                                .clone()
                                .filter(|&j| input.word_ids[j] == input.word_ids[i])
                                .map(|j| a[[i, j]].to_f64_lossy())
                                .sum::<f64>()
                        })
                        .sum::<f64>()
                })
                .sum();
            total / (heads.len() * phonemes.len()) as f64
        })
        .collect()
}

/// Alignment score of uniform attention: `g_w / N` averaged over phoneme tokens.
pub fn uniform_baseline(input: &InputSequence) -> f64 {
    let phonemes = input.phoneme_span.clone();
    if phonemes.is_empty() {
        return 0.0;
    }
    let real = input.token_ids.iter().filter(|&&t| t != PAD).count() as f64;
    let total: f64 = phonemes
        .clone()
        .map(|i| {
            input
                .grapheme_span
                .clone()
                .filter(|&j| input.word_ids[j] == input.word_ids[i])
                .count() as f64
                / real
        })
        .sum();
    total / phonemes.len() as f64
}

pub fn export_attention<T: Scalar>(
    trace: &ForwardTrace<T>,
    input: &InputSequence,
) -> AttentionExport<T> {
    AttentionExport {
        layer_scores: alignment_scores(&trace.attention, input),
        baseline: uniform_baseline(input),
        record: trace.attention.clone(),
    }
}

/// Tab-separated rows, one line per query position.
pub fn format_grid<T: Scalar>(m: &Array2<T>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{:.6e}", v.to_f64_lossy())).collect();
        let _ = writeln!(out, "{}", cells.join("\t"));
    }
    out
}

/// Writes `layer{L}_head{H}.tsv` for every matrix and returns the paths.
pub fn write_attention_grids<T: Scalar>(
    dir: impl AsRef<Path>,
    record: &AttentionRecord<T>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for (l, heads) in record.probs.iter().enumerate() {
        for (h, m) in heads.iter().enumerate() {
            let path = dir.join(format!("layer{l}_head{h}.tsv"));
            std::fs::write(&path, format_grid(m)).map_err(|e| Error::io(&path, e))?;
            paths.push(path);
        }
    }
    Ok(paths)
}
