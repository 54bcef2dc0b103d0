use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::corpus::LabeledSentence;
use super::vocab::{Vocabulary, PAD};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Padded id matrix `[batch, seq_len]` with its PAD mask and style labels.
///
/// `seq_len` is the longest encoded row in the batch, so every row holds
/// BOS ... EOS followed by PAD.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    ids: Vec<usize>,
    mask: Vec<bool>,
    styles: Vec<usize>,
    batch_size: usize,
    seq_len: usize,
}

impl Batch {
    pub fn from_sentences(vocab: &Vocabulary, sentences: &[&LabeledSentence], max_len: usize) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::Invalid("batch needs at least one sentence".into()));
        }
        let encoded = sentences
            .iter()
            .map(|s| vocab.encode_sentence(&s.tokens, max_len))
            .collect::<Result<Vec<_>>>()?;
        let styles = sentences.iter().map(|s| s.style_label).collect();
        Self::from_ids(encoded.iter().map(|e| e.ids().to_vec()).collect(), styles)
    }

    /// Builds a batch from `BOS ... EOS [PAD...]` rows of any length.
    pub fn from_ids(rows: Vec<Vec<usize>>, styles: Vec<usize>) -> Result<Self> {
        if rows.is_empty() || rows.len() != styles.len() {
            return Err(Error::Invalid(format!(
                "{} rows for {} style labels",
                rows.len(),
                styles.len()
            )));
        }
        if let Some(s) = styles.iter().find(|&&s| s > 1) {
            return Err(Error::Invalid(format!("style label {s} is not binary")));
        }
        let seq_len = rows
            .iter()
            .map(|r| r.iter().filter(|&&id| id != PAD).count())
            .max()
            .unwrap_or(0);
        if seq_len < 2 {
            return Err(Error::Invalid("rows need at least BOS and EOS".into()));
        }
        let batch_size = rows.len();
        let mut ids = Vec::with_capacity(batch_size * seq_len);
        for r in &rows {
            let mut row: Vec<usize> = r.iter().copied().filter(|&id| id != PAD).collect();
            row.resize(seq_len, PAD);
            ids.extend(row);
        }
        let mask = ids.iter().map(|&id| id != PAD).collect();
        Ok(Self {
            ids,
            mask,
            styles,
            batch_size,
            seq_len,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn styles(&self) -> &[usize] {
        &self.styles
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.ids[i * self.seq_len..(i + 1) * self.seq_len]
    }

    /// Ids at time step `t` for every row.
    pub fn column(&self, t: usize) -> Vec<usize> {
        (0..self.batch_size).map(|i| self.ids[i * self.seq_len + t]).collect()
    }

    pub fn column_mask(&self, t: usize) -> Vec<bool> {
        (0..self.batch_size).map(|i| self.mask[i * self.seq_len + t]).collect()
    }

    /// One-hot style codes `[batch, 2]`; `flipped` gives the inverse codes.
    pub fn style_codes(&self, flipped: bool) -> Tensor {
        one_hot_styles(&self.styles, flipped)
    }
}

pub fn one_hot_styles(styles: &[usize], flipped: bool) -> Tensor {
    let mut data = vec![0.0; styles.len() * 2];
    for (i, &s) in styles.iter().enumerate() {
        let s = if flipped { 1 - s } else { s };
        data[i * 2 + s] = 1.0;
    }
    Tensor::from_parts(vec![styles.len(), 2], data)
}

/// Seeded shuffle followed by fixed-size batches; the last may be smaller.
pub fn make_batches(
    data: &[LabeledSentence],
    vocab: &Vocabulary,
    batch_size: usize,
    max_len: usize,
    seed: u64,
) -> Result<Vec<Batch>> {
    if data.is_empty() {
        return Err(Error::Invalid("cannot batch an empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(Error::Invalid("batch_size must be at least 1".into()));
    }
    let mut order: Vec<&LabeledSentence> = data.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
        .chunks(batch_size)
        .map(|chunk| Batch::from_sentences(vocab, chunk, max_len))
        .collect()
}
