use crate::autodiff::{cosine_distance_slices, kl_diag_slices, Tensor};
use crate::error::{Error, Result};
use crate::models::losses::reconstruction_accuracy as batch_recon_accuracy;
use crate::models::network::{encode_hard, teacher_forced_logits, AutoencoderVars};
use crate::models::{LatentCode, ModelParams};
use crate::textpipe::{style_oracle, Batch, LabeledSentence, Vocabulary, BOS, EOS};
use crate::Graph;

/// Rows processed per forward pass during evaluation.
pub const EVAL_BATCH: usize = 256;

/// Largest fraction of rows latent preservation may skip.
pub const MAX_SKIPPED_FRACTION: f64 = 0.01;

fn batches<'a>(vocab: &'a Vocabulary, data: &'a [LabeledSentence], max_len: usize) -> impl Iterator<Item = Result<Batch>> + 'a {
    data.chunks(EVAL_BATCH).map(move |chunk| {
        let refs: Vec<&LabeledSentence> = chunk.iter().collect();
        Batch::from_sentences(vocab, &refs, max_len)
    })
}

/// Deterministic latent codes for every sentence.
pub fn encode_dataset(params: &ModelParams, vocab: &Vocabulary, data: &[LabeledSentence], max_len: usize) -> Result<Vec<LatentCode>> {
    let mut out = Vec::with_capacity(data.len());
    for batch in batches(vocab, data, max_len) {
        out.extend(params.encode(&batch?, true, 0)?);
    }
    Ok(out)
}

/// Content ids of a greedy output (before EOS), truncated to fit `max_len`.
fn content_ids(row: &[usize], max_len: usize) -> Vec<usize> {
    row.iter()
        .copied()
        .take_while(|&t| t != EOS)
        .take(max_len.saturating_sub(2))
        .collect()
}

/// Greedy rewrites with the flipped style code, as id rows without BOS or
/// EOS.
pub fn transfer_ids(params: &ModelParams, vocab: &Vocabulary, data: &[LabeledSentence], max_len: usize) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::with_capacity(data.len());
    for batch in batches(vocab, data, max_len) {
        for row in params.rewrite(&batch?, true, max_len)? {
            out.push(content_ids(&row, max_len));
        }
    }
    Ok(out)
}

/// Greedy rewrites with the flipped style code, as tokens.
pub fn transfer_sentences(params: &ModelParams, vocab: &Vocabulary, data: &[LabeledSentence], max_len: usize) -> Result<Vec<Vec<String>>> {
    Ok(transfer_ids(params, vocab, data, max_len)?
        .iter()
        .map(|ids| vocab.decode(ids))
        .collect())
}

/// Fraction of outputs the rule-based oracle labels with the flipped style.
/// Outputs with no markers or tied counts count as failures.
pub fn transfer_accuracy_of<S: AsRef<str>>(outputs: &[Vec<S>], source_labels: &[usize]) -> f64 {
    if outputs.is_empty() {
        return 0.0;
    }
    let hits = outputs
        .iter()
        .zip(source_labels)
        .filter(|(o, &l)| style_oracle(o) == Some(1 - l))
        .count();
    hits as f64 / outputs.len() as f64
}

pub fn transfer_accuracy(params: &ModelParams, vocab: &Vocabulary, data: &[LabeledSentence], max_len: usize) -> Result<f64> {
    let outputs = transfer_sentences(params, vocab, data, max_len)?;
    let labels: Vec<usize> = data.iter().map(|s| s.style_label).collect();
    Ok(transfer_accuracy_of(&outputs, &labels))
}

/// Mean distances between the posteriors of inputs and of their transfers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preservation {
    pub mean_cosine: f64,
    pub mean_kl: f64,
    /// Rows skipped because a mean vector had zero norm.
    pub skipped: usize,
    /// All input means lie within 1e-6 of each other.
    pub collapsed: bool,
}

/// Encodes each input, rewrites it with the flipped style, re-encodes the
/// rewrite and averages cosine distance and KL(q(x) || q(x̂)) of the means.
pub fn latent_preservation(params: &ModelParams, vocab: &Vocabulary, data: &[LabeledSentence], max_len: usize) -> Result<Preservation> {
    if data.is_empty() {
        return Err(Error::Invalid("latent preservation needs at least one sentence".into()));
    }
    let inputs = encode_dataset(params, vocab, data, max_len)?;
    let outputs = transfer_ids(params, vocab, data, max_len)?;
    let labels: Vec<usize> = data.iter().map(|s| s.style_label).collect();
    let re_encoded = encode_rewrites(params, &outputs, &labels)?;
    preservation_of(&inputs, &re_encoded)
}

/// Encodes rewrites given as content ids; each carries the flipped style of
/// its source label.
pub fn encode_rewrites(params: &ModelParams, outputs: &[Vec<usize>], source_labels: &[usize]) -> Result<Vec<LatentCode>> {
    let mut codes = Vec::with_capacity(outputs.len());
    for (chunk, labels) in outputs.chunks(EVAL_BATCH).zip(source_labels.chunks(EVAL_BATCH)) {
        let rows = chunk
            .iter()
            .map(|ids| {
                let mut r = Vec::with_capacity(ids.len() + 2);
                r.push(BOS);
                r.extend_from_slice(ids);
                r.push(EOS);
                r
            })
            .collect();
        let styles = labels.iter().map(|&l| 1 - l).collect();
        codes.extend(params.encode(&Batch::from_ids(rows, styles)?, true, 0)?);
    }
    Ok(codes)
}

/// Cosine and KL averages over paired codes.
pub fn preservation_of(inputs: &[LatentCode], outputs: &[LatentCode]) -> Result<Preservation> {
    if inputs.len() != outputs.len() || inputs.is_empty() {
        return Err(Error::Invalid(format!("{} inputs for {} outputs", inputs.len(), outputs.len())));
    }
    let (mut cos, mut kl, mut used, mut skipped) = (0.0, 0.0, 0usize, 0usize);
    for (a, b) in inputs.iter().zip(outputs) {
        match cosine_distance_slices(&a.mu, &b.mu) {
            Ok(c) => {
                cos += c;
                kl += kl_diag_slices(&a.mu, &a.logvar, &b.mu, &b.logvar);
                used += 1;
            }
            Err(Error::Degenerate(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if skipped as f64 > MAX_SKIPPED_FRACTION * inputs.len() as f64 {
        return Err(Error::Degenerate(format!(
            "{skipped} of {} latent means have zero norm",
            inputs.len()
        )));
    }
    let first = &inputs[0].mu;
    let collapsed = inputs
        .iter()
        .all(|c| c.mu.iter().zip(first).all(|(x, y)| (x - y).abs() <= 1e-6));
    Ok(Preservation {
        mean_cosine: cos / used as f64,
        mean_kl: kl / used as f64,
        skipped,
        collapsed,
    })
}

/// Masked teacher-forced token accuracy with `z` set to the posterior mean.
pub fn reconstruction_accuracy(params: &ModelParams, vocab: &Vocabulary, data: &[LabeledSentence], max_len: usize) -> Result<f64> {
    let (mut hit, mut total) = (0, 0);
    for batch in batches(vocab, data, max_len) {
        let batch = batch?;
        let mut g = Graph::new();
        let ae = AutoencoderVars::bind(&mut g, &params.autoencoder, params.dims, false);
        let (mu, _) = encode_hard(&mut g, &ae, &batch)?;
        let code = g.constant(batch.style_codes(false));
        let logits = teacher_forced_logits(&mut g, &ae, &batch, mu, code)?;
        let (h, t) = batch_recon_accuracy(g.value(logits), &batch);
        hit += h;
        total += t;
    }
    Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
}

/// `(mu, label)` pairs for probing.
pub fn probe_inputs(codes: &[LatentCode], labels: &[usize]) -> Vec<(Vec<f64>, usize)> {
    codes.iter().zip(labels).map(|(c, &l)| (c.mu.clone(), l)).collect()
}

/// Latent means stacked into a `[N, d_z]` tensor.
pub fn stack_means(codes: &[LatentCode]) -> Result<Tensor> {
    let rows: Vec<Vec<f64>> = codes.iter().map(|c| c.mu.clone()).collect();
    Tensor::from_rows(&rows)
}
