use super::bleu::bleu_corpus;
use super::measures::{encode_dataset, encode_rewrites, preservation_of, probe_inputs, transfer_accuracy_of, transfer_ids};
use super::probe::train_probe;
use super::report::RunMetrics;
use crate::error::{Error, Result};
use crate::models::{LatentCode, ModelParams};
use crate::textpipe::{LabeledSentence, Vocabulary};

/// Everything measured for one model on one dataset.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub metrics: RunMetrics,
    /// Deterministic codes of the inputs.
    pub codes: Vec<LatentCode>,
    /// Greedy rewrites with the flipped style.
    pub outputs: Vec<Vec<String>>,
}

/// Probe accuracy, BLEU (when every sentence has a reference), transfer
/// accuracy and latent preservation for a trained model.
pub fn evaluate_model(
    params: &ModelParams,
    vocab: &Vocabulary,
    data: &[LabeledSentence],
    max_len: usize,
    probe_seed: u64,
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Invalid("evaluation data is empty".into()));
    }
    let labels: Vec<usize> = data.iter().map(|s| s.style_label).collect();
    let codes = encode_dataset(params, vocab, data, max_len)?;
    let (_, probe_accuracy) = train_probe(&probe_inputs(&codes, &labels), probe_seed)?;

    let ids = transfer_ids(params, vocab, data, max_len)?;
    let outputs: Vec<Vec<String>> = ids.iter().map(|r| vocab.decode(r)).collect();
    let refs: Option<Vec<Vec<String>>> = data.iter().map(|s| s.reference.clone()).collect();
    let bleu = refs.map(|r| bleu_corpus(&outputs, &r)).transpose()?;

    let re_encoded = encode_rewrites(params, &ids, &labels)?;
    let pres = preservation_of(&codes, &re_encoded)?;

    Ok(Evaluation {
        metrics: RunMetrics {
            probe_accuracy,
            bleu,
            transfer_accuracy: transfer_accuracy_of(&outputs, &labels),
            mean_cosine_distance: pres.mean_cosine,
            mean_kl: pres.mean_kl,
        },
        codes,
        outputs,
    })
}
