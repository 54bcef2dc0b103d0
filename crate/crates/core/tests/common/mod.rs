//! Shared helpers for the integration tests.
#![allow(dead_code)]

pub mod bleu_oracle;
pub mod gradcheck;

use styledecomp::models::ModelDims;
use styledecomp::textpipe::{generate_synthetic_corpus, make_batches, vocab_for};
use styledecomp::{Batch, LabeledSentence, ModelParams, Vocabulary};

/// Small corpus, vocabulary, model and batch for quick model-level checks.
pub fn tiny_setup(seed: u64, n: usize) -> (Vec<LabeledSentence>, Vocabulary, ModelParams, Batch) {
    let data = generate_synthetic_corpus(seed, n, 0.1).unwrap();
    let vocab = vocab_for(&data, 1).unwrap();
    let dims = ModelDims {
        vocab: vocab.len(),
        embed: 4,
        hidden: 5,
        latent: 3,
        disc_hidden: 4,
        latent_disc_hidden: 3,
    };
    let params = ModelParams::init(dims, seed).unwrap();
    let batch = make_batches(&data, &vocab, n, 16, seed).unwrap().remove(0);
    (data, vocab, params, batch)
}
