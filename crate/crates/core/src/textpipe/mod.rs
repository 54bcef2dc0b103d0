//! Vocabulary, batching, corpus files and the synthetic two-style corpus.

mod batch;
mod corpus;
pub mod io;
mod vocab;

pub use batch::{make_batches, one_hot_styles, Batch};
pub use corpus::{
    flip_label, generate_synthetic_corpus, style_oracle, synthetic_token_inventory, LabeledSentence,
    CONTENT_TEMPLATES, ENTANGLED_SLOTS, NEUTRAL_SLOTS, STYLE_MARKERS,
};
pub use vocab::{TokenSequence, Vocabulary, BOS, EOS, PAD, UNK};

/// Default padded sentence length.
pub const DEFAULT_MAX_LEN: usize = 16;

/// Vocabulary over the token lists of `data` with threshold `min_count`.
pub fn vocab_for(data: &[LabeledSentence], min_count: usize) -> crate::Result<Vocabulary> {
    let tokens: Vec<&[String]> = data.iter().map(|s| s.tokens.as_slice()).collect();
    let owned: Vec<Vec<&str>> = tokens
        .iter()
        .map(|t| t.iter().map(String::as_str).collect())
        .collect();
    Vocabulary::build(&owned, min_count)
}
