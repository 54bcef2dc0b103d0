use std::collections::HashMap;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;

const SPECIALS: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

/// Bijective token/id mapping with reserved ids for PAD, UNK, BOS and EOS.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    min_count: usize,
}

/// Fixed-length id sequence: BOS, ids, EOS, then PAD.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence(pub Vec<usize>);

impl TokenSequence {
    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    /// Number of non-PAD positions.
    pub fn len(&self) -> usize {
        self.0.iter().filter(|&&id| id != PAD).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Vocabulary {
    /// Tokens with frequency `>= min_count` get ids in descending frequency
    /// order, ties broken lexicographically.
    pub fn build<S: AsRef<str>>(corpus: &[Vec<S>], min_count: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Invalid("cannot build a vocabulary from an empty corpus".into()));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for sentence in corpus {
            for tok in sentence {
                *counts.entry(tok.as_ref()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_count.max(1) && !SPECIALS.contains(&t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut vocab = Self::from_tokens(kept.into_iter().map(|(t, _)| t.to_string()))?;
        vocab.min_count = min_count;
        Ok(vocab)
    }

    /// Vocabulary with the specials followed by `tokens` in order.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut all: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        all.extend(tokens);
        let mut index = HashMap::with_capacity(all.len());
        for (i, t) in all.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Invalid(format!("invalid token {t:?}")));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self {
            tokens: all,
            index,
            min_count: 1,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    /// Records the threshold the token list was built with.
    pub fn with_min_count(mut self, min_count: usize) -> Self {
        self.min_count = min_count;
        self
    }

    /// Non-special tokens in id order.
    pub fn content_tokens(&self) -> &[String] {
        &self.tokens[SPECIALS.len()..]
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// `BOS ids EOS PAD...` of exactly `max_len` entries; long inputs are
    /// truncated so EOS stays the last non-PAD id.
    pub fn encode_sentence<S: AsRef<str>>(&self, text: &[S], max_len: usize) -> Result<TokenSequence> {
        if max_len < 3 {
            return Err(Error::Invalid(format!("max_len must be at least 3, got {max_len}")));
        }
        let mut ids = Vec::with_capacity(max_len);
        ids.push(BOS);
        ids.extend(text.iter().take(max_len - 2).map(|t| self.id(t.as_ref())));
        ids.push(EOS);
        ids.resize(max_len, PAD);
        Ok(TokenSequence(ids))
    }

    /// Tokens between BOS and the first EOS, skipping PAD.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .copied()
            .skip_while(|&id| id == BOS)
            .take_while(|&id| id != EOS)
            .filter(|&id| id != PAD && id != BOS)
            .map(|id| self.token(id).unwrap_or(SPECIALS[UNK]).to_string())
            .collect()
    }
}
