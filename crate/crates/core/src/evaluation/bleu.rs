use std::collections::HashMap;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

/// Clipped matches and candidate totals per n-gram order, summed over the
/// corpus, plus total candidate and reference lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub candidate_len: usize,
    pub reference_len: usize,
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

impl BleuStats {
    pub fn add_pair<S: AsRef<str>, T: AsRef<str>>(&mut self, candidate: &[S], reference: &[T]) {
        self.candidate_len += candidate.len();
        self.reference_len += reference.len();
        for n in 1..=MAX_ORDER {
            let cand = ngram_counts(candidate, n);
            let refs = ngram_counts(reference, n);
            self.totals[n - 1] += candidate.len().saturating_sub(n - 1);
            self.matches[n - 1] += cand
                .iter()
                .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
        }
    }

    /// Modified precision of order `n` (1-based). Zero matches at orders
    /// above one become `1 / (total + 1)`.
    pub fn precision(&self, n: usize) -> f64 {
        let (m, t) = (self.matches[n - 1], self.totals[n - 1]);
        if n > 1 && m == 0 {
            1.0 / (t as f64 + 1.0)
        } else if t == 0 {
            0.0
        } else {
            m as f64 / t as f64
        }
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.candidate_len == 0 {
            return 0.0;
        }
        (1.0 - self.reference_len as f64 / self.candidate_len as f64).min(0.0).exp()
    }

    pub fn score(&self) -> f64 {
        if self.candidate_len == 0 || self.matches[0] == 0 {
            return 0.0;
        }
        let log_mean = (1..=MAX_ORDER).map(|n| self.precision(n).ln()).sum::<f64>() / MAX_ORDER as f64;
        (self.brevity_penalty() * log_mean.exp()).clamp(0.0, 1.0)
    }
}

/// Corpus-level BLEU-4 with one reference per candidate.
pub fn bleu_corpus<S: AsRef<str>, T: AsRef<str>>(candidates: &[Vec<S>], references: &[Vec<T>]) -> Result<f64> {
    if candidates.len() != references.len() {
        return Err(Error::Invalid(format!(
            "{} candidates for {} references",
            candidates.len(),
            references.len()
        )));
    }
    let mut stats = BleuStats::default();
    for (c, r) in candidates.iter().zip(references) {
        stats.add_pair(c, r);
    }
    Ok(stats.score())
}
