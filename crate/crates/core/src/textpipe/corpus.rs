//! Synthetic two-style corpus with exact reference reformulations.
//!
//! Every sentence is a style marker followed by a content phrase. The
//! phrase is a template with one slot; the slot is normally filled from a
//! style-neutral pool, but with probability `entanglement` it takes a word
//! from a pool correlated with the sentence's style (the way "tasty" is both
//! positive and about food). The reference swaps the marker for a random
//! marker of the other style and, when the slot is entangled, swaps the
//! slot word for its opposite-style counterpart.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Style markers indexed by label: 0 negative, 1 positive.
pub const STYLE_MARKERS: [[&str; 8]; 2] = [
    [
        "awful", "terrible", "horrible", "dreadful", "lousy", "mediocre", "disappointing", "poor",
    ],
    [
        "great", "wonderful", "excellent", "amazing", "lovely", "fantastic", "superb", "delightful",
    ],
];

/// Content templates; `{}` is the slot.
pub const CONTENT_TEMPLATES: [&str; 13] = [
    "the {} pasta was served",
    "our {} waiter brought the menus",
    "a {} table near the window",
    "the {} soup arrived",
    "{} pizza with extra cheese",
    "the {} bar downtown",
    "my {} burger and fries",
    "this {} cafe on main street",
    "their {} staff",
    "the {} dessert menu tonight",
    "a {} patio for lunch",
    "the {} sushi rolls we ordered",
    "one {} room upstairs",
];

/// Slot words carrying no style information.
pub const NEUTRAL_SLOTS: [&str; 6] = ["small", "large", "new", "local", "quiet", "late"];

/// Style-correlated slot words; entry `k` of one style is the counterpart of
/// entry `k` of the other.
pub const ENTANGLED_SLOTS: [[&str; 4]; 2] = [
    ["bland", "rude", "cramped", "soggy"],
    ["tasty", "friendly", "cozy", "crisp"],
];

/// A sentence with its binary style label and optional reference
/// reformulation in the opposite style.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSentence {
    pub tokens: Vec<String>,
    pub style_label: usize,
    pub reference: Option<Vec<String>>,
}

pub fn flip_label(label: usize) -> usize {
    1 - label
}

fn fill(template: &str, slot: &str) -> Vec<String> {
    template
        .split_whitespace()
        .map(|w| if w == "{}" { slot.to_string() } else { w.to_string() })
        .collect()
}

/// Deterministic corpus of `n` sentences.
pub fn generate_synthetic_corpus(seed: u64, n: usize, entanglement: f64) -> Result<Vec<LabeledSentence>> {
    if n == 0 {
        return Err(Error::Invalid("corpus size must be positive".into()));
    }
    if !(0.0..=1.0).contains(&entanglement) {
        return Err(Error::Invalid(format!(
            "entanglement must be in [0,1], got {entanglement}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.gen_range(0..2usize);
        let other = flip_label(label);
        let marker = *STYLE_MARKERS[label].choose(&mut rng).expect("non-empty");
        let ref_marker = *STYLE_MARKERS[other].choose(&mut rng).expect("non-empty");
        let template = *CONTENT_TEMPLATES.choose(&mut rng).expect("non-empty");
        let entangled = rng.gen::<f64>() < entanglement;
        let (slot, ref_slot) = if entangled {
            let k = rng.gen_range(0..ENTANGLED_SLOTS[0].len());
            (ENTANGLED_SLOTS[label][k], ENTANGLED_SLOTS[other][k])
        } else {
            let s = *NEUTRAL_SLOTS.choose(&mut rng).expect("non-empty");
            (s, s)
        };
        let mut tokens = vec![marker.to_string()];
        tokens.extend(fill(template, slot));
        let mut reference = vec![ref_marker.to_string()];
        reference.extend(fill(template, ref_slot));
        out.push(LabeledSentence {
            tokens,
            style_label: label,
            reference: Some(reference),
        });
    }
    Ok(out)
}

/// Rule-based style classifier: the label whose marker lexicon matches more
/// tokens. Ties and sentences without markers give `None`.
pub fn style_oracle<S: AsRef<str>>(tokens: &[S]) -> Option<usize> {
    let mut counts = [0usize; 2];
    for tok in tokens {
        for (label, lexicon) in STYLE_MARKERS.iter().enumerate() {
            if lexicon.contains(&tok.as_ref()) {
                counts[label] += 1;
            }
        }
    }
    match counts[0].cmp(&counts[1]) {
        std::cmp::Ordering::Greater => Some(0),
        std::cmp::Ordering::Less => Some(1),
        std::cmp::Ordering::Equal => None,
    }
}

/// Every token the generator can emit.
pub fn synthetic_token_inventory() -> Vec<&'static str> {
    let mut all: Vec<&str> = STYLE_MARKERS.iter().flatten().copied().collect();
    all.extend(
        CONTENT_TEMPLATES
            .iter()
            .flat_map(|t| t.split_whitespace())
            .filter(|w| *w != "{}"),
    );
    all.extend(NEUTRAL_SLOTS);
    all.extend(ENTANGLED_SLOTS.iter().flatten());
    all.sort_unstable();
    all.dedup();
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn lexicons_are_disjoint_and_large_enough() {
        let neg: HashSet<_> = STYLE_MARKERS[0].iter().collect();
        assert!(STYLE_MARKERS[1].iter().all(|m| !neg.contains(m)));
        assert!(STYLE_MARKERS.iter().all(|l| l.len() >= 8));
        let phrases = CONTENT_TEMPLATES.len() * NEUTRAL_SLOTS.len();
        assert!(phrases >= 50);
        for t in CONTENT_TEMPLATES {
            let len = t.split_whitespace().count();
            assert!((3..=8).contains(&len), "{t}");
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate_synthetic_corpus(11, 300, 0.3).unwrap();
        let b = generate_synthetic_corpus(11, 300, 0.3).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_corpus(12, 300, 0.3).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn references_flip_style_and_keep_content() {
        for s in generate_synthetic_corpus(3, 500, 0.5).unwrap() {
            let r = s.reference.as_ref().unwrap();
            assert_eq!(style_oracle(&s.tokens), Some(s.style_label));
            assert_eq!(style_oracle(r), Some(flip_label(s.style_label)));
            assert_eq!(r.len(), s.tokens.len());
            let diffs = r.iter().zip(&s.tokens).filter(|(a, b)| a != b).count();
            assert!((1..=2).contains(&diffs));
        }
    }

    #[test]
    fn oracle_failure_cases() {
        assert_eq!(style_oracle(&["the", "soup"]), None);
        assert_eq!(style_oracle(&["great", "awful"]), None);
        assert_eq!(style_oracle(&["great", "awful", "lovely"]), Some(1));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(generate_synthetic_corpus(0, 0, 0.1).is_err());
        assert!(generate_synthetic_corpus(0, 10, 1.5).is_err());
        assert!(generate_synthetic_corpus(0, 10, -0.1).is_err());
    }
}
