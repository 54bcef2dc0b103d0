//! Brute-force corpus BLEU-4 used to cross-check the library version.
//!
//! n-grams are counted by linear scans over token windows; no maps.

fn count(window: &[String], tokens: &[String]) -> usize {
    let n = window.len();
    if tokens.len() < n {
        return 0;
    }
    (0..=tokens.len() - n).filter(|&i| tokens[i..i + n] == *window).count()
}

/// Clipped matches and total n-grams of order `n` for one pair.
fn clipped(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    if candidate.len() < n {
        return (0, 0);
    }
    let total = candidate.len() + 1 - n;
    let mut matched = 0;
    for i in 0..total {
        let gram = &candidate[i..i + n];
        // Count each distinct n-gram once, at its first position.
        if (0..i).any(|j| candidate[j..j + n] == *gram) {
            continue;
        }
        matched += count(gram, candidate).min(count(gram, reference));
    }
    (matched, total)
}

pub fn bleu(candidates: &[Vec<String>], references: &[Vec<String>]) -> f64 {
    let mut m = [0usize; 4];
    let mut t = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (cand, refr) in candidates.iter().zip(references) {
        c += cand.len();
        r += refr.len();
        for n in 1..=4 {
            let (a, b) = clipped(cand, refr, n);
            m[n - 1] += a;
            t[n - 1] += b;
        }
    }
    if c == 0 || m[0] == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 0..4 {
        let p = if n == 0 {
            m[0] as f64 / t[0] as f64
        } else if m[n] == 0 {
            1.0 / (t[n] as f64 + 1.0)
        } else {
            m[n] as f64 / t[n] as f64
        };
        log_sum += p.ln();
    }
    let bp = (1.0 - r as f64 / c as f64).min(0.0).exp();
    bp * (log_sum / 4.0).exp()
}
