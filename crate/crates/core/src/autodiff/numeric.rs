//! Plain (non-recording) versions of the distance and divergence kernels.

use super::graph::{softmax_row, NORM_FLOOR};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub fn cosine_distance_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na <= NORM_FLOOR || nb <= NORM_FLOOR {
        return Err(Error::Degenerate(format!(
            "cosine distance of a near-zero vector (norms {na:e}, {nb:e})"
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

pub fn kl_diag_slices(mu1: &[f64], lv1: &[f64], mu2: &[f64], lv2: &[f64]) -> f64 {
    let mut kl = 0.0;
    for k in 0..mu1.len() {
        let diff = mu1[k] - mu2[k];
        kl += 0.5 * (lv2[k] - lv1[k] + (lv1[k].exp() + diff * diff) * (-lv2[k]).exp() - 1.0);
    }
    // Rounding can leave tiny negatives when the distributions coincide.
    kl.max(0.0)
}

/// `1 - a·b / (|a||b|)` for two vectors of equal length.
pub fn cosine_distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            op: "cosine_distance",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    cosine_distance_slices(a.data(), b.data())
}

/// Closed-form `KL(N(mu1, e^logvar1) || N(mu2, e^logvar2))` for diagonal
/// Gaussians.
pub fn kl_diag_gaussian(mu1: &Tensor, logvar1: &Tensor, mu2: &Tensor, logvar2: &Tensor) -> Result<f64> {
    for other in [logvar1, mu2, logvar2] {
        if other.shape() != mu1.shape() {
            return Err(Error::Shape {
                op: "kl_diag_gaussian",
                lhs: mu1.shape().to_vec(),
                rhs: other.shape().to_vec(),
            });
        }
    }
    Ok(kl_diag_slices(mu1.data(), logvar1.data(), mu2.data(), logvar2.data()))
}

/// Row-wise `softmax(logits / tau)`.
pub fn softmax_temperature(logits: &Tensor, tau: f64) -> Result<Tensor> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("temperature must be positive, got {tau}")));
    }
    let c = logits.cols();
    let mut out = vec![0.0; logits.len()];
    for (row, o) in logits.data().chunks(c).zip(out.chunks_mut(c)) {
        softmax_row(row, tau, o);
    }
    Tensor::new(logits.shape().to_vec(), out)
}

/// Shannon entropy (nats) of each row of a probability matrix.
pub fn row_entropy(probs: &Tensor) -> Vec<f64> {
    (0..probs.rows())
        .map(|i| {
            -probs
                .row(i)
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| p * p.ln())
                .sum::<f64>()
        })
        .collect()
}
