//! Reverse-mode automatic differentiation over dense `f64` tensors.

mod adam;
mod graph;
pub mod nn;
mod numeric;
mod params;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use graph::{Graph, Var, LOG_FLOOR, NORM_FLOOR};
pub use numeric::{cosine_distance, cosine_distance_slices, kl_diag_gaussian, kl_diag_slices, row_entropy, softmax_temperature};
pub use params::{clip_global_norm, Bound, ParamSet};
pub use tensor::Tensor;

/// Mean over unmasked rows of `-log p[target]` for a probability matrix.
pub fn cross_entropy(
    probs: &Tensor,
    targets: &[usize],
    mask: &[bool],
) -> crate::error::Result<f64> {
    let mut g = Graph::new();
    let p = g.constant(probs.clone());
    let loss = g.nll_probs(p, targets, mask)?;
    Ok(g.value(loss).data()[0])
}

/// Plain matrix product of two rank-2 tensors.
pub fn matmul(a: &Tensor, b: &Tensor) -> crate::error::Result<Tensor> {
    let mut g = Graph::new();
    let (va, vb) = (g.constant(a.clone()), g.constant(b.clone()));
    let out = g.matmul(va, vb)?;
    Ok(g.value(out).clone())
}
