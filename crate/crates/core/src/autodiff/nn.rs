//! Layers built from graph primitives.

use rand::Rng;

use super::graph::{Graph, Var};
use super::params::{Bound, ParamSet};
use super::tensor::Tensor;
use crate::error::Result;

/// Uniform `[-a, a]` init with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
    Tensor::from_parts(vec![rows, cols], data)
}

/// Handles for one GRU cell; gate blocks ordered reset, update, candidate.
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub wx: Var,
    pub wh: Var,
    pub bx: Var,
    pub bh: Var,
}

impl GruVars {
    pub fn from_bound(bound: &Bound, prefix: &str) -> Self {
        Self {
            wx: bound.var(&format!("{prefix}.wx")),
            wh: bound.var(&format!("{prefix}.wh")),
            bx: bound.var(&format!("{prefix}.bx")),
            bh: bound.var(&format!("{prefix}.bh")),
        }
    }
}

/// Adds `prefix.{wx,wh,bx,bh}` for a GRU with the given sizes.
pub fn init_gru<R: Rng>(
    set: &mut ParamSet,
    rng: &mut R,
    prefix: &str,
    input: usize,
    hidden: usize,
) -> Result<()> {
    set.insert(format!("{prefix}.wx"), glorot(rng, input, 3 * hidden))?;
    set.insert(format!("{prefix}.wh"), glorot(rng, hidden, 3 * hidden))?;
    set.insert(format!("{prefix}.bx"), Tensor::zeros(&[3 * hidden]))?;
    set.insert(format!("{prefix}.bh"), Tensor::zeros(&[3 * hidden]))?;
    Ok(())
}

/// `x W + b`.
pub fn linear(g: &mut Graph, x: Var, w: Var, b: Var) -> Result<Var> {
    let xw = g.matmul(x, w)?;
    g.add_row(xw, b)
}

/// One GRU update for a batch: `x` is `[B, e]`, `h` is `[B, h]`.
pub fn gru_step(g: &mut Graph, cell: &GruVars, x: Var, h: Var) -> Result<Var> {
    let xw = linear(g, x, cell.wx, cell.bx)?;
    gru_step_projected(g, cell, xw, h)
}

/// GRU update when the input projection `x Wx + bx` is already computed.
pub fn gru_step_projected(g: &mut Graph, cell: &GruVars, xw: Var, h: Var) -> Result<Var> {
    let hw = linear(g, h, cell.wh, cell.bh)?;
    g.gru_gates(xw, hw, h)
}

/// Holds `h` where `keep` is 0 and takes `h_new` where it is 1; fractional
/// weights interpolate. `keep` has one entry per row.
pub fn masked_update(g: &mut Graph, h: Var, h_new: Var, keep: Var) -> Result<Var> {
    let delta = g.sub(h_new, h)?;
    let step = g.mul_col(delta, keep)?;
    g.add(h, step)
}
