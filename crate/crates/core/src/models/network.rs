//! Forward passes of the encoder, generator and both discriminators.
//!
//! Sequences are processed time-major: step `t` of a batch is a `[B, ·]`
//! matrix. Soft sentences are lists of per-step `[B, V]` distributions.

use crate::autodiff::nn::{gru_step, gru_step_projected, linear, masked_update, GruVars};
use crate::autodiff::{Bound, Graph, ParamSet, Tensor, Var};
use crate::error::Result;
use crate::textpipe::{Batch, BOS, EOS, UNK};

use super::params::ModelDims;

/// Bound on |logvar|; the head output passes through `B·tanh(x/B)`.
pub const LOGVAR_BOUND: f64 = 5.0;

/// Graph handles for the shared embedding, encoder and generator.
#[derive(Debug, Clone, Copy)]
pub struct AutoencoderVars {
    pub embedding: Var,
    pub encoder: GruVars,
    pub mu_w: Var,
    pub mu_b: Var,
    pub logvar_w: Var,
    pub logvar_b: Var,
    pub init_w: Var,
    pub init_b: Var,
    pub generator: GruVars,
    pub out_w: Var,
    pub out_b: Var,
    pub dims: ModelDims,
}

#[derive(Debug, Clone, Copy)]
pub struct StyleDiscVars {
    pub embedding: Var,
    pub gru: GruVars,
    pub out_w: Var,
    pub out_b: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct LatentDiscVars {
    pub hidden_w: Var,
    pub hidden_b: Var,
    pub out_w: Var,
    pub out_b: Var,
}

impl AutoencoderVars {
    pub fn bind(g: &mut Graph, set: &ParamSet, dims: ModelDims, trainable: bool) -> Self {
        Self::bind_from(&set.bind(g, trainable), dims)
    }

    pub fn bind_from(b: &Bound, dims: ModelDims) -> Self {
        Self {
            embedding: b.var("embedding"),
            encoder: GruVars::from_bound(b, "encoder.gru"),
            mu_w: b.var("encoder.mu.w"),
            mu_b: b.var("encoder.mu.b"),
            logvar_w: b.var("encoder.logvar.w"),
            logvar_b: b.var("encoder.logvar.b"),
            init_w: b.var("generator.init.w"),
            init_b: b.var("generator.init.b"),
            generator: GruVars::from_bound(b, "generator.gru"),
            out_w: b.var("generator.out.w"),
            out_b: b.var("generator.out.b"),
            dims,
        }
    }
}

impl AutoencoderVars {
    /// Copy whose handles are detached, for passes that must not update the
    /// underlying parameters.
    pub fn detached(&self, g: &mut Graph) -> Self {
        let gru = |g: &mut Graph, c: &GruVars| GruVars {
            wx: g.detach(c.wx),
            wh: g.detach(c.wh),
            bx: g.detach(c.bx),
            bh: g.detach(c.bh),
        };
        Self {
            embedding: g.detach(self.embedding),
            encoder: gru(g, &self.encoder),
            mu_w: g.detach(self.mu_w),
            mu_b: g.detach(self.mu_b),
            logvar_w: g.detach(self.logvar_w),
            logvar_b: g.detach(self.logvar_b),
            init_w: g.detach(self.init_w),
            init_b: g.detach(self.init_b),
            generator: gru(g, &self.generator),
            out_w: g.detach(self.out_w),
            out_b: g.detach(self.out_b),
            dims: self.dims,
        }
    }
}

impl StyleDiscVars {
    pub fn bind(g: &mut Graph, set: &ParamSet, trainable: bool) -> Self {
        Self::bind_from(&set.bind(g, trainable))
    }

    pub fn bind_from(b: &Bound) -> Self {
        Self {
            embedding: b.var("style_disc.embedding"),
            gru: GruVars::from_bound(b, "style_disc.gru"),
            out_w: b.var("style_disc.out.w"),
            out_b: b.var("style_disc.out.b"),
        }
    }
}

impl LatentDiscVars {
    pub fn bind(g: &mut Graph, set: &ParamSet, trainable: bool) -> Self {
        Self::bind_from(&set.bind(g, trainable))
    }

    pub fn bind_from(b: &Bound) -> Self {
        Self {
            hidden_w: b.var("latent_disc.hidden.w"),
            hidden_b: b.var("latent_disc.hidden.b"),
            out_w: b.var("latent_disc.out.w"),
            out_b: b.var("latent_disc.out.b"),
        }
    }
}

/// Ids of a batch reordered time-major (`t * B + b`).
fn time_major_ids(batch: &Batch, steps: usize) -> Vec<usize> {
    (0..steps).flat_map(|t| batch.column(t)).collect()
}

fn mask_column(g: &mut Graph, batch: &Batch, t: usize) -> Option<Var> {
    let m = batch.column_mask(t);
    if m.iter().all(|&x| x) {
        return None;
    }
    let data = m.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
    Some(g.constant(Tensor::from_parts(vec![m.len(), 1], data)))
}

/// Runs a GRU over the hard token ids of `batch` and returns the hidden
/// state at each row's last non-PAD position.
fn run_gru_hard(g: &mut Graph, table: Var, cell: &GruVars, hidden: usize, batch: &Batch) -> Result<Var> {
    let (b, t_len) = (batch.batch_size(), batch.seq_len());
    let emb = g.gather(table, &time_major_ids(batch, t_len))?;
    let xw_all = linear(g, emb, cell.wx, cell.bx)?;
    let mut h = g.constant(Tensor::zeros(&[b, hidden]));
    for t in 0..t_len {
        let xw = g.slice_rows(xw_all, t * b, b)?;
        let h_new = gru_step_projected(g, cell, xw, h)?;
        h = match mask_column(g, batch, t) {
            Some(m) => masked_update(g, h, h_new, m)?,
            None => h_new,
        };
    }
    Ok(h)
}

/// Runs a GRU over BOS followed by a soft sentence. A row's state stops
/// changing once EOS has been emitted: step `t` is weighted by the
/// probability that no EOS appeared before it.
fn run_gru_soft(
    g: &mut Graph,
    table: Var,
    cell: &GruVars,
    hidden: usize,
    soft: &[Var],
) -> Result<Var> {
    let b = g.value(soft[0]).rows();
    let h0 = g.constant(Tensor::zeros(&[b, hidden]));
    let bos = g.gather(table, &vec![BOS; b])?;
    let mut h = gru_step(g, cell, bos, h0)?;
    let mut alive: Option<Var> = None;
    for &p in soft {
        let x = g.matmul(p, table)?;
        let h_new = gru_step(g, cell, x, h)?;
        h = match alive {
            Some(a) => masked_update(g, h, h_new, a)?,
            None => h_new,
        };
        let eos = g.slice_cols(p, EOS, 1)?;
        let keep = g.affine(eos, -1.0, 1.0);
        alive = Some(match alive {
            Some(a) => g.mul(a, keep)?,
            None => keep,
        });
    }
    Ok(h)
}

fn heads(g: &mut Graph, ae: &AutoencoderVars, h: Var) -> Result<(Var, Var)> {
    let mu = linear(g, h, ae.mu_w, ae.mu_b)?;
    let raw = linear(g, h, ae.logvar_w, ae.logvar_b)?;
    let scaled = g.affine(raw, 1.0 / LOGVAR_BOUND, 0.0);
    let squashed = g.tanh(scaled);
    let logvar = g.affine(squashed, LOGVAR_BOUND, 0.0);
    Ok((mu, logvar))
}

/// Posterior mean and log-variance `[B, d_z]` for real sentences.
pub fn encode_hard(g: &mut Graph, ae: &AutoencoderVars, batch: &Batch) -> Result<(Var, Var)> {
    let h = run_gru_hard(g, ae.embedding, &ae.encoder, ae.dims.hidden, batch)?;
    heads(g, ae, h)
}

/// Posterior mean and log-variance for a soft sentence.
pub fn encode_soft(g: &mut Graph, ae: &AutoencoderVars, soft: &[Var]) -> Result<(Var, Var)> {
    let h = run_gru_soft(g, ae.embedding, &ae.encoder, ae.dims.hidden, soft)?;
    heads(g, ae, h)
}

/// `mu + exp(logvar / 2) * noise`.
pub fn reparameterize(g: &mut Graph, mu: Var, logvar: Var, noise: Tensor) -> Result<Var> {
    let eps = g.constant(noise);
    let half = g.affine(logvar, 0.5, 0.0);
    let std = g.exp(half);
    let scaled = g.mul(std, eps)?;
    g.add(mu, scaled)
}

/// Generator initial state from the concatenation `[z; c]`.
pub fn initial_state(g: &mut Graph, ae: &AutoencoderVars, z: Var, code: Var) -> Result<Var> {
    let zc = g.concat_cols(z, code)?;
    let pre = linear(g, zc, ae.init_w, ae.init_b)?;
    Ok(g.tanh(pre))
}

/// Teacher-forced next-token logits, stacked time-major into
/// `[(T-1) * B, V]`, predicting positions `1..T` from positions `0..T-1`.
pub fn teacher_forced_logits(
    g: &mut Graph,
    ae: &AutoencoderVars,
    batch: &Batch,
    z: Var,
    code: Var,
) -> Result<Var> {
    let (b, t_len) = (batch.batch_size(), batch.seq_len());
    let steps = t_len - 1;
    let emb = g.gather(ae.embedding, &time_major_ids(batch, steps))?;
    let xw_all = linear(g, emb, ae.generator.wx, ae.generator.bx)?;
    let mut h = initial_state(g, ae, z, code)?;
    let mut states = Vec::with_capacity(steps);
    for t in 0..steps {
        let xw = g.slice_rows(xw_all, t * b, b)?;
        h = gru_step_projected(g, &ae.generator, xw, h)?;
        states.push(h);
    }
    let all = g.concat_rows(&states)?;
    linear(g, all, ae.out_w, ae.out_b)
}

/// Time-major targets and mask matching [`teacher_forced_logits`].
pub fn teacher_forced_targets(batch: &Batch) -> (Vec<usize>, Vec<bool>) {
    let mut targets = Vec::new();
    let mut mask = Vec::new();
    for t in 1..batch.seq_len() {
        targets.extend(batch.column(t));
        mask.extend(batch.column_mask(t));
    }
    (targets, mask)
}

/// Differentiable soft sentence: `steps` per-step distributions
/// `softmax(logits / tau)`, each step fed the expected embedding under the
/// previous distribution.
pub fn generate_soft(
    g: &mut Graph,
    ae: &AutoencoderVars,
    z: Var,
    code: Var,
    tau: f64,
    steps: usize,
) -> Result<Vec<Var>> {
    if !(tau > 0.0) {
        return Err(crate::Error::Domain(format!("temperature must be positive, got {tau}")));
    }
    let b = g.value(z).rows();
    let mut h = initial_state(g, ae, z, code)?;
    let mut x = g.gather(ae.embedding, &vec![BOS; b])?;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        h = gru_step(g, &ae.generator, x, h)?;
        let logits = linear(g, h, ae.out_w, ae.out_b)?;
        let p = g.softmax(logits, tau)?;
        x = g.matmul(p, ae.embedding)?;
        out.push(p);
    }
    Ok(out)
}

/// Greedy decoding; each row stops after emitting EOS or after `max_len`
/// tokens. Returned rows exclude BOS and include EOS when it was emitted.
/// PAD and BOS are never chosen; ties resolve to the lowest id.
pub fn generate_greedy(
    g: &mut Graph,
    ae: &AutoencoderVars,
    z: Var,
    code: Var,
    max_len: usize,
) -> Result<Vec<Vec<usize>>> {
    let b = g.value(z).rows();
    let mut h = initial_state(g, ae, z, code)?;
    let mut prev = vec![BOS; b];
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); b];
    let mut done = vec![false; b];
    for _ in 0..max_len {
        let x = g.gather(ae.embedding, &prev)?;
        h = gru_step(g, &ae.generator, x, h)?;
        let logits = linear(g, h, ae.out_w, ae.out_b)?;
        let lt = g.value(logits);
        for i in 0..b {
            let row = lt.row(i);
            // PAD and BOS are never emitted.
            let mut best = UNK;
            for (j, &v) in row.iter().enumerate().skip(UNK + 1) {
                if v > row[best] {
                    best = j;
                }
            }
            prev[i] = best;
            if !done[i] {
                rows[i].push(best);
                done[i] = best == EOS;
            }
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }
    Ok(rows)
}

/// Style logits `[B, 2]` of D on real sentences.
pub fn style_logits_hard(g: &mut Graph, d: &StyleDiscVars, hidden: usize, batch: &Batch) -> Result<Var> {
    let h = run_gru_hard(g, d.embedding, &d.gru, hidden, batch)?;
    linear(g, h, d.out_w, d.out_b)
}

/// Style logits of D on a soft sentence.
pub fn style_logits_soft(g: &mut Graph, d: &StyleDiscVars, hidden: usize, soft: &[Var]) -> Result<Var> {
    let h = run_gru_soft(g, d.embedding, &d.gru, hidden, soft)?;
    linear(g, h, d.out_w, d.out_b)
}

/// Style logits `[B, 2]` of D_z on latent codes.
pub fn latent_logits(g: &mut Graph, dz: &LatentDiscVars, z: Var) -> Result<Var> {
    let pre = linear(g, z, dz.hidden_w, dz.hidden_b)?;
    let h = g.tanh(pre);
    linear(g, h, dz.out_w, dz.out_b)
}
