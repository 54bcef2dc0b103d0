//! Loss terms recorded on a [`Graph`].

use serde::{Deserialize, Serialize};

use super::network::{
    encode_hard, encode_soft, generate_soft, latent_logits, reparameterize, style_logits_soft,
    teacher_forced_logits, teacher_forced_targets, AutoencoderVars, LatentDiscVars, StyleDiscVars,
};
use super::variant::{ArchitectureVariant, LossSet};
use crate::autodiff::{Graph, Tensor, Var};
use crate::error::Result;
use crate::textpipe::{one_hot_styles, Batch};

/// Reconstruction loss: masked teacher-forced cross-entropy of the input
/// given `[z; c]`.
pub fn loss_ae(g: &mut Graph, ae: &AutoencoderVars, batch: &Batch, z: Var, code: Var) -> Result<Var> {
    let logits = teacher_forced_logits(g, ae, batch, z, code)?;
    let (targets, mask) = teacher_forced_targets(batch);
    g.cross_entropy_logits(logits, &targets, &mask)
}

/// Cross-entropy of D's prediction on a soft sentence against `styles`.
pub fn loss_c(
    g: &mut Graph,
    d: &StyleDiscVars,
    disc_hidden: usize,
    soft: &[Var],
    styles: &[usize],
) -> Result<Var> {
    let logits = style_logits_soft(g, d, disc_hidden, soft)?;
    g.cross_entropy_logits(logits, styles, &vec![true; styles.len()])
}

/// Negative log-density of `z_target` under the posterior of the re-encoded
/// soft sentence, averaged over rows.
pub fn loss_z(g: &mut Graph, ae: &AutoencoderVars, soft: &[Var], z_target: Var) -> Result<Var> {
    let (mu, logvar) = encode_soft(g, ae, soft)?;
    gaussian_nll(g, z_target, mu, logvar)
}

/// Row-averaged negative diagonal-Gaussian log-density.
pub fn gaussian_nll(g: &mut Graph, x: Var, mu: Var, logvar: Var) -> Result<Var> {
    let rows = g.gaussian_nll_rows(x, mu, logvar)?;
    Ok(g.mean(rows))
}

/// Cross-entropy of D_z's style prediction from `z`.
pub fn loss_dz(g: &mut Graph, dz: &LatentDiscVars, z: Var, styles: &[usize]) -> Result<Var> {
    let logits = latent_logits(g, dz, z)?;
    g.cross_entropy_logits(logits, styles, &vec![true; styles.len()])
}

/// Batch-mean cosine distances between `mu` and the re-encoded soft outputs
/// generated from `mu` with the true and with the flipped style code.
pub fn loss_cos_pair(
    g: &mut Graph,
    ae: &AutoencoderVars,
    mu: Var,
    styles: &[usize],
    tau: f64,
    steps: usize,
) -> Result<(Var, Var)> {
    let mut out = [None, None];
    for (k, flipped) in [false, true].into_iter().enumerate() {
        let code = g.constant(one_hot_styles(styles, flipped));
        let soft = generate_soft(g, ae, mu, code, tau, steps)?;
        let (mu_re, _) = encode_soft(g, ae, &soft)?;
        let rows = g.cosine_distance_rows(mu_re, mu)?;
        out[k] = Some(g.mean(rows));
    }
    Ok((out[0].expect("set"), out[1].expect("set")))
}

/// Which style code the generator is conditioned on when producing the soft
/// sentence scored by D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StyleLossCode {
    /// The sentence's own label.
    True,
    /// The opposite label, as used at transfer time.
    Flipped,
}

/// Everything one forward pass over a batch produces.
#[derive(Debug, Clone)]
pub struct ForwardTerms {
    pub losses: LossSet<Var>,
    pub mu: Var,
    pub logvar: Var,
    pub z: Var,
    pub recon_logits: Var,
}

/// Settings for [`forward_terms`].
#[derive(Debug, Clone)]
pub struct ForwardSpec {
    pub variant: ArchitectureVariant,
    pub tau: f64,
    /// Reparameterization noise `[B, d_z]`; `None` uses the mean.
    pub noise: Option<Tensor>,
    pub style_loss_code: StyleLossCode,
    pub disc_hidden: usize,
}

/// Records every loss term active for `spec.variant` on `batch`.
pub fn forward_terms(
    g: &mut Graph,
    ae: &AutoencoderVars,
    d: &StyleDiscVars,
    dz: &LatentDiscVars,
    batch: &Batch,
    spec: &ForwardSpec,
) -> Result<ForwardTerms> {
    let styles = batch.styles();
    let steps = batch.seq_len() - 1;
    let (mu, logvar) = encode_hard(g, ae, batch)?;
    let z = match &spec.noise {
        Some(noise) => reparameterize(g, mu, logvar, noise.clone())?,
        None => mu,
    };
    let code = g.constant(batch.style_codes(false));
    let recon_logits = teacher_forced_logits(g, ae, batch, z, code)?;
    let (targets, mask) = teacher_forced_targets(batch);
    let ae_loss = g.cross_entropy_logits(recon_logits, &targets, &mask)?;

    let flip = spec.style_loss_code == StyleLossCode::Flipped;
    let c_styles: Vec<usize> = styles.iter().map(|&s| if flip { 1 - s } else { s }).collect();
    let c_code = g.constant(one_hot_styles(&c_styles, false));
    let soft = generate_soft(g, ae, z, c_code, spec.tau, steps)?;
    let c_loss = loss_c(g, d, spec.disc_hidden, &soft, &c_styles)?;
    // loss_z trains the generator only: z enters as a constant and the
    // re-encoding uses frozen encoder weights.
    let z_fixed = g.detach(z);
    let z_soft = generate_soft(g, ae, z_fixed, c_code, spec.tau, steps)?;
    let frozen = ae.detached(g);
    let z_loss = loss_z(g, &frozen, &z_soft, z_fixed)?;

    let mut losses = LossSet {
        ae: Some(ae_loss),
        c: Some(c_loss),
        z: Some(z_loss),
        ..LossSet::default()
    };
    if spec.variant.uses_latent_disc() {
        losses.dz = Some(loss_dz(g, dz, mu, styles)?);
    }
    if spec.variant.uses_cosine() {
        let (cos, cos_minus) = loss_cos_pair(g, ae, mu, styles, spec.tau, steps)?;
        losses.cos = Some(cos);
        losses.cos_minus = Some(cos_minus);
    }
    Ok(ForwardTerms {
        losses,
        mu,
        logvar,
        z,
        recon_logits,
    })
}

/// Fraction of unmasked teacher-forced positions whose argmax is correct.
pub fn reconstruction_accuracy(logits: &Tensor, batch: &Batch) -> (usize, usize) {
    let (targets, mask) = teacher_forced_targets(batch);
    let mut correct = 0;
    let mut total = 0;
    for (i, (&t, &m)) in targets.iter().zip(&mask).enumerate() {
        if !m {
            continue;
        }
        let row = logits.row(i);
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        total += 1;
        correct += usize::from(best == t);
    }
    (correct, total)
}
