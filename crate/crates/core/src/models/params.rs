use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::nn::{glorot, init_gru};
use crate::autodiff::{ParamSet, Tensor};
use crate::error::{Error, Result};

/// Number of style classes; style codes are one-hot over this many entries.
pub const STYLE_DIM: usize = 2;

/// Initial bias of the log-variance head, so early samples stay close to
/// the mean.
pub const LOGVAR_INIT: f64 = -4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub latent: usize,
    pub disc_hidden: usize,
    pub latent_disc_hidden: usize,
}

impl ModelDims {
    pub fn with_vocab(vocab: usize) -> Self {
        Self {
            vocab,
            embed: 32,
            hidden: 64,
            latent: 16,
            disc_hidden: 32,
            latent_disc_hidden: 32,
        }
    }
}

/// All trainable parameters, split by optimizer group.
///
/// `autoencoder` holds the shared embedding, encoder E and generator G;
/// `style_disc` the sentence classifier D; `latent_disc` the latent
/// adversary D_z.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub autoencoder: ParamSet,
    pub style_disc: ParamSet,
    pub latent_disc: ParamSet,
}

impl ModelParams {
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self> {
        if dims.vocab < 5 || [dims.embed, dims.hidden, dims.latent, dims.disc_hidden, dims.latent_disc_hidden].contains(&0) {
            return Err(Error::Invalid(format!("invalid model dimensions {dims:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ModelDims {
            vocab: v,
            embed: e,
            hidden: h,
            latent: z,
            disc_hidden: hd,
            latent_disc_hidden: hz,
        } = dims;

        let mut ae = ParamSet::new();
        ae.insert("embedding", glorot(&mut rng, v, e))?;
        init_gru(&mut ae, &mut rng, "encoder.gru", e, h)?;
        ae.insert("encoder.mu.w", glorot(&mut rng, h, z))?;
        ae.insert("encoder.mu.b", Tensor::zeros(&[z]))?;
        ae.insert("encoder.logvar.w", glorot(&mut rng, h, z))?;
        ae.insert("encoder.logvar.b", Tensor::filled(&[z], LOGVAR_INIT))?;
        ae.insert("generator.init.w", glorot(&mut rng, z + STYLE_DIM, h))?;
        ae.insert("generator.init.b", Tensor::zeros(&[h]))?;
        init_gru(&mut ae, &mut rng, "generator.gru", e, h)?;
        ae.insert("generator.out.w", glorot(&mut rng, h, v))?;
        ae.insert("generator.out.b", Tensor::zeros(&[v]))?;

        let mut d = ParamSet::new();
        d.insert("style_disc.embedding", glorot(&mut rng, v, e))?;
        init_gru(&mut d, &mut rng, "style_disc.gru", e, hd)?;
        d.insert("style_disc.out.w", glorot(&mut rng, hd, STYLE_DIM))?;
        d.insert("style_disc.out.b", Tensor::zeros(&[STYLE_DIM]))?;

        let mut dz = ParamSet::new();
        dz.insert("latent_disc.hidden.w", glorot(&mut rng, z, hz))?;
        dz.insert("latent_disc.hidden.b", Tensor::zeros(&[hz]))?;
        dz.insert("latent_disc.out.w", glorot(&mut rng, hz, STYLE_DIM))?;
        dz.insert("latent_disc.out.b", Tensor::zeros(&[STYLE_DIM]))?;

        Ok(Self {
            dims,
            autoencoder: ae,
            style_disc: d,
            latent_disc: dz,
        })
    }

    pub fn groups(&self) -> [&ParamSet; 3] {
        [&self.autoencoder, &self.style_disc, &self.latent_disc]
    }

    /// Every parameter with its unique name, group by group.
    pub fn named_tensors(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.groups().into_iter().flat_map(ParamSet::iter)
    }

    pub fn is_finite(&self) -> bool {
        self.groups().iter().all(|g| g.is_finite())
    }

    /// Rebuilds parameters from named tensors, checking each against the
    /// layout that `dims` implies.
    pub fn from_named(dims: ModelDims, named: Vec<(String, Tensor)>) -> Result<Self> {
        let mut params = Self::init(dims, 0)?;
        let expected: usize = params.groups().iter().map(|g| g.len()).sum();
        if named.len() != expected {
            return Err(Error::Format(format!(
                "expected {expected} parameter tensors, found {}",
                named.len()
            )));
        }
        for (name, value) in named {
            let slot = [
                &mut params.autoencoder,
                &mut params.style_disc,
                &mut params.latent_disc,
            ]
            .into_iter()
            .find_map(|g| g.get_mut(&name))
            .ok_or_else(|| Error::Format(format!("unknown parameter {name}")))?;
            if slot.shape() != value.shape() {
                return Err(Error::Format(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    value.shape(),
                    slot.shape()
                )));
            }
            *slot = value;
        }
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn names_are_unique_and_shapes_consistent() {
        let p = ModelParams::init(ModelDims::with_vocab(40), 1).unwrap();
        let names: Vec<_> = p.named_tensors().map(|(n, _)| n.to_string()).collect();
        let unique: HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
        assert_eq!(p.autoencoder.get("embedding").unwrap().shape(), &[40, 32]);
        assert_eq!(p.autoencoder.get("generator.init.w").unwrap().shape(), &[18, 64]);
        assert_eq!(p.latent_disc.get("latent_disc.hidden.w").unwrap().shape(), &[16, 32]);
        assert!(p.is_finite());
    }

    #[test]
    fn named_round_trip() {
        let p = ModelParams::init(ModelDims::with_vocab(12), 3).unwrap();
        let named = p
            .named_tensors()
            .map(|(n, t)| (n.to_string(), t.clone()))
            .collect();
        let q = ModelParams::from_named(p.dims, named).unwrap();
        assert_eq!(p, q);
    }
}
