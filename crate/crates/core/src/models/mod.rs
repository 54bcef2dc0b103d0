//! Encoder, generator, discriminators and the loss terms of the four
//! architecture variants.

pub mod losses;
pub mod network;
mod params;
mod variant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use losses::{ForwardSpec, ForwardTerms, StyleLossCode};
pub use params::{ModelDims, ModelParams, STYLE_DIM};
pub use variant::{total_objective, total_objective_graph, ArchitectureVariant, Lambdas, LossSet};

use crate::autodiff::{Graph, Tensor};
use crate::error::Result;
use crate::textpipe::{one_hot_styles, Batch};
use network::{encode_hard, generate_greedy, reparameterize, AutoencoderVars};

/// Encoder output for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
    /// `mu + exp(logvar / 2) * noise`; equals `mu` in deterministic mode.
    pub sample: Vec<f64>,
    /// One-hot style code.
    pub style: [f64; STYLE_DIM],
}

/// Standard normal noise `[rows, cols]` drawn from `rng`.
pub fn gaussian_noise<R: rand::Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::matrix(rows, cols, data).expect("positive dims")
}

impl ModelParams {
    /// Encodes every row of `batch`. Deterministic mode uses zero noise.
    pub fn encode(&self, batch: &Batch, deterministic: bool, seed: u64) -> Result<Vec<LatentCode>> {
        let mut g = Graph::new();
        let ae = AutoencoderVars::bind(&mut g, &self.autoencoder, self.dims, false);
        let (mu, logvar) = encode_hard(&mut g, &ae, batch)?;
        let b = batch.batch_size();
        let sample = if deterministic {
            mu
        } else {
            let noise = gaussian_noise(&mut ChaCha8Rng::seed_from_u64(seed), b, self.dims.latent);
            reparameterize(&mut g, mu, logvar, noise)?
        };
        let codes = batch.style_codes(false);
        Ok((0..b)
            .map(|i| LatentCode {
                mu: g.value(mu).row(i).to_vec(),
                logvar: g.value(logvar).row(i).to_vec(),
                sample: g.value(sample).row(i).to_vec(),
                style: [codes.get(i, 0), codes.get(i, 1)],
            })
            .collect())
    }

    /// Greedy decoding from explicit latent rows and style labels.
    pub fn decode_greedy(&self, z: Tensor, styles: &[usize], max_len: usize) -> Result<Vec<Vec<usize>>> {
        let mut g = Graph::new();
        let ae = AutoencoderVars::bind(&mut g, &self.autoencoder, self.dims, false);
        let zv = g.constant(z);
        let code = g.constant(one_hot_styles(styles, false));
        generate_greedy(&mut g, &ae, zv, code, max_len)
    }

    /// Encodes deterministically and greedy-decodes each row with its own
    /// style (`flip = false`) or the inverse style (`flip = true`).
    pub fn rewrite(&self, batch: &Batch, flip: bool, max_len: usize) -> Result<Vec<Vec<usize>>> {
        let mut g = Graph::new();
        let ae = AutoencoderVars::bind(&mut g, &self.autoencoder, self.dims, false);
        let (mu, _) = encode_hard(&mut g, &ae, batch)?;
        let code = g.constant(batch.style_codes(flip));
        generate_greedy(&mut g, &ae, mu, code, max_len)
    }
}

/// Inverse style code of a one-hot code.
pub fn flip_code(code: [f64; STYLE_DIM]) -> [f64; STYLE_DIM] {
    [code[1], code[0]]
}
