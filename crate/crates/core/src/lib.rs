//! Text style transfer with disentangled latent representations.
//!
//! Four autoencoder architectures (baseline, latent discriminator, shifted
//! autoencoder and their combination) trained on a synthetic two-style
//! corpus, plus the measures used to compare how well each one separates
//! style from content: an external probe classifier, latent preservation
//! under transfer (cosine distance and KL divergence) and BLEU against
//! reference reformulations.

pub mod autodiff;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod textpipe;
pub mod training;

pub use autodiff::{Graph, ParamSet, Tensor, Var};
pub use error::{Error, Result};
pub use models::{ArchitectureVariant, LatentCode, ModelDims, ModelParams};
pub use textpipe::{Batch, LabeledSentence, Vocabulary};
pub use training::{Checkpoint, MetricsRecord, TrainConfig};
