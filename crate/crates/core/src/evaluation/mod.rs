//! Decomposition-quality measures: probe classifier, BLEU, latent
//! preservation, transfer accuracy, PCA projection and run aggregation.

mod bleu;
mod measures;
mod probe;
mod projection;
mod report;
mod run;

pub use bleu::{bleu_corpus, BleuStats, MAX_ORDER};
pub use measures::{
    encode_dataset, encode_rewrites, latent_preservation, preservation_of, probe_inputs, reconstruction_accuracy, stack_means,
    transfer_accuracy, transfer_accuracy_of, transfer_ids, transfer_sentences, Preservation, EVAL_BATCH,
    MAX_SKIPPED_FRACTION,
};
pub use probe::{train_probe, train_probe_with, ProbeClassifier, ProbeConfig, MIN_PROBE_SAMPLES};
pub use projection::{project_latents, projection_csv, write_projection, ProjectedPoint, POWER_MAX_ITER, POWER_TOLERANCE};
pub use report::{aggregate_runs, latent_dump, mean_std, parse_latent_dump, write_latent_dump, EvalReport, RunMetrics};
pub use run::{evaluate_model, Evaluation};
