use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use super::metrics::MetricsRecord;
use crate::autodiff::{clip_global_norm, AdamState, Graph, ParamSet, Tensor, Var};
use crate::error::{Error, Result};
use crate::models::losses::{forward_terms, reconstruction_accuracy, ForwardSpec};
use crate::models::network::{encode_hard, latent_logits, style_logits_hard, AutoencoderVars, LatentDiscVars, StyleDiscVars};
use crate::models::{gaussian_noise, total_objective_graph, LossSet, ModelParams};
use crate::textpipe::{make_batches, vocab_for, Batch, LabeledSentence, Vocabulary};

/// Observer for per-epoch events during training.
pub trait TrainHooks {
    fn on_epoch(&mut self, _record: &MetricsRecord) -> Result<()> {
        Ok(())
    }

    /// Called at every checkpoint interval and after the final epoch.
    fn on_checkpoint(&mut self, _checkpoint: &Checkpoint) -> Result<()> {
        Ok(())
    }
}

/// Hooks that do nothing.
pub struct NoHooks;

impl TrainHooks for NoHooks {}

/// Result of a finished run.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub metrics: Vec<MetricsRecord>,
    /// State after the last epoch.
    pub checkpoint: Checkpoint,
}

impl TrainedRun {
    pub fn params(&self) -> &ModelParams {
        &self.checkpoint.params
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.checkpoint.vocab
    }
}

/// Training state that can be advanced one epoch at a time.
#[derive(Debug, Clone)]
pub struct Trainer {
    state: Checkpoint,
}

fn argmax_accuracy(logits: &Tensor, labels: &[usize]) -> (usize, usize) {
    let correct = labels
        .iter()
        .enumerate()
        .filter(|&(i, &y)| {
            let r = logits.row(i);
            usize::from(r[1] > r[0]) == y
        })
        .count();
    (correct, labels.len())
}

fn check_finite(value: f64, term: &str, epoch: usize) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            term: term.to_string(),
            epoch,
        })
    }
}

/// Clips and applies the gradients of `vars` from `g`.
fn apply(
    g: &Graph,
    vars: &[Var],
    set: &mut ParamSet,
    opt: &mut AdamState,
    clip: f64,
    term: &str,
    epoch: usize,
) -> Result<()> {
    let mut grads: Vec<Option<Tensor>> = vars.iter().map(|&v| g.grad(v)).collect();
    let norm = clip_global_norm(&mut grads, clip);
    check_finite(norm, &format!("{term} gradient"), epoch)?;
    opt.step(set, grads)
}

impl Trainer {
    /// Fresh parameters and optimizers seeded from `config.seed`.
    pub fn new(config: TrainConfig, vocab: Vocabulary, run_id: usize) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(config.dims(vocab.len()), config.seed)?;
        let optimizers = [
            AdamState::new(config.adam, &params.autoencoder),
            AdamState::new(config.adam, &params.style_disc),
            AdamState::new(config.adam, &params.latent_disc),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Self {
            state: Checkpoint {
                config,
                vocab,
                run_id,
                epoch: 0,
                params,
                optimizers,
                rng,
            },
        })
    }

    pub fn from_checkpoint(checkpoint: Checkpoint) -> Result<Self> {
        checkpoint.config.validate()?;
        Ok(Self { state: checkpoint })
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.state
    }

    pub fn into_checkpoint(self) -> Checkpoint {
        self.state
    }

    pub fn params(&self) -> &ModelParams {
        &self.state.params
    }

    pub fn epochs_done(&self) -> usize {
        self.state.epoch
    }

    pub fn is_finished(&self) -> bool {
        self.state.epoch >= self.state.config.epochs
    }

    fn style_disc_step(&mut self, batch: &Batch, update: bool, epoch: usize) -> Result<(usize, usize)> {
        let s = &mut self.state;
        let mut g = Graph::new();
        let bound = s.params.style_disc.bind(&mut g, update);
        let d = StyleDiscVars::bind_from(&bound);
        let logits = style_logits_hard(&mut g, &d, s.params.dims.disc_hidden, batch)?;
        let acc = argmax_accuracy(g.value(logits), batch.styles());
        if update {
            let mask = vec![true; batch.batch_size()];
            let loss = g.cross_entropy_logits(logits, batch.styles(), &mask)?;
            check_finite(g.value(loss).item()?, "style discriminator loss", epoch)?;
            g.backward(loss)?;
            let clip = s.config.grad_clip;
            apply(&g, bound.vars(), &mut s.params.style_disc, &mut s.optimizers[1], clip, "style discriminator", epoch)?;
        }
        Ok(acc)
    }

    fn latent_disc_step(&mut self, mu: &Tensor, styles: &[usize], update: bool, epoch: usize) -> Result<(usize, usize)> {
        let s = &mut self.state;
        let mut g = Graph::new();
        let bound = s.params.latent_disc.bind(&mut g, update);
        let dz = LatentDiscVars::bind_from(&bound);
        let z = g.constant(mu.clone());
        let logits = latent_logits(&mut g, &dz, z)?;
        let acc = argmax_accuracy(g.value(logits), styles);
        if update {
            let mask = vec![true; styles.len()];
            let loss = g.cross_entropy_logits(logits, styles, &mask)?;
            check_finite(g.value(loss).item()?, "latent discriminator loss", epoch)?;
            g.backward(loss)?;
            let clip = s.config.grad_clip;
            apply(&g, bound.vars(), &mut s.params.latent_disc, &mut s.optimizers[2], clip, "latent discriminator", epoch)?;
        }
        Ok(acc)
    }

    fn encoder_means(&self, batch: &Batch) -> Result<Tensor> {
        let p = &self.state.params;
        let mut g = Graph::new();
        let ae = AutoencoderVars::bind(&mut g, &p.autoencoder, p.dims, false);
        let (mu, _) = encode_hard(&mut g, &ae, batch)?;
        Ok(g.value(mu).clone())
    }

    /// One (E, G) update; returns loss values, objective and reconstruction
    /// counts.
    fn autoencoder_step(&mut self, batch: &Batch, tau: f64, epoch: usize) -> Result<(LossSet<f64>, f64, (usize, usize))> {
        let noise = gaussian_noise(&mut self.state.rng, batch.batch_size(), self.state.params.dims.latent);
        let s = &mut self.state;
        let mut g = Graph::new();
        let bound = s.params.autoencoder.bind(&mut g, true);
        let ae = AutoencoderVars::bind_from(&bound, s.params.dims);
        let d = StyleDiscVars::bind(&mut g, &s.params.style_disc, false);
        let dz = LatentDiscVars::bind(&mut g, &s.params.latent_disc, false);
        let spec = ForwardSpec {
            variant: s.config.variant,
            tau,
            noise: Some(noise),
            style_loss_code: s.config.style_loss_code,
            disc_hidden: s.params.dims.disc_hidden,
        };
        let terms = forward_terms(&mut g, &ae, &d, &dz, batch, &spec)?;
        let values = terms.losses.map(|v| g.value(v).data()[0]);
        for (name, v) in values.named() {
            check_finite(v, name, epoch)?;
        }
        let objective = total_objective_graph(&mut g, s.config.variant, &terms.losses, &s.config.lambdas)?;
        let obj_value = g.value(objective).item()?;
        check_finite(obj_value, "objective", epoch)?;
        let recon = reconstruction_accuracy(g.value(terms.recon_logits), batch);
        g.backward(objective)?;
        let clip = s.config.grad_clip;
        apply(&g, bound.vars(), &mut s.params.autoencoder, &mut s.optimizers[0], clip, "autoencoder", epoch)?;
        Ok((values, obj_value, recon))
    }

    /// Runs one epoch over `corpus` and returns its metrics.
    pub fn train_epoch(&mut self, corpus: &[LabeledSentence]) -> Result<MetricsRecord> {
        let epoch_idx = self.state.epoch;
        let epoch = epoch_idx + 1;
        let cfg = self.state.config.clone();
        let tau = cfg.tau(epoch_idx);
        let shuffle_seed = self.state.rng.next_u64();
        let batches = make_batches(corpus, &self.state.vocab, cfg.batch_size, cfg.max_len, shuffle_seed)?;
        let uses_dz = cfg.variant.uses_latent_disc();

        let mut sums = LossSet::<f64>::default();
        let mut objective = 0.0;
        let (mut d_hit, mut d_n, mut dz_hit, mut dz_n, mut r_hit, mut r_n) = (0, 0, 0, 0, 0, 0);
        for batch in &batches {
            for k in 0..cfg.k_d.max(1) {
                let (c, n) = self.style_disc_step(batch, cfg.k_d > 0, epoch)?;
                if k == 0 {
                    d_hit += c;
                    d_n += n;
                }
            }
            if uses_dz {
                let mu = self.encoder_means(batch)?;
                for k in 0..cfg.k_dz.max(1) {
                    let (c, n) = self.latent_disc_step(&mu, batch.styles(), cfg.k_dz > 0, epoch)?;
                    if k == 0 {
                        dz_hit += c;
                        dz_n += n;
                    }
                }
            }
            let (values, obj, (rc, rn)) = self.autoencoder_step(batch, tau, epoch)?;
            let add = |acc: Option<f64>, v: Option<f64>| v.map(|v| acc.unwrap_or(0.0) + v);
            sums = LossSet {
                ae: add(sums.ae, values.ae),
                c: add(sums.c, values.c),
                z: add(sums.z, values.z),
                dz: add(sums.dz, values.dz),
                cos: add(sums.cos, values.cos),
                cos_minus: add(sums.cos_minus, values.cos_minus),
            };
            objective += obj;
            r_hit += rc;
            r_n += rn;
        }
        if !self.state.params.is_finite() {
            return Err(Error::NonFinite {
                term: "parameters".into(),
                epoch,
            });
        }
        let nb = batches.len() as f64;
        let mut record = MetricsRecord {
            run_id: self.state.run_id,
            epoch,
            tau,
            loss_ae: None,
            loss_c: None,
            loss_z: None,
            loss_dz: None,
            loss_cos: None,
            loss_cos_minus: None,
            objective: objective / nb,
            d_accuracy: d_hit as f64 / d_n as f64,
            dz_accuracy: uses_dz.then(|| dz_hit as f64 / dz_n as f64),
            recon_accuracy: if r_n == 0 { 0.0 } else { r_hit as f64 / r_n as f64 },
        };
        record.set_losses(sums.map(|v| v / nb));
        self.state.epoch = epoch;
        Ok(record)
    }

    /// Trains until `config.epochs` epochs are done.
    pub fn run(mut self, corpus: &[LabeledSentence], hooks: &mut dyn TrainHooks) -> Result<TrainedRun> {
        if corpus.is_empty() {
            return Err(Error::Invalid("training corpus is empty".into()));
        }
        let interval = self.state.config.checkpoint_interval;
        let mut metrics = Vec::new();
        while !self.is_finished() {
            let record = self.train_epoch(corpus)?;
            hooks.on_epoch(&record)?;
            metrics.push(record);
            if interval > 0 && self.state.epoch % interval == 0 && !self.is_finished() {
                hooks.on_checkpoint(&self.state)?;
            }
        }
        hooks.on_checkpoint(&self.state)?;
        Ok(TrainedRun {
            metrics,
            checkpoint: self.state,
        })
    }
}

/// Trains a model from scratch on `corpus`, building the vocabulary from it.
pub fn train(config: &TrainConfig, corpus: &[LabeledSentence]) -> Result<TrainedRun> {
    train_with_hooks(config, corpus, 0, &mut NoHooks)
}

pub fn train_with_hooks(
    config: &TrainConfig,
    corpus: &[LabeledSentence],
    run_id: usize,
    hooks: &mut dyn TrainHooks,
) -> Result<TrainedRun> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Invalid("training corpus is empty".into()));
    }
    let vocab = vocab_for(corpus, config.min_count)?;
    Trainer::new(config.clone(), vocab, run_id)?.run(corpus, hooks)
}

/// Runs `n_runs` independent trainings with seeds `seed, seed+1, ...`.
pub fn multi_retrain(config: &TrainConfig, corpus: &[LabeledSentence], n_runs: usize) -> Result<Vec<TrainedRun>> {
    multi_retrain_with(config, corpus, n_runs, |_| Box::new(NoHooks))
}

/// [`multi_retrain`] with per-run hooks built by `make_hooks(run_index)`.
pub fn multi_retrain_with<F>(
    config: &TrainConfig,
    corpus: &[LabeledSentence],
    n_runs: usize,
    mut make_hooks: F,
) -> Result<Vec<TrainedRun>>
where
    F: FnMut(usize) -> Box<dyn TrainHooks>,
{
    if n_runs < 1 {
        return Err(Error::Invalid("n_runs must be at least 1".into()));
    }
    (0..n_runs)
        .map(|i| {
            let cfg = TrainConfig {
                seed: config.seed.wrapping_add(i as u64),
                ..config.clone()
            };
            let mut hooks = make_hooks(i);
            train_with_hooks(&cfg, corpus, i, hooks.as_mut()).map_err(|e| Error::Run {
                run: i,
                source: Box::new(e),
            })
        })
        .collect()
}
