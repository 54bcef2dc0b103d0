use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::nn::{glorot, linear};
use crate::autodiff::{AdamConfig, AdamState, Graph, ParamSet, Tensor, Var};
use crate::error::{Error, Result};

pub const MIN_PROBE_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Fraction of samples held out for the reported accuracy.
    pub holdout: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            epochs: 200,
            batch_size: 64,
            lr: 3e-3,
            holdout: 0.2,
        }
    }
}

/// External style classifier `d_z -> hidden (tanh) -> 2` trained on frozen
/// latent vectors. Inputs are standardized with training-split statistics.
#[derive(Debug, Clone)]
pub struct ProbeClassifier {
    pub config: ProbeConfig,
    params: ParamSet,
    optimizer: AdamState,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

fn standardize<'a>(x: &'a [f64], mean: &'a [f64], scale: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    x.iter().zip(mean).zip(scale).map(|((v, m), s)| (v - m) / s)
}

impl ProbeClassifier {
    fn logits(&self, g: &mut Graph, x: Var, trainable: bool) -> Result<(Var, Vec<Var>)> {
        let b = self.params.bind(g, trainable);
        let h = linear(g, x, b.var("hidden.w"), b.var("hidden.b"))?;
        let h = g.tanh(h);
        let out = linear(g, h, b.var("out.w"), b.var("out.b"))?;
        Ok((out, b.vars().to_vec()))
    }

    fn input(&self, rows: &[&[f64]]) -> Result<Tensor> {
        let d = self.mean.len();
        let data: Vec<f64> = rows
            .iter()
            .flat_map(|r| standardize(r, &self.mean, &self.scale))
            .collect();
        Tensor::matrix(rows.len(), d, data)
    }

    pub fn predict(&self, rows: &[&[f64]]) -> Result<Vec<usize>> {
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        if let Some(r) = rows.iter().find(|r| r.len() != self.mean.len()) {
            return Err(Error::Invalid(format!("probe expects {} features, got {}", self.mean.len(), r.len())));
        }
        let mut g = Graph::new();
        let x = g.constant(self.input(rows)?);
        let (logits, _) = self.logits(&mut g, x, false)?;
        let lt = g.value(logits);
        Ok((0..rows.len()).map(|i| usize::from(lt.get(i, 1) > lt.get(i, 0))).collect())
    }

    pub fn accuracy(&self, samples: &[(&[f64], usize)]) -> Result<f64> {
        let rows: Vec<&[f64]> = samples.iter().map(|s| s.0).collect();
        let pred = self.predict(&rows)?;
        let hits = pred.iter().zip(samples).filter(|(p, s)| **p == s.1).count();
        Ok(hits as f64 / samples.len().max(1) as f64)
    }
}

/// Trains a fresh probe on a seeded 80/20 split of `latents` and returns it
/// with its held-out accuracy.
pub fn train_probe(latents: &[(Vec<f64>, usize)], seed: u64) -> Result<(ProbeClassifier, f64)> {
    train_probe_with(latents, seed, ProbeConfig::default())
}

pub fn train_probe_with(latents: &[(Vec<f64>, usize)], seed: u64, config: ProbeConfig) -> Result<(ProbeClassifier, f64)> {
    if latents.len() < MIN_PROBE_SAMPLES {
        return Err(Error::Invalid(format!(
            "probe needs at least {MIN_PROBE_SAMPLES} samples, got {}",
            latents.len()
        )));
    }
    if let Some((_, l)) = latents.iter().find(|(_, l)| *l > 1) {
        return Err(Error::Invalid(format!("probe label {l} is not binary")));
    }
    let positives = latents.iter().filter(|(_, l)| *l == 1).count();
    if positives == 0 || positives == latents.len() {
        return Err(Error::Invalid("probe input contains a single class".into()));
    }
    let d = latents[0].0.len();
    if d == 0 || latents.iter().any(|(v, _)| v.len() != d) {
        return Err(Error::Invalid("probe latents must share a positive dimension".into()));
    }
    if !(config.holdout > 0.0 && config.holdout < 1.0) {
        return Err(Error::Invalid(format!("holdout fraction must be in (0, 1), got {}", config.holdout)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..latents.len()).collect();
    order.shuffle(&mut rng);
    let n_test = ((latents.len() as f64 * config.holdout).round() as usize).clamp(1, latents.len() - 1);
    let (test_idx, train_idx) = order.split_at(n_test);

    let mut mean = vec![0.0; d];
    for &i in train_idx {
        for (m, v) in mean.iter_mut().zip(&latents[i].0) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= train_idx.len() as f64);
    let mut scale = vec![0.0; d];
    for &i in train_idx {
        for ((s, v), m) in scale.iter_mut().zip(&latents[i].0).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    scale
        .iter_mut()
        .for_each(|s| *s = (*s / train_idx.len() as f64).sqrt().max(1e-8));

    let mut params = ParamSet::new();
    params.insert("hidden.w", glorot(&mut rng, d, config.hidden))?;
    params.insert("hidden.b", Tensor::zeros(&[config.hidden]))?;
    params.insert("out.w", glorot(&mut rng, config.hidden, 2))?;
    params.insert("out.b", Tensor::zeros(&[2]))?;
    let adam = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    let optimizer = AdamState::new(adam, &params);
    let mut probe = ProbeClassifier {
        config,
        params,
        optimizer,
        mean,
        scale,
    };

    let mut train_order = train_idx.to_vec();
    for _ in 0..config.epochs {
        train_order.shuffle(&mut rng);
        for chunk in train_order.chunks(config.batch_size.max(1)) {
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| latents[i].0.as_slice()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| latents[i].1).collect();
            let mut g = Graph::new();
            let x = g.constant(probe.input(&rows)?);
            let (logits, vars) = probe.logits(&mut g, x, true)?;
            let loss = g.cross_entropy_logits(logits, &labels, &vec![true; labels.len()])?;
            g.backward(loss)?;
            let grads = vars.iter().map(|&v| g.grad(v)).collect();
            probe.optimizer.step(&mut probe.params, grads)?;
        }
    }

    let test: Vec<(&[f64], usize)> = test_idx.iter().map(|&i| (latents[i].0.as_slice(), latents[i].1)).collect();
    let acc = probe.accuracy(&test)?;
    Ok((probe, acc))
}
