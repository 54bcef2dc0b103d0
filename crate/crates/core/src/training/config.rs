use std::fmt::Write as _;

use crate::autodiff::AdamConfig;
use crate::error::{Error, Result};
use crate::models::{ArchitectureVariant, Lambdas, ModelDims, StyleLossCode};
use crate::textpipe::DEFAULT_MAX_LEN;

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: ArchitectureVariant,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lambdas: Lambdas,
    pub adam: AdamConfig,
    pub tau_initial: f64,
    pub tau_decay: f64,
    pub tau_min: f64,
    pub k_d: usize,
    pub k_dz: usize,
    /// Epochs between checkpoints; 0 writes only the final one.
    pub checkpoint_interval: usize,
    pub grad_clip: f64,
    pub max_len: usize,
    pub min_count: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub disc_hidden_dim: usize,
    pub latent_disc_hidden_dim: usize,
    pub style_loss_code: StyleLossCode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: ArchitectureVariant::Baseline,
            epochs: 12,
            batch_size: 4,
            seed: 1000,
            lambdas: Lambdas::default(),
            adam: AdamConfig::default(),
            tau_initial: 1.0,
            tau_decay: 0.5,
            tau_min: 0.001,
            k_d: 1,
            k_dz: 1,
            checkpoint_interval: 0,
            grad_clip: 5.0,
            max_len: DEFAULT_MAX_LEN,
            min_count: 1,
            embed_dim: 32,
            hidden_dim: 64,
            latent_dim: 16,
            disc_hidden_dim: 32,
            latent_disc_hidden_dim: 32,
            style_loss_code: StyleLossCode::True,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Invalid(format!("invalid value {value:?} for {key}")))
}

impl TrainConfig {
    /// Temperature for a zero-based epoch index.
    pub fn tau(&self, epoch: usize) -> f64 {
        (self.tau_initial * self.tau_decay.powi(epoch as i32)).max(self.tau_min)
    }

    pub fn dims(&self, vocab: usize) -> ModelDims {
        ModelDims {
            vocab,
            embed: self.embed_dim,
            hidden: self.hidden_dim,
            latent: self.latent_dim,
            disc_hidden: self.disc_hidden_dim,
            latent_disc_hidden: self.latent_disc_hidden_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Invalid(m));
        if self.epochs < 1 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1".into());
        }
        let l = &self.lambdas;
        for (name, v) in [
            ("lambda_c", l.c),
            ("lambda_z", l.z),
            ("lambda_dz", l.dz),
            ("lambda_cos", l.cos),
            ("lambda_cos_minus", l.cos_minus),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return fail(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        if !(self.adam.lr > 0.0) {
            return fail(format!("learning rate must be positive, got {}", self.adam.lr));
        }
        if !(self.tau_min > 0.0) || !(self.tau_initial > 0.0) || !(self.tau_decay > 0.0 && self.tau_decay <= 1.0) {
            return fail("temperature schedule needs tau_initial > 0, tau_min > 0, 0 < tau_decay <= 1".into());
        }
        if self.max_len < 3 {
            return fail(format!("max_len must be at least 3, got {}", self.max_len));
        }
        if self.grad_clip <= 0.0 {
            return fail("grad_clip must be positive".into());
        }
        Ok(())
    }

    /// `key = value` lines; floats use round-trip formatting so a parsed
    /// copy is bit-identical.
    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.kv_pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    fn kv_pairs(&self) -> Vec<(&'static str, String)> {
        let code = match self.style_loss_code {
            StyleLossCode::True => "true",
            StyleLossCode::Flipped => "flipped",
        };
        vec![
            ("variant", self.variant.name().to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("seed", self.seed.to_string()),
            ("lambda_c", format!("{:?}", self.lambdas.c)),
            ("lambda_z", format!("{:?}", self.lambdas.z)),
            ("lambda_dz", format!("{:?}", self.lambdas.dz)),
            ("lambda_cos", format!("{:?}", self.lambdas.cos)),
            ("lambda_cos_minus", format!("{:?}", self.lambdas.cos_minus)),
            ("lr", format!("{:?}", self.adam.lr)),
            ("beta1", format!("{:?}", self.adam.beta1)),
            ("beta2", format!("{:?}", self.adam.beta2)),
            ("adam_eps", format!("{:?}", self.adam.eps)),
            ("tau_initial", format!("{:?}", self.tau_initial)),
            ("tau_decay", format!("{:?}", self.tau_decay)),
            ("tau_min", format!("{:?}", self.tau_min)),
            ("k_d", self.k_d.to_string()),
            ("k_dz", self.k_dz.to_string()),
            ("checkpoint_interval", self.checkpoint_interval.to_string()),
            ("grad_clip", format!("{:?}", self.grad_clip)),
            ("max_len", self.max_len.to_string()),
            ("min_count", self.min_count.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("hidden_dim", self.hidden_dim.to_string()),
            ("latent_dim", self.latent_dim.to_string()),
            ("disc_hidden_dim", self.disc_hidden_dim.to_string()),
            ("latent_disc_hidden_dim", self.latent_disc_hidden_dim.to_string()),
            ("style_loss_code", code.to_string()),
        ]
    }

    /// Whether `key` names a training setting.
    pub fn is_key(key: &str) -> bool {
        Self::default().kv_pairs().iter().any(|(k, _)| *k == key)
    }

    /// Sets one field from its `key = value` form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "variant" => self.variant = value.parse()?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "lambda_c" => self.lambdas.c = parse(key, value)?,
            "lambda_z" => self.lambdas.z = parse(key, value)?,
            "lambda_dz" => self.lambdas.dz = parse(key, value)?,
            "lambda_cos" => self.lambdas.cos = parse(key, value)?,
            "lambda_cos_minus" => self.lambdas.cos_minus = parse(key, value)?,
            "lr" => self.adam.lr = parse(key, value)?,
            "beta1" => self.adam.beta1 = parse(key, value)?,
            "beta2" => self.adam.beta2 = parse(key, value)?,
            "adam_eps" => self.adam.eps = parse(key, value)?,
            "tau_initial" => self.tau_initial = parse(key, value)?,
            "tau_decay" => self.tau_decay = parse(key, value)?,
            "tau_min" => self.tau_min = parse(key, value)?,
            "k_d" => self.k_d = parse(key, value)?,
            "k_dz" => self.k_dz = parse(key, value)?,
            "checkpoint_interval" => self.checkpoint_interval = parse(key, value)?,
            "grad_clip" => self.grad_clip = parse(key, value)?,
            "max_len" => self.max_len = parse(key, value)?,
            "min_count" => self.min_count = parse(key, value)?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "hidden_dim" => self.hidden_dim = parse(key, value)?,
            "latent_dim" => self.latent_dim = parse(key, value)?,
            "disc_hidden_dim" => self.disc_hidden_dim = parse(key, value)?,
            "latent_disc_hidden_dim" => self.latent_disc_hidden_dim = parse(key, value)?,
            "style_loss_code" => {
                self.style_loss_code = match value {
                    "true" => StyleLossCode::True,
                    "flipped" => StyleLossCode::Flipped,
                    _ => return Err(Error::Invalid(format!("style_loss_code must be true or flipped, got {value:?}"))),
                }
            }
            _ => return Err(Error::Invalid(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` text; unknown keys are rejected with their line
    /// number.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (line, key, value) in parse_kv_lines(text)? {
            cfg.set(&key, &value)
                .map_err(|e| Error::Invalid(format!("line {line}: {e}")))?;
        }
        Ok(cfg)
    }
}

/// Splits flat `key = value` text into `(line_number, key, value)`. Blank
/// lines and lines starting with `#` are skipped.
pub fn parse_kv_lines(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("line {}: expected `key = value`, got {line:?}", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Invalid(format!("line {}: empty key", i + 1)));
        }
        out.push((i + 1, k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}
