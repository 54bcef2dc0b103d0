use std::fmt::Write as _;
use std::path::PathBuf;

use styledecomp::training::{parse_kv_lines, TrainConfig};
use styledecomp::{Error, Result};

/// Training settings plus data location, run count and output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub n_runs: usize,
    /// Corpus text file; the synthetic corpus is used when absent.
    pub train_text: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub synth_seed: u64,
    pub synth_n: usize,
    pub entanglement: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            n_runs: 1,
            train_text: None,
            train_labels: None,
            out_dir: PathBuf::from("experiment"),
            synth_seed: 7,
            synth_n: 2000,
            entanglement: 0.1,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Invalid(format!("invalid value {value:?} for {key}")))
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n_runs" => self.n_runs = parse(key, value)?,
            "train_text" => self.train_text = Some(PathBuf::from(value)),
            "train_labels" => self.train_labels = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "synth_seed" => self.synth_seed = parse(key, value)?,
            "synth_n" => self.synth_n = parse(key, value)?,
            "entanglement" => self.entanglement = parse(key, value)?,
            _ if TrainConfig::is_key(key) => self.train.set(key, value)?,
            _ => return Err(Error::Invalid(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` text on top of the defaults.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (line, key, value) in parse_kv_lines(text)? {
            cfg.set(&key, &value)
                .map_err(|e| Error::Invalid(format!("line {line}: {e}")))?;
        }
        Ok(cfg)
    }

    /// Applies a `key=value` override from the command line.
    pub fn apply_override(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("expected key=value, got {pair:?}")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.n_runs < 1 {
            return Err(Error::Invalid("n_runs must be at least 1".into()));
        }
        if self.train_text.is_some() != self.train_labels.is_some() {
            return Err(Error::Invalid("train_text and train_labels must be given together".into()));
        }
        if !(0.0..=1.0).contains(&self.entanglement) {
            return Err(Error::Invalid(format!("entanglement must be in [0,1], got {}", self.entanglement)));
        }
        if self.synth_n == 0 {
            return Err(Error::Invalid("synth_n must be positive".into()));
        }
        Ok(())
    }

    pub fn to_kv_text(&self) -> String {
        let mut s = self.train.to_kv_text();
        let _ = writeln!(s, "n_runs = {}", self.n_runs);
        if let Some(p) = &self.train_text {
            let _ = writeln!(s, "train_text = {}", p.display());
        }
        if let Some(p) = &self.train_labels {
            let _ = writeln!(s, "train_labels = {}", p.display());
        }
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(s, "synth_seed = {}", self.synth_seed);
        let _ = writeln!(s, "synth_n = {}", self.synth_n);
        let _ = writeln!(s, "entanglement = {:?}", self.entanglement);
        s
    }
}
