use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::LatentCode;

/// Measurements of one trained model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub probe_accuracy: f64,
    /// `None` when no references were available.
    pub bleu: Option<f64>,
    pub transfer_accuracy: f64,
    pub mean_cosine_distance: f64,
    pub mean_kl: f64,
}

/// Means over runs, standard deviations when there are at least two runs,
/// and the per-run values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub probe_accuracy: f64,
    pub bleu: Option<f64>,
    pub transfer_accuracy: f64,
    pub mean_cosine_distance: f64,
    pub mean_kl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_accuracy_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bleu_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer_accuracy_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_cosine_distance_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_kl_std: Option<f64>,
    pub n_runs: usize,
    pub runs: Vec<RunMetrics>,
}

/// Mean and sample standard deviation (`n - 1` denominator, 0 for `n = 1`).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

impl EvalReport {
    pub fn single(run: RunMetrics) -> Self {
        Self::from_runs(vec![run]).expect("one run")
    }

    pub fn from_runs(runs: Vec<RunMetrics>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Invalid("cannot aggregate zero runs".into()));
        }
        let n = runs.len();
        let col = |f: fn(&RunMetrics) -> f64| {
            let v: Vec<f64> = runs.iter().map(f).collect();
            mean_std(&v)
        };
        let std = |s: f64| (n >= 2).then_some(s);
        let (pa, pa_s) = col(|r| r.probe_accuracy);
        let (ta, ta_s) = col(|r| r.transfer_accuracy);
        let (cd, cd_s) = col(|r| r.mean_cosine_distance);
        let (kl, kl_s) = col(|r| r.mean_kl);
        let bleu: Option<Vec<f64>> = runs.iter().map(|r| r.bleu).collect();
        let bleu = bleu.map(|b| mean_std(&b));
        Ok(Self {
            probe_accuracy: pa,
            bleu: bleu.map(|b| b.0),
            transfer_accuracy: ta,
            mean_cosine_distance: cd,
            mean_kl: kl,
            probe_accuracy_std: std(pa_s),
            bleu_std: bleu.and_then(|b| std(b.1)),
            transfer_accuracy_std: std(ta_s),
            mean_cosine_distance_std: std(cd_s),
            mean_kl_std: std(kl_s),
            n_runs: n,
            runs,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Pools the runs of several reports into one.
pub fn aggregate_runs(reports: &[EvalReport]) -> Result<EvalReport> {
    EvalReport::from_runs(reports.iter().flat_map(|r| r.runs.iter().copied()).collect())
}

/// One line per example: label, the mean values, then the log-variance
/// values, with 17 significant digits.
pub fn latent_dump(codes: &[LatentCode], labels: &[usize]) -> String {
    let mut s = String::new();
    for (c, l) in codes.iter().zip(labels) {
        let _ = write!(s, "{l}");
        for v in c.mu.iter().chain(&c.logvar) {
            let _ = write!(s, " {v:.16e}");
        }
        s.push('\n');
    }
    s
}

pub fn write_latent_dump(path: &Path, codes: &[LatentCode], labels: &[usize]) -> Result<()> {
    std::fs::write(path, latent_dump(codes, labels)).map_err(|e| Error::io(path, e))
}

/// Parses a latent dump into `(label, mu, logvar)` rows.
pub fn parse_latent_dump(text: &str) -> Result<Vec<(usize, Vec<f64>, Vec<f64>)>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::Invalid(format!("latent dump line {}: malformed", i + 1));
            let mut parts = line.split_whitespace();
            let label = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let values: Vec<f64> = parts.map(|p| p.parse().map_err(|_| bad())).collect::<Result<_>>()?;
            if values.is_empty() || values.len() % 2 != 0 {
                return Err(bad());
            }
            let (mu, lv) = values.split_at(values.len() / 2);
            Ok((label, mu.to_vec(), lv.to_vec()))
        })
        .collect()
}
