use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::LossSet;

/// Per-epoch training summary, written as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub run_id: usize,
    /// One-based index of the finished epoch.
    pub epoch: usize,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_ae: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_dz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_cos: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_cos_minus: Option<f64>,
    pub objective: f64,
    pub d_accuracy: f64,
    /// `None` for variants without a latent discriminator.
    pub dz_accuracy: Option<f64>,
    pub recon_accuracy: f64,
}

impl MetricsRecord {
    pub fn losses(&self) -> LossSet<f64> {
        LossSet {
            ae: self.loss_ae,
            c: self.loss_c,
            z: self.loss_z,
            dz: self.loss_dz,
            cos: self.loss_cos,
            cos_minus: self.loss_cos_minus,
        }
    }

    pub(crate) fn set_losses(&mut self, l: LossSet<f64>) {
        self.loss_ae = l.ae;
        self.loss_c = l.c;
        self.loss_z = l.z;
        self.loss_dz = l.dz;
        self.loss_cos = l.cos;
        self.loss_cos_minus = l.cos_minus;
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }
}

pub fn write_metrics(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        writeln!(out, "{}", r.to_json_line()).expect("in-memory write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Invalid(format!("{}: line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}
