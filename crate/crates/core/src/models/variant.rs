use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};

/// Which loss terms an architecture trains with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArchitectureVariant {
    /// Reconstruction, style-fitness and latent-independence losses.
    Baseline,
    /// Baseline plus an adversarial latent discriminator.
    LatentDiscriminator,
    /// Baseline plus cosine losses on re-encoded soft outputs.
    ShiftedAE,
    /// Both extensions at once.
    ShiftedAEWithDiscriminator,
}

impl ArchitectureVariant {
    pub const ALL: [ArchitectureVariant; 4] = [
        Self::Baseline,
        Self::LatentDiscriminator,
        Self::ShiftedAE,
        Self::ShiftedAEWithDiscriminator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::LatentDiscriminator => "latent-disc",
            Self::ShiftedAE => "sae",
            Self::ShiftedAEWithDiscriminator => "sae-latent-disc",
        }
    }

    pub fn uses_latent_disc(self) -> bool {
        matches!(self, Self::LatentDiscriminator | Self::ShiftedAEWithDiscriminator)
    }

    pub fn uses_cosine(self) -> bool {
        matches!(self, Self::ShiftedAE | Self::ShiftedAEWithDiscriminator)
    }

    pub fn valid_names() -> String {
        Self::ALL.map(Self::name).join(", ")
    }
}

impl fmt::Display for ArchitectureVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchitectureVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "unknown variant {s:?}; valid variants: {}",
                    Self::valid_names()
                ))
            })
    }
}

/// Weights of the auxiliary loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambdas {
    pub c: f64,
    pub z: f64,
    pub dz: f64,
    pub cos: f64,
    pub cos_minus: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        Self {
            c: 0.1,
            z: 0.1,
            dz: 1.0,
            cos: 1.0,
            cos_minus: 1.0,
        }
    }
}

impl Lambdas {
    pub fn zero() -> Self {
        Self {
            c: 0.0,
            z: 0.0,
            dz: 0.0,
            cos: 0.0,
            cos_minus: 0.0,
        }
    }
}

/// One value per loss term; `None` when the term was not computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSet<T> {
    pub ae: Option<T>,
    pub c: Option<T>,
    pub z: Option<T>,
    pub dz: Option<T>,
    pub cos: Option<T>,
    pub cos_minus: Option<T>,
}

impl<T> Default for LossSet<T> {
    fn default() -> Self {
        Self {
            ae: None,
            c: None,
            z: None,
            dz: None,
            cos: None,
            cos_minus: None,
        }
    }
}

impl<T: Copy> LossSet<T> {
    pub fn map<U>(&self, mut f: impl FnMut(T) -> U) -> LossSet<U> {
        LossSet {
            ae: self.ae.map(&mut f),
            c: self.c.map(&mut f),
            z: self.z.map(&mut f),
            dz: self.dz.map(&mut f),
            cos: self.cos.map(&mut f),
            cos_minus: self.cos_minus.map(&mut f),
        }
    }

    /// `(name, value)` for every present term.
    pub fn named(&self) -> Vec<(&'static str, T)> {
        [
            ("loss_ae", self.ae),
            ("loss_c", self.c),
            ("loss_z", self.z),
            ("loss_dz", self.dz),
            ("loss_cos", self.cos),
            ("loss_cos_minus", self.cos_minus),
        ]
        .into_iter()
        .filter_map(|(n, v)| v.map(|v| (n, v)))
        .collect()
    }
}

fn need<T: Copy>(v: Option<T>, name: &str, variant: ArchitectureVariant) -> Result<T> {
    v.ok_or_else(|| Error::Contract(format!("{variant} objective needs {name}")))
}

/// Weighted terms `(weight, value)` that make up a variant's objective.
fn weighted<T: Copy>(
    variant: ArchitectureVariant,
    losses: &LossSet<T>,
    lambdas: &Lambdas,
) -> Result<Vec<(f64, T)>> {
    let mut terms = vec![
        (1.0, need(losses.ae, "loss_ae", variant)?),
        (lambdas.c, need(losses.c, "loss_c", variant)?),
        (lambdas.z, need(losses.z, "loss_z", variant)?),
    ];
    if variant.uses_latent_disc() {
        terms.push((-lambdas.dz, need(losses.dz, "loss_dz", variant)?));
    }
    if variant.uses_cosine() {
        terms.push((lambdas.cos, need(losses.cos, "loss_cos", variant)?));
        terms.push((lambdas.cos_minus, need(losses.cos_minus, "loss_cos_minus", variant)?));
    }
    Ok(terms)
}

/// Scalar objective of `variant` from already-evaluated loss values.
pub fn total_objective(variant: ArchitectureVariant, losses: &LossSet<f64>, lambdas: &Lambdas) -> Result<f64> {
    Ok(weighted(variant, losses, lambdas)?
        .into_iter()
        .map(|(w, v)| w * v)
        .sum())
}

/// Records the objective of `variant` in `g`.
pub fn total_objective_graph(
    g: &mut Graph,
    variant: ArchitectureVariant,
    losses: &LossSet<Var>,
    lambdas: &Lambdas,
) -> Result<Var> {
    let terms = weighted(variant, losses, lambdas)?;
    let mut total = terms[0].1;
    for &(w, v) in &terms[1..] {
        let scaled = g.affine(v, w, 0.0);
        total = g.add(total, scaled)?;
    }
    Ok(total)
}
