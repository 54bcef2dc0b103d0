use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let zeros = || params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        Self {
            config,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    /// Rebuilds a state from saved moments. Shapes must match `params`.
    pub fn from_parts(
        config: AdamConfig,
        params: &ParamSet,
        step: u64,
        first: Vec<Tensor>,
        second: Vec<Tensor>,
    ) -> Result<Self> {
        if first.len() != params.len() || second.len() != params.len() {
            return Err(Error::Format(format!(
                "optimizer state has {}/{} moments for {} parameters",
                first.len(),
                second.len(),
                params.len()
            )));
        }
        for ((m, v), p) in first.iter().zip(&second).zip(params.tensors()) {
            if m.shape() != p.shape() || v.shape() != p.shape() {
                return Err(Error::Format(format!(
                    "optimizer moment shape {:?} does not match parameter {:?}",
                    m.shape(),
                    p.shape()
                )));
            }
        }
        Ok(Self {
            config,
            step,
            first,
            second,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.second
    }

    /// One bias-corrected Adam update. Consumes the gradients.
    pub fn step(&mut self, params: &mut ParamSet, grads: Vec<Option<Tensor>>) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::Contract(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        if let Some(i) = grads.iter().position(Option::is_none) {
            return Err(Error::Contract(format!(
                "missing gradient for parameter {}",
                params.names()[i]
            )));
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (k, grad) in grads.into_iter().enumerate() {
            let grad = grad.expect("checked above");
            let w = params.tensors_mut()[k].data_mut();
            let m = self.first[k].data_mut();
            let v = self.second[k].data_mut();
            for (j, &g) in grad.data().iter().enumerate() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g;
                v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                w[j] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
