use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::matrix::Matrix;
use super::params::ParamSet;

/// Hyperparameters of the adaptive-moment optimizer.
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
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let zeros: Vec<Matrix> = params
            .iter()
            .map(|(_, m)| Matrix::zeros(m.rows(), m.cols()))
            .collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Matrix] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Matrix] {
        &self.second
    }

    /// Applies one update. Nothing is modified when any gradient is
    /// non-finite or mis-shaped.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Matrix]) -> Result<()> {
        if grads.len() != params.len() || grads.len() != self.first.len() {
            return Err(Error::shape(
                "optimizer_step",
                format!("{} gradients for {} parameters", grads.len(), params.len()),
            ));
        }
        for ((name, p), g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::shape(
                    "optimizer_step",
                    format!("`{name}` is {:?}, gradient is {:?}", p.shape(), g.shape()),
                ));
            }
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient(name.to_owned()));
            }
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (k, ((_, p), g)) in params.iter_mut().zip(grads).enumerate() {
            let m = self.first[k].data_mut();
            let v = self.second[k].data_mut();
            for (i, (pv, &gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * gv;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gv * gv;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                *pv -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
