//! Adam optimizer over named parameter sets.

use super::{GradSet, ParamSet};
use indexmap::IndexMap;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

pub struct Adam {
    cfg: AdamConfig,
    step: u64,
    first_moment: IndexMap<String, Array2<f64>>,
    second_moment: IndexMap<String, Array2<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &ParamSet) -> Self {
        Adam {
            cfg,
            step: 0,
            first_moment: params
                .iter()
                .map(|(k, v)| (k.to_string(), Array2::zeros(v.dim())))
                .collect(),
            second_moment: params
                .iter()
                .map(|(k, v)| (k.to_string(), Array2::zeros(v.dim())))
                .collect(),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &GradSet) {
        self.step += 1;
        let t = self.step as f64;
        let bias1 = 1.0 - self.cfg.beta1.powf(t);
        let bias2 = 1.0 - self.cfg.beta2.powf(t);
        for (name, g) in grads.iter() {
            let m = self.first_moment.get_mut(name).expect("known parameter");
            let v = self.second_moment.get_mut(name).expect("known parameter");
            *m *= self.cfg.beta1;
            *m += &(g * (1.0 - self.cfg.beta1));
            *v *= self.cfg.beta2;
            *v += &(&(g * g) * (1.0 - self.cfg.beta2));
            let p = params.get_mut(name);
            let m_hat = &*m / bias1;
            let v_hat = &*v / bias2;
            let update = &m_hat / &(v_hat.mapv(f64::sqrt) + self.cfg.epsilon);
            *p -= &(&update * self.cfg.learning_rate);
        }
    }
}
