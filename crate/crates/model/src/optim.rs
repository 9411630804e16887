//! RMSProp with two learning-rate groups and L2 weight decay.
//!
//! `g ← ∇ + wd·p`, `v ← α·v + (1−α)·g²`, `p ← p − lr·g / (√v + ε)`.
//! Parameters whose name starts with `stn.` use the STN learning rate.

use std::collections::BTreeMap;

use candle_core::backprop::GradStore;
use candle_core::Tensor;

use crate::error::Result;
use crate::params::ParamStore;

pub const STN_PREFIX: &str = "stn.";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsPropConfig {
    pub lr_features: f64,
    pub lr_stn: f64,
    pub alpha: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

#[derive(Debug, Clone)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    square_avg: BTreeMap<String, Tensor>,
    pub step_count: u64,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig) -> Self {
        Self {
            config,
            square_avg: BTreeMap::new(),
            step_count: 0,
        }
    }

    pub fn lr_for(&self, name: &str) -> f64 {
        if name.starts_with(STN_PREFIX) {
            self.config.lr_stn
        } else {
            self.config.lr_features
        }
    }

    /// Applies one update to every parameter that has a gradient.
    pub fn step(&mut self, params: &ParamStore, grads: &GradStore) -> Result<()> {
        let c = self.config;
        for (name, var) in params.iter() {
            let Some(grad) = grads.get(var.as_tensor()) else {
                continue;
            };
            let p = var.as_tensor().detach();
            // gradients reference the forward graph; the running average must not
            let grad = grad.detach();
            let g = if c.weight_decay > 0.0 {
                (grad + (&p * c.weight_decay)?)?
            } else {
                grad
            };
            let v = match self.square_avg.get(name) {
                Some(v) => ((v * c.alpha)? + (g.sqr()? * (1.0 - c.alpha))?)?,
                None => (g.sqr()? * (1.0 - c.alpha))?,
            };
            let update = (g / (v.sqrt()? + c.eps)?)?;
            var.set(&(p - (update * self.lr_for(name))?)?)?;
            self.square_avg.insert(name.clone(), v);
        }
        self.step_count += 1;
        Ok(())
    }

    pub fn state(&self) -> &BTreeMap<String, Tensor> {
        &self.square_avg
    }

    pub fn restore(&mut self, state: BTreeMap<String, Tensor>, step_count: u64) {
        self.square_avg = state;
        self.step_count = step_count;
    }
}
