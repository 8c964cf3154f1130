//! Adam with two learning-rate groups and a step decay schedule.
//!
//! The exponential operator parameters `e1, e2, e3` use their own rate;
//! every other parameter uses the main rate. Both rates are multiplied by
//! `decay_factor` every `decay_period` epochs. Weight decay is added to
//! the gradient (`g + wd * theta`) before the moment updates.

use super::{NnError, Result};
use crate::operator::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Exponential,
    Other,
}

/// How the entries of one parameter block map to groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupLayout {
    Uniform(ParamGroup),
    /// `(m1, m2, m3, e1, e2, e3, a)`.
    OperatorParams,
}

impl GroupLayout {
    fn group(self, idx: usize) -> ParamGroup {
        match self {
            GroupLayout::Uniform(g) => g,
            GroupLayout::OperatorParams if ParamSet::EXPONENT_SLOTS.contains(&idx) => ParamGroup::Exponential,
            GroupLayout::OperatorParams => ParamGroup::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr_exponential: f64,
    pub lr_other: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub decay_factor: f64,
    pub decay_period: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr_exponential: 0.005,
            lr_other: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 5e-4,
            decay_factor: 0.5,
            decay_period: 50,
        }
    }
}

impl AdamConfig {
    /// Learning rate of `group` during (0-based) `epoch`.
    pub fn learning_rate(&self, group: ParamGroup, epoch: usize) -> f64 {
        let base = match group {
            ParamGroup::Exponential => self.lr_exponential,
            ParamGroup::Other => self.lr_other,
        };
        let decays = if self.decay_period == 0 { 0 } else { epoch / self.decay_period };
        base * self.decay_factor.powi(decays as i32)
    }
}

#[derive(Debug, Clone)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Moment buffers keyed by block index; a block's shape is fixed by its
/// first update.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    blocks: Vec<Option<Moments>>,
}

/// One parameter block submitted to [`AdamState::step`].
pub struct ParamBlock<'a> {
    pub values: &'a mut [f64],
    pub grads: &'a [f64],
    pub layout: GroupLayout,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, step: 0, blocks: Vec::new() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update over all blocks. If any gradient is non-finite
    /// nothing is changed and an error is returned.
    pub fn step(&mut self, blocks: &mut [ParamBlock<'_>], epoch: usize) -> Result<()> {
        for (b, block) in blocks.iter().enumerate() {
            if block.values.len() != block.grads.len() {
                return Err(NnError::Shape(format!(
                    "block {b}: {} values vs {} gradients",
                    block.values.len(),
                    block.grads.len()
                )));
            }
            if let Some(Some(m)) = self.blocks.get(b) {
                if m.m.len() != block.values.len() {
                    return Err(NnError::Shape(format!("block {b} changed size")));
                }
            }
            if block.grads.iter().any(|g| !g.is_finite()) {
                return Err(NnError::NonFiniteGradient(format!("parameter block {b}")));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let lr_exp = c.learning_rate(ParamGroup::Exponential, epoch);
        let lr_other = c.learning_rate(ParamGroup::Other, epoch);
        if self.blocks.len() < blocks.len() {
            self.blocks.resize(blocks.len(), None);
        }
        for (b, block) in blocks.iter_mut().enumerate() {
            let len = block.values.len();
            let mom = self.blocks[b].get_or_insert_with(|| Moments { m: vec![0.0; len], v: vec![0.0; len] });
            for k in 0..len {
                let theta = block.values[k];
                let g = block.grads[k] + c.weight_decay * theta;
                mom.m[k] = c.beta1 * mom.m[k] + (1.0 - c.beta1) * g;
                mom.v[k] = c.beta2 * mom.v[k] + (1.0 - c.beta2) * g * g;
                let mhat = mom.m[k] / bc1;
                let vhat = mom.v[k] / bc2;
                let lr = match block.layout.group(k) {
                    ParamGroup::Exponential => lr_exp,
                    ParamGroup::Other => lr_other,
                };
                block.values[k] = theta - lr * mhat / (vhat.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}
