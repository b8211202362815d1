//! Difficulty-aware group relative policy optimisation.
//!
//! Per question, a group of `G` responses is sampled from the behaviour policy; all-wrong groups
//! may be redrawn up to `max_resample_rounds` times. Rewards are standardised within the group,
//! scaled by the difficulty weight `#incorrect / G + 1`, and fed to a token-level clipped
//! surrogate with a KL penalty against a frozen reference policy.

mod advantage;
mod objective;
mod optim;
mod rollout;

pub use advantage::{compute_advantages, difficulty_weight, reweight, token_kl};
pub use objective::{objective, surrogate, KlMode, ObjectiveOutput};
pub use optim::{Optimizer, OptimizerKind};
pub use rollout::{
    rollout_with_resampling, GroupBatch, PolicySampler, ResponseSampler, RolloutQuestion,
};

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::policy::PolicyParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub clip_eps: f64,
    pub beta: f64,
    pub eps_std: f64,
    pub max_resample_rounds: usize,
    pub lr: f64,
    pub seed: u64,
    /// Redraw all-wrong groups.
    pub resample: bool,
    /// Scale advantages by the difficulty weight.
    pub reweight: bool,
    pub kl_mode: KlMode,
    pub optimizer: OptimizerKind,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            group_size: 8,
            clip_eps: 0.2,
            beta: 0.01,
            eps_std: 1e-6,
            max_resample_rounds: 4,
            lr: 1.0,
            seed: 0,
            resample: true,
            reweight: true,
            kl_mode: KlMode::Estimator,
            optimizer: OptimizerKind::GradientAscent,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(config("group size must be at least 2"));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(config("clip epsilon must lie in (0, 1)"));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(config("KL weight must be finite and >= 0"));
        }
        if !(self.eps_std >= 0.0) || !self.lr.is_finite() || self.lr < 0.0 {
            return Err(config("std floor and learning rate must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Summary of one optimisation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub objective: f64,
    pub grad_norm: f64,
    pub mean_reward: f64,
    pub resample_fraction: f64,
    pub mean_weight: f64,
    /// Fraction of correct responses in each question's final group, in batch order.
    pub correct_rates: Vec<f64>,
}

/// Trainable policy, frozen reference and optimiser state.
#[derive(Debug, Clone)]
pub struct GrpoTrainer {
    pub theta: PolicyParams,
    pub theta_ref: PolicyParams,
    optimizer: Optimizer,
}

impl GrpoTrainer {
    /// The reference policy is frozen at the initial parameters.
    pub fn new(theta: PolicyParams, kind: OptimizerKind) -> Self {
        let optimizer = Optimizer::new(kind, theta.logits().len());
        GrpoTrainer {
            theta_ref: theta.clone(),
            theta,
            optimizer,
        }
    }

    /// One ascent step on batches sampled from the current parameters.
    ///
    /// The behaviour policy is the parameter snapshot the batches were sampled from, i.e. the
    /// current `theta` (one inner epoch per sampled group).
    pub fn step(&mut self, batches: &[GroupBatch], cfg: &GrpoConfig) -> Result<StepReport> {
        let theta_old = self.theta.clone();
        let out = objective(batches, &self.theta, &theta_old, &self.theta_ref, cfg)?;
        if let Some(i) = out.grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "gradient entry {i} is {} (objective {})",
                out.grad[i], out.value
            )));
        }
        let grad_norm = out.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        self.optimizer
            .apply(self.theta.logits_mut(), &out.grad, cfg.lr);
        Ok(report(batches, out.value, grad_norm))
    }
}

pub(crate) fn report(batches: &[GroupBatch], objective: f64, grad_norm: f64) -> StepReport {
    let n = batches.len().max(1) as f64;
    StepReport {
        objective,
        grad_norm,
        mean_reward: batches.iter().map(GroupBatch::mean_reward).sum::<f64>() / n,
        resample_fraction: batches.iter().filter(|b| b.resample_rounds > 0).count() as f64 / n,
        mean_weight: batches.iter().map(|b| b.weight).sum::<f64>() / n,
        correct_rates: batches.iter().map(GroupBatch::correct_rate).collect(),
    }
}
