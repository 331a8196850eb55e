//! Training objectives and the ways of fusing them.
//!
//! All losses are minimised. The policy-gradient objective maximised is
//! `J = surrogate + β_ent·H`, so the actor loss is `-J + kl_coef·KL`.

mod actor;
mod fusion;

pub use actor::{
    clipped_surrogate, grpo_advantages, kl_estimate_k3, ppo_objective, sft_loss, value_loss, ActorLoss, SftItem,
};
pub use fusion::{
    expert_injection, hybrid_log_sigma, hybrid_theta, per_step_sft_update, sigmoid, weighted_sft, ExpertItem,
    LogSigmaTerms, PerStepOutcome, ThetaTerms,
};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fusion {
    /// `e^{-2σ_pg}·L_actor + e^{-2σ_sft}·L_sft + σ_pg + σ_sft` with learnable σ.
    LogSigma,
    /// `sigmoid(α)·L_actor + (1 - sigmoid(α))·L_sft` with learnable α.
    Theta,
    /// Actor step, then a separate step on `e^{-2σ_sft}·L_sft + σ_sft`.
    PerStep,
    /// Expert traces injected into the rollout objective with weight `λ·r`.
    ExpertInject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridConfig {
    pub fusion: Fusion,
    /// Initial (σ_pg, σ_sft).
    pub sigma_init: (f64, f64),
    /// Initial mixing logit for [`Fusion::Theta`].
    pub alpha: f64,
    /// Expert weight for [`Fusion::ExpertInject`].
    pub lambda: f64,
    pub clip_eps: f64,
    pub ent_coef: f64,
    pub kl_coef: f64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            fusion: Fusion::LogSigma,
            sigma_init: (0.0, 0.0),
            alpha: 0.0,
            lambda: 1.0,
            clip_eps: 0.2,
            ent_coef: 0.01,
            kl_coef: 0.001,
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return config_err(format!("clip_eps must lie in (0, 1), got {}", self.clip_eps));
        }
        if self.kl_coef.is_nan() || self.kl_coef < 0.0 {
            return config_err(format!("kl_coef must be >= 0, got {}", self.kl_coef));
        }
        if !self.sigma_init.0.is_finite() || !self.sigma_init.1.is_finite() || !self.alpha.is_finite() {
            return config_err("sigma_init and alpha must be finite");
        }
        Ok(())
    }
}

/// Loss components of one update, as logged.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_actor: f64,
    pub l_sft: f64,
    pub l_kl: f64,
    pub l_value: f64,
    pub l_total: f64,
    pub w_pg: f64,
    pub w_sft: f64,
}

#[cfg(test)]
mod tests;
