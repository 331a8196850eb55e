//! Reward-density probe and actor selection.
//!
//! A short run of pure RL steps records the mean batch reward per step. Two
//! statistics are derived: how often that mean strictly increased between
//! consecutive steps, and the mean over the last `m` steps. The environment
//! counts as sparse, and the hybrid actor is chosen, only when *both* fall
//! below their thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchConfig {
    /// Probe length in RL steps.
    pub k: usize,
    /// Window for the recent average.
    pub m: usize,
    pub increase_threshold: usize,
    pub avg_threshold: f64,
    /// Experimental: re-run the decision every this many steps over the most
    /// recent `k` step rewards. Off by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reprobe_interval: Option<usize>,
}

impl SwitchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return config_err("switch probe length k must be >= 1");
        }
        if self.m == 0 || self.m > self.k {
            return config_err(format!("switch window m must satisfy 1 <= m <= k, got m={} k={}", self.m, self.k));
        }
        if self.avg_threshold.is_nan() || self.avg_threshold < 0.0 {
            return config_err("avg_threshold must be >= 0");
        }
        if self.reprobe_interval == Some(0) {
            return config_err("reprobe_interval must be >= 1 when set");
        }
        Ok(())
    }
}

/// Thresholds tuned per batch-size regime: batches larger than 32 use a short
/// 10-step probe, smaller ones a longer 50-step probe with stricter bars.
pub fn default_config(batch_size: usize) -> SwitchConfig {
    if batch_size > 32 {
        SwitchConfig {
            k: 10,
            m: 10,
            increase_threshold: 3,
            avg_threshold: 0.1,
            reprobe_interval: None,
        }
    } else {
        SwitchConfig {
            k: 50,
            m: 10,
            increase_threshold: 20,
            avg_threshold: 0.2,
            reprobe_interval: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeStats {
    pub avg_rewards: Vec<f64>,
    pub increase_num: usize,
    pub recent_avg_reward: f64,
}

pub fn probe_statistics(avg_rewards: &[f64], m: usize) -> Result<ProbeStats> {
    if m == 0 || avg_rewards.len() < m {
        return config_err(format!(
            "probe needs at least m={m} step rewards (and m >= 1), got {}",
            avg_rewards.len()
        ));
    }
    let increase_num = avg_rewards.windows(2).filter(|w| w[1] > w[0]).count();
    let recent = &avg_rewards[avg_rewards.len() - m..];
    Ok(ProbeStats {
        avg_rewards: avg_rewards.to_vec(),
        increase_num,
        recent_avg_reward: recent.iter().sum::<f64>() / m as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Actor {
    VanillaRL,
    HybridActor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorChoice {
    pub choice: Actor,
    pub stats: ProbeStats,
    pub config: SwitchConfig,
}

pub fn decide_actor(stats: &ProbeStats, config: &SwitchConfig) -> ActorChoice {
    let sparse = stats.increase_num < config.increase_threshold && stats.recent_avg_reward < config.avg_threshold;
    ActorChoice {
        choice: if sparse { Actor::HybridActor } else { Actor::VanillaRL },
        stats: stats.clone(),
        config: config.clone(),
    }
}

/// Anything that can take one pure-RL step and report its mean batch reward.
pub trait RlStepper {
    fn rl_step(&mut self) -> Result<f64>;
}

/// Runs `k` RL steps on `trainer` and decides the actor.
pub fn run_probe<T: RlStepper + ?Sized>(trainer: &mut T, config: &SwitchConfig) -> Result<(ProbeStats, ActorChoice)> {
    config.validate()?;
    let mut rewards = Vec::with_capacity(config.k);
    for _ in 0..config.k {
        rewards.push(trainer.rl_step()?);
    }
    let stats = probe_statistics(&rewards, config.m)?;
    let choice = decide_actor(&stats, config);
    Ok((stats, choice))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub increase: usize,
    pub avg: f64,
}

/// JSON document emitted by the probe command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub avg_rewards: Vec<f64>,
    pub increase_num: usize,
    pub recent_avg_reward: f64,
    pub thresholds: Thresholds,
    pub choice: Actor,
}

impl From<&ActorChoice> for ProbeReport {
    fn from(c: &ActorChoice) -> Self {
        Self {
            avg_rewards: c.stats.avg_rewards.clone(),
            increase_num: c.stats.increase_num,
            recent_avg_reward: c.stats.recent_avg_reward,
            thresholds: Thresholds {
                increase: c.config.increase_threshold,
                avg: c.config.avg_threshold,
            },
            choice: c.choice,
        }
    }
}
