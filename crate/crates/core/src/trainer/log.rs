use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::switch::Actor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Sft,
    Probe,
    Rl,
    Hybrid,
}

/// One optimizer update. Optional columns are absent when the phase does not
/// compute them (no rollouts during SFT, no supervised term during pure RL).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_reward: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_actor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_sft: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_value: Option<f64>,
    pub l_total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_pg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_sft: Option<f64>,
    pub sigma_pg: f64,
    pub sigma_sft: f64,
    pub alpha: f64,
    /// Largest `|mean advantage|` over the groups of the batch (GRPO only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adv_group_mean_max: Option<f64>,
}

impl StepRecord {
    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        [
            self.mean_reward,
            self.kl_mean,
            self.l_actor,
            self.l_sft,
            self.l_value,
            Some(self.l_total),
            self.w_pg,
            self.w_sft,
            Some(self.sigma_pg),
            Some(self.sigma_sft),
            Some(self.alpha),
            self.adv_group_mean_max,
        ]
        .into_iter()
        .flatten()
    }
}

/// Greedy exact-match accuracy after `step` updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: usize,
    pub em_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer_em: Option<f64>,
}

/// Actor decision taken by the probe (or a re-probe) after `step` updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchRecord {
    pub step: usize,
    pub choice: Actor,
    pub increase_num: usize,
    pub recent_avg_reward: f64,
}

/// Supervised checkpoint kept at the end of the SFT stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub step: usize,
    pub epoch: usize,
    pub em_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Step(StepRecord),
    Eval(EvalRecord),
    Switch(SwitchRecord),
    Checkpoint(CheckpointRecord),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub records: Vec<Record>,
}

impl RunLog {
    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Step(s) => Some(s),
            _ => None,
        })
    }

    pub fn evals(&self) -> impl Iterator<Item = &EvalRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Eval(e) => Some(e),
            _ => None,
        })
    }

    pub fn switches(&self) -> impl Iterator<Item = &SwitchRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Switch(s) => Some(s),
            _ => None,
        })
    }

    /// Per-step mean KL to the reference, over steps that sampled rollouts.
    pub fn kl_series(&self) -> Vec<f64> {
        self.steps().filter_map(|s| s.kl_mean).collect()
    }

    pub fn reward_series(&self) -> Vec<f64> {
        self.steps().filter_map(|s| s.mean_reward).collect()
    }

    pub fn em_series(&self) -> Vec<f64> {
        self.evals().map(|e| e.em_accuracy).collect()
    }

    /// Step indices strictly increasing per record kind and every logged
    /// number finite.
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, idx: Vec<usize>| -> Result<()> {
            if idx.windows(2).any(|w| w[1] <= w[0]) {
                return config_err(format!("{name} record steps are not strictly increasing"));
            }
            Ok(())
        };
        check("step", self.steps().map(|s| s.step).collect())?;
        check("eval", self.evals().map(|e| e.step).collect())?;
        if self.steps().any(|s| s.values().any(|v| !v.is_finite()))
            || self
                .evals()
                .any(|e| !e.em_accuracy.is_finite() || e.transfer_em.is_some_and(|t| !t.is_finite()))
        {
            return config_err("run log contains a non-finite value");
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_jsonl()?.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let mut records = Vec::new();
        for line in BufReader::new(File::open(path)?).lines() {
            let line = line?;
            if !line.trim().is_empty() {
                records.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Self { records })
    }
}
