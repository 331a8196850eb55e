//! Autoregressive categorical policy with a value head.
//!
//! The state at step `t` is featurized as
//! `one-hot(prompt tokens) ⊕ one-hot(t) ⊕ one-hot(previous token or BOS)`
//! and fed to two MLPs: the policy network (|V| logits) and the value
//! network (one output). The first layers share their initial weights.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use serde::{Deserialize, Serialize};

use crate::envs::{Env, TaskInstance};
use crate::error::{Error, Result};
use crate::numerics::{log_softmax, mlp_forward, sample_categorical, MlpCache, MlpParams, Rng};

/// Dimensions of the state featurization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub vocab: usize,
    pub prompt_len: usize,
    /// Response length; also the size of the position one-hot.
    pub horizon: usize,
}

impl FeatureSpec {
    pub fn input_dim(&self) -> usize {
        self.prompt_len * self.vocab + self.horizon + self.vocab + 1
    }

    pub fn encode(&self, prompt: &[usize], step: usize, prev: Option<usize>) -> Vec<f64> {
        let mut x = vec![0.0; self.input_dim()];
        for (i, &tok) in prompt.iter().take(self.prompt_len).enumerate() {
            x[i * self.vocab + tok] = 1.0;
        }
        let pos_off = self.prompt_len * self.vocab;
        x[pos_off + step.min(self.horizon - 1)] = 1.0;
        let prev_off = pos_off + self.horizon;
        x[prev_off + prev.unwrap_or(self.vocab)] = 1.0;
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub features: FeatureSpec,
    pub net: MlpParams,
    pub value_net: MlpParams,
    /// Log-deviation scaling the policy-gradient loss.
    pub sigma_pg: f64,
    /// Log-deviation scaling the supervised loss.
    pub sigma_sft: f64,
    /// Mixing logit of the convex-combination fusion.
    pub alpha: f64,
}

impl PolicyParams {
    /// Fresh policy: uniform over tokens, zero value estimate, and the value
    /// network's hidden layer identical to the policy's.
    pub fn new(features: FeatureSpec, hidden: usize, sigma_init: (f64, f64), alpha: f64, rng: &mut Rng) -> Self {
        let net = MlpParams::init(features.input_dim(), hidden, features.vocab, rng);
        let mut value_net = MlpParams::zeros(features.input_dim(), hidden, 1);
        value_net.w1 = net.w1.clone();
        value_net.b1 = net.b1.clone();
        Self {
            features,
            net,
            value_net,
            sigma_pg: sigma_init.0,
            sigma_sft: sigma_init.1,
            alpha,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            features: self.features,
            net: self.net.zeros_like(),
            value_net: self.value_net.zeros_like(),
            sigma_pg: 0.0,
            sigma_sft: 0.0,
            alpha: 0.0,
        }
    }

    pub fn num_params(&self) -> usize {
        self.net.num_params() + self.value_net.num_params() + 3
    }

    /// Order: net, value_net, sigma_pg, sigma_sft, alpha.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.net.flatten_into(&mut out);
        self.value_net.flatten_into(&mut out);
        out.extend([self.sigma_pg, self.sigma_sft, self.alpha]);
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut off = self.net.assign_flat(flat);
        off += self.value_net.assign_flat(&flat[off..]);
        self.sigma_pg = flat[off];
        self.sigma_sft = flat[off + 1];
        self.alpha = flat[off + 2];
    }

    pub fn is_finite(&self) -> bool {
        self.net.is_finite()
            && self.value_net.is_finite()
            && self.sigma_pg.is_finite()
            && self.sigma_sft.is_finite()
            && self.alpha.is_finite()
    }

    pub fn step_eval(&self, prompt: &[usize], step: usize, prev: Option<usize>) -> Result<StepEval> {
        let x = self.features.encode(prompt, step, prev);
        let (logits, cache) = mlp_forward(&self.net, &x)?;
        Ok(StepEval {
            log_probs: log_softmax(&logits),
            cache,
        })
    }

    pub fn value_forward(&self, prompt: &[usize], step: usize, prev: Option<usize>) -> Result<(f64, MlpCache)> {
        let x = self.features.encode(prompt, step, prev);
        let (out, cache) = mlp_forward(&self.value_net, &x)?;
        Ok((out[0], cache))
    }
}

/// Log-probabilities at one decoding step plus the forward cache.
#[derive(Debug, Clone)]
pub struct StepEval {
    pub log_probs: Vec<f64>,
    pub cache: MlpCache,
}

#[derive(Debug, Clone)]
pub struct SequenceEval {
    pub total: f64,
    pub per_step: Vec<f64>,
    pub steps: Vec<StepEval>,
}

/// `log π(tokens | prompt)` under teacher forcing.
pub fn sequence_logprob(params: &PolicyParams, prompt: &[usize], tokens: &[usize]) -> Result<SequenceEval> {
    let vocab = params.features.vocab;
    let mut steps = Vec::with_capacity(tokens.len());
    let mut per_step = Vec::with_capacity(tokens.len());
    let mut prev = None;
    for (t, &tok) in tokens.iter().enumerate() {
        if tok >= vocab {
            return Err(Error::Domain { token: tok, vocab });
        }
        let ev = params.step_eval(prompt, t, prev)?;
        per_step.push(ev.log_probs[tok]);
        steps.push(ev);
        prev = Some(tok);
    }
    Ok(SequenceEval {
        total: per_step.iter().sum(),
        per_step,
        steps,
    })
}

pub fn value_estimate(params: &PolicyParams, prompt: &[usize], step: usize, prev: Option<usize>) -> Result<f64> {
    Ok(params.value_forward(prompt, step, prev)?.0)
}

/// Frozen copy of the policy network.
#[derive(Debug, Clone)]
pub struct ReferencePolicy {
    features: FeatureSpec,
    net: MlpParams,
}

impl ReferencePolicy {
    pub fn log_probs(&self, prompt: &[usize], step: usize, prev: Option<usize>) -> Result<Vec<f64>> {
        let x = self.features.encode(prompt, step, prev);
        Ok(log_softmax(&mlp_forward(&self.net, &x)?.0))
    }

    pub fn sequence_logprobs(&self, prompt: &[usize], tokens: &[usize]) -> Result<Vec<f64>> {
        let mut prev = None;
        let mut out = Vec::with_capacity(tokens.len());
        for (t, &tok) in tokens.iter().enumerate() {
            out.push(self.log_probs(prompt, t, prev)?[tok]);
            prev = Some(tok);
        }
        Ok(out)
    }
}

pub fn snapshot_reference(params: &PolicyParams) -> ReferencePolicy {
    ReferencePolicy {
        features: params.features,
        net: params.net.clone(),
    }
}

/// One sampled response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub prompt_id: usize,
    pub prompt_tokens: Vec<usize>,
    pub tokens: Vec<usize>,
    /// Behaviour log-probabilities recorded at sampling time (nats).
    pub logprobs: Vec<f64>,
    pub ref_logprobs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub total_reward: f64,
    pub advantage: f64,
    pub group_id: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Reward-to-go at every step (undiscounted).
    pub fn returns(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = vec![0.0; self.rewards.len()];
        for t in (0..self.rewards.len()).rev() {
            acc += self.rewards[t];
            out[t] = acc;
        }
        out
    }
}

/// Samples one response of `horizon` tokens at temperature 1.
pub fn sample_response(
    params: &PolicyParams,
    reference: &ReferencePolicy,
    prompt: &[usize],
    rng: &mut Rng,
) -> Result<(Vec<usize>, Vec<f64>, Vec<f64>)> {
    let horizon = params.features.horizon;
    let mut tokens = Vec::with_capacity(horizon);
    let mut logprobs = Vec::with_capacity(horizon);
    let mut ref_logprobs = Vec::with_capacity(horizon);
    let mut prev = None;
    for t in 0..horizon {
        let ev = params.step_eval(prompt, t, prev)?;
        let tok = sample_categorical(&ev.log_probs, rng);
        logprobs.push(ev.log_probs[tok]);
        ref_logprobs.push(reference.log_probs(prompt, t, prev)?[tok]);
        tokens.push(tok);
        prev = Some(tok);
    }
    Ok((tokens, logprobs, ref_logprobs))
}

/// `g` responses for one prompt; member `i` draws from `rng.split(i)`.
pub fn sample_group(
    params: &PolicyParams,
    reference: &ReferencePolicy,
    env: &Env,
    instance: &TaskInstance,
    g: usize,
    group_id: usize,
    rng: &Rng,
) -> Result<Vec<Trajectory>> {
    (0..g)
        .map(|i| {
            let mut stream = rng.split(i as u64);
            let (tokens, logprobs, ref_logprobs) =
                sample_response(params, reference, &instance.prompt_tokens, &mut stream)?;
            let rewards = env.step_rewards(&tokens, instance);
            Ok(Trajectory {
                prompt_id: instance.prompt_id,
                prompt_tokens: instance.prompt_tokens.clone(),
                total_reward: rewards.iter().sum(),
                rewards,
                tokens,
                logprobs,
                ref_logprobs,
                advantage: 0.0,
                group_id,
            })
        })
        .collect()
}

/// Argmax decoding.
pub fn greedy_decode(params: &PolicyParams, prompt: &[usize]) -> Result<Vec<usize>> {
    let mut tokens = Vec::with_capacity(params.features.horizon);
    let mut prev = None;
    for t in 0..params.features.horizon {
        let ev = params.step_eval(prompt, t, prev)?;
        let tok = ev
            .log_probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &lp)| if lp > best.1 { (i, lp) } else { best })
            .0;
        tokens.push(tok);
        prev = Some(tok);
    }
    Ok(tokens)
}
