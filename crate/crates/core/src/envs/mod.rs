//! Synthetic sequence tasks with controllable reward density.
//!
//! Every prompt is a string of `answer_len` tokens. A hidden key of per-position
//! permutations maps the prompt to an oracle trace: optional reasoning tokens
//! followed by the answer, `answer[i] = key[i](prompt[i])`. `DenseChain` pays
//! `1/T` for every position that agrees with the oracle trace; `SparseLock`
//! pays 1 only when the canonicalized final answer matches exactly.

mod canon;
mod io;

pub use canon::Canonicalizer;
pub use io::{load_instances, save_instances, DatasetRecord};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::numerics::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvKind {
    DenseChain,
    SparseLock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub vocab_size: usize,
    pub answer_len: usize,
    /// Reasoning tokens emitted before the answer in the oracle trace.
    pub reasoning_len: usize,
    /// Number of distinct prompt ids; at most `vocab_size^answer_len`.
    pub prompt_space: usize,
    /// Fraction of training prompts that come with an expert demonstration.
    pub demo_fraction: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Held-out prompts (disjoint from train and test) for transfer evaluation.
    pub n_transfer: usize,
    pub strip_leading_zeros: bool,
    pub equivalences: Vec<(usize, usize)>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            kind: EnvKind::SparseLock,
            vocab_size: 8,
            answer_len: 4,
            reasoning_len: 0,
            prompt_space: 4096,
            demo_fraction: 0.5,
            n_train: 1024,
            n_test: 256,
            n_transfer: 0,
            strip_leading_zeros: true,
            equivalences: Vec::new(),
        }
    }
}

impl EnvConfig {
    pub fn sparse() -> Self {
        Self::default()
    }

    pub fn dense() -> Self {
        Self {
            kind: EnvKind::DenseChain,
            ..Self::default()
        }
    }

    pub fn trace_len(&self) -> usize {
        self.reasoning_len + self.answer_len
    }

    pub fn prompt_len(&self) -> usize {
        self.answer_len
    }

    /// `vocab_size^answer_len`, saturating.
    pub fn max_prompt_space(&self) -> usize {
        (0..self.answer_len).fold(1usize, |acc, _| acc.saturating_mul(self.vocab_size))
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return config_err(format!("vocab_size must be >= 2, got {}", self.vocab_size));
        }
        if self.answer_len < 1 {
            return config_err("answer_len must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.demo_fraction) {
            return config_err(format!("demo_fraction must lie in [0, 1], got {}", self.demo_fraction));
        }
        if self.prompt_space > self.max_prompt_space() {
            return config_err(format!(
                "prompt_space {} exceeds the {} distinct prompts of length {} over {} tokens",
                self.prompt_space,
                self.max_prompt_space(),
                self.answer_len,
                self.vocab_size
            ));
        }
        Canonicalizer::new(self.vocab_size, self.strip_leading_zeros, &self.equivalences)?;
        Ok(())
    }

    pub fn canonicalizer(&self) -> Result<Canonicalizer> {
        Canonicalizer::new(self.vocab_size, self.strip_leading_zeros, &self.equivalences)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub prompt_id: usize,
    pub prompt_tokens: Vec<usize>,
    pub gold_answer: Vec<usize>,
    pub oracle_trace: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DemoSet {
    pub entries: Vec<(usize, Vec<usize>)>,
}

impl DemoSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reward evaluation for one environment family.
#[derive(Debug, Clone)]
pub struct Env {
    pub config: EnvConfig,
    canon: Canonicalizer,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let canon = config.canonicalizer()?;
        Ok(Self { config, canon })
    }

    pub fn canonicalize(&self, tokens: &[usize]) -> Vec<usize> {
        self.canon.canonicalize(tokens)
    }

    /// Final `answer_len` tokens, or the whole response when it is shorter.
    pub fn extract<'a>(&self, response: &'a [usize]) -> &'a [usize] {
        let n = self.config.answer_len;
        if response.len() >= n {
            &response[response.len() - n..]
        } else {
            response
        }
    }

    /// Binary exact-match reward on the canonicalized extracted answer.
    pub fn sparse_reward(&self, response: &[usize], instance: &TaskInstance) -> f64 {
        let got = self.canonicalize(self.extract(response));
        let want = self.canonicalize(&instance.gold_answer);
        if got == want {
            1.0
        } else {
            0.0
        }
    }

    /// `1/T` at every position where the response agrees with the oracle trace.
    pub fn dense_reward(&self, response: &[usize], instance: &TaskInstance) -> Vec<f64> {
        let t_len = instance.oracle_trace.len() as f64;
        response
            .iter()
            .enumerate()
            .map(|(t, &tok)| match instance.oracle_trace.get(t) {
                Some(&want) if want == tok => 1.0 / t_len,
                _ => 0.0,
            })
            .collect()
    }

    /// Per-step reward vector for this env's kind. Sparse reward lands on the
    /// final step.
    pub fn step_rewards(&self, response: &[usize], instance: &TaskInstance) -> Vec<f64> {
        match self.config.kind {
            EnvKind::DenseChain => self.dense_reward(response, instance),
            EnvKind::SparseLock => {
                let mut r = vec![0.0; response.len()];
                if let Some(last) = r.last_mut() {
                    *last = self.sparse_reward(response, instance);
                }
                r
            }
        }
    }

    pub fn total_reward(&self, response: &[usize], instance: &TaskInstance) -> f64 {
        self.step_rewards(response, instance).iter().sum()
    }
}

/// Everything generated from one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<TaskInstance>,
    pub test: Vec<TaskInstance>,
    pub transfer: Vec<TaskInstance>,
    pub demos: DemoSet,
}

impl Dataset {
    pub fn generate(config: &EnvConfig, rng: &mut Rng) -> Result<Self> {
        make_dataset(config, config.n_train, config.n_test, rng)
    }

    pub fn require_demos(&self) -> Result<()> {
        if self.demos.is_empty() {
            return config_err(
                "hybrid and supervised regimes need demonstrations, but demo_fraction * n_train rounds to 0",
            );
        }
        Ok(())
    }

    pub fn train_instance(&self, prompt_id: usize) -> Option<&TaskInstance> {
        self.train.iter().find(|t| t.prompt_id == prompt_id)
    }
}

/// Hidden per-position permutations that define the oracle.
#[derive(Debug, Clone)]
struct TaskKey {
    perms: Vec<Vec<usize>>,
}

impl TaskKey {
    fn sample(config: &EnvConfig, rng: &mut Rng) -> Self {
        let perms = (0..config.trace_len())
            .map(|_| {
                let mut p: Vec<usize> = (0..config.vocab_size).collect();
                rng.shuffle(&mut p);
                p
            })
            .collect();
        Self { perms }
    }

    fn trace(&self, config: &EnvConfig, prompt: &[usize]) -> Vec<usize> {
        (0..config.trace_len())
            .map(|t| {
                let slot = if t < config.reasoning_len {
                    t % prompt.len()
                } else {
                    t - config.reasoning_len
                };
                self.perms[t][prompt[slot]]
            })
            .collect()
    }
}

fn prompt_tokens(config: &EnvConfig, mut id: usize) -> Vec<usize> {
    let mut digits = vec![0; config.prompt_len()];
    for d in digits.iter_mut().rev() {
        *d = id % config.vocab_size;
        id /= config.vocab_size;
    }
    digits
}

/// Draws disjoint train / test / transfer prompt sets and the demonstrations
/// for the first `⌈ρ·n_train⌉` training prompts. Every demonstration is
/// scored by the env before it is kept.
pub fn make_dataset(config: &EnvConfig, n_train: usize, n_test: usize, rng: &mut Rng) -> Result<Dataset> {
    config.validate()?;
    if n_train == 0 || n_test == 0 {
        return config_err("n_train and n_test must both be >= 1");
    }
    let needed = n_train + n_test + config.n_transfer;
    if needed > config.prompt_space {
        return config_err(format!(
            "{needed} prompts requested but prompt_space is {}",
            config.prompt_space
        ));
    }
    let key = TaskKey::sample(config, &mut rng.split(0));

    // partial Fisher-Yates over the prompt space, without materialising it
    let mut order_rng = rng.split(1);
    let mut swapped = std::collections::HashMap::new();
    let mut ids = Vec::with_capacity(needed);
    for i in 0..needed {
        let j = i + order_rng.below(config.prompt_space - i);
        let vi = *swapped.get(&i).unwrap_or(&i);
        let vj = *swapped.get(&j).unwrap_or(&j);
        swapped.insert(j, vi);
        ids.push(vj);
    }

    let build = |id: usize| {
        let prompt = prompt_tokens(config, id);
        let trace = key.trace(config, &prompt);
        TaskInstance {
            prompt_id: id,
            gold_answer: trace[config.reasoning_len..].to_vec(),
            oracle_trace: trace,
            prompt_tokens: prompt,
        }
    };
    let train: Vec<_> = ids[..n_train].iter().map(|&id| build(id)).collect();
    let test: Vec<_> = ids[n_train..n_train + n_test].iter().map(|&id| build(id)).collect();
    let transfer: Vec<_> = ids[n_train + n_test..].iter().map(|&id| build(id)).collect();

    let env = Env::new(config.clone())?;
    let n_demo = (config.demo_fraction * n_train as f64).ceil() as usize;
    let mut demos = DemoSet::default();
    for inst in train.iter().take(n_demo.min(n_train)) {
        let expert = inst.oracle_trace.clone();
        if env.total_reward(&expert, inst) >= 1.0 - 1e-12 {
            demos.entries.push((inst.prompt_id, expert));
        }
    }
    Ok(Dataset {
        train,
        test,
        transfer,
        demos,
    })
}
