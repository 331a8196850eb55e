//! Training regimes, evaluation and telemetry.
//!
//! Every run is a pure function of its [`TrainConfig`]: the dataset, the
//! initial parameters, each batch and each rollout draw from fixed child
//! streams of the config seed, so identical configs give identical logs.

mod log;
mod report;

pub use log::{CheckpointRecord, EvalRecord, Phase, Record, RunLog, StepRecord, SwitchRecord};
pub use report::{
    compare_kl, compare_regimes, compare_regimes_parallel, kl_stats, kl_stats_of, percent_delta, regime_label, smooth_ema, Comparison,
    ComparisonRow, KlComparison, KlStats,
};

use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::envs::{Dataset, Env, EnvConfig, TaskInstance};
use crate::error::{config_err, Error, Result};
use crate::losses::{
    expert_injection, grpo_advantages, hybrid_log_sigma, hybrid_theta, per_step_sft_update, ppo_objective,
    sft_loss, value_loss, ExpertItem, Fusion, HybridConfig, SftItem,
};
use crate::numerics::{MlpParams, Rng};
use crate::optim::{Adam, AdamConfig};
use crate::policy::{greedy_decode, sample_group, snapshot_reference, FeatureSpec, PolicyParams, ReferencePolicy, Trajectory};
use crate::switch::{decide_actor, default_config, probe_statistics, run_probe, Actor, ActorChoice, RlStepper, SwitchConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algo {
    #[serde(rename = "PPO")]
    Ppo,
    #[serde(rename = "GRPO")]
    Grpo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "RL")]
    Rl,
    #[serde(rename = "SFT")]
    Sft,
    #[serde(rename = "SFT_then_RL")]
    SftThenRl,
    Hybrid,
    #[serde(rename = "SuperRL")]
    SuperRl,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Rl => "RL",
            Regime::Sft => "SFT",
            Regime::SftThenRl => "SFT_then_RL",
            Regime::Hybrid => "Hybrid",
            Regime::SuperRl => "SuperRL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub env: EnvConfig,
    pub algo: Algo,
    pub regime: Regime,
    pub hybrid: HybridConfig,
    /// Prompts per RL step; demonstrations per supervised minibatch.
    pub batch_size: usize,
    /// Rollouts per prompt.
    pub group_size: usize,
    /// RL updates. The SFT regime trains for `sft_epochs` instead; the
    /// sequential regime runs `steps` RL updates after its SFT stage.
    pub steps: usize,
    pub eval_every: usize,
    /// Optimizer passes over each batch of rollouts.
    pub update_epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub hidden: usize,
    pub sft_epochs: usize,
    /// Probe settings for `SuperRL`; `None` picks by batch size.
    pub switch: Option<SwitchConfig>,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            algo: Algo::Grpo,
            regime: Regime::SuperRl,
            hybrid: HybridConfig::default(),
            batch_size: 32,
            group_size: 5,
            steps: 500,
            eval_every: 5,
            update_epochs: 1,
            lr: 1e-2,
            seed: 0,
            hidden: 32,
            sft_epochs: 25,
            switch: None,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn switch_config(&self) -> SwitchConfig {
        self.switch.clone().unwrap_or_else(|| default_config(self.batch_size))
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.hybrid.validate()?;
        let min_steps = usize::from(self.regime != Regime::SftThenRl);
        if self.steps < min_steps {
            return config_err("steps must be >= 1");
        }
        if self.group_size < 1 {
            return config_err("group_size must be >= 1");
        }
        if self.algo == Algo::Grpo && self.group_size < 2 {
            return config_err("GRPO needs group_size >= 2; singleton groups carry no advantage");
        }
        if self.batch_size < 1 || self.eval_every < 1 || self.hidden < 1 || self.update_epochs < 1 {
            return config_err("batch_size, eval_every, update_epochs and hidden must be >= 1");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return config_err(format!("lr must be finite and >= 0, got {}", self.lr));
        }
        if matches!(self.regime, Regime::Sft | Regime::SftThenRl) && self.sft_epochs < 1 {
            return config_err("sft_epochs must be >= 1");
        }
        if self.regime == Regime::SuperRl {
            let sw = self.switch_config();
            sw.validate()?;
            if sw.k > self.steps {
                return config_err(format!("probe length {} exceeds the {}-step budget", sw.k, self.steps));
            }
        }
        Ok(())
    }

    pub fn features(&self) -> FeatureSpec {
        FeatureSpec {
            vocab: self.env.vocab_size,
            prompt_len: self.env.prompt_len(),
            horizon: self.env.trace_len(),
        }
    }
}

// child-stream ids of the config seed
const STREAM_DATA: u64 = 0;
const STREAM_INIT: u64 = 1;
const STREAM_STEPS: u64 = 2;
const STREAM_DEMOS: u64 = 3;
const STREAM_EPOCHS: u64 = 4;
const STREAM_ROLLOUT: u64 = 1 << 32;

/// EMA decay used for the smoothed EM in summaries.
pub const SUMMARY_EMA_DECAY: f64 = 0.9;

pub fn generate_dataset(config: &TrainConfig) -> Result<Dataset> {
    Dataset::generate(&config.env, &mut Rng::new(config.seed).split(STREAM_DATA))
}

/// Greedy exact-match accuracy: the fraction of instances whose argmax
/// decode earns sparse reward 1.
pub fn evaluate(params: &PolicyParams, env: &Env, instances: &[TaskInstance]) -> Result<f64> {
    if instances.is_empty() {
        return config_err("evaluation set is empty");
    }
    let mut hits = 0usize;
    for inst in instances {
        let out = greedy_decode(params, &inst.prompt_tokens)?;
        if env.sparse_reward(&out, inst) == 1.0 {
            hits += 1;
        }
    }
    Ok(hits as f64 / instances.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub log: RunLog,
    /// Test EM of the returned parameters.
    pub final_em: f64,
    pub transfer_em: Option<f64>,
    /// Probe decision (SuperRL only).
    pub choice: Option<ActorChoice>,
}

/// Runs the configured regime on the dataset generated from its seed.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let data = generate_dataset(config)?;
    train_on(config, &data)
}

/// Runs the configured regime on a given dataset.
pub fn train_on(config: &TrainConfig, data: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    let mut t = Trainer::new(config, data)?;
    match config.regime {
        Regime::Rl => {
            t.eval()?;
            t.run_actor(Actor::VanillaRL, config.steps)?;
        }
        Regime::Hybrid => {
            data.require_demos()?;
            t.eval()?;
            t.run_actor(Actor::HybridActor, config.steps)?;
        }
        Regime::Sft => {
            data.require_demos()?;
            t.sft_stage()?;
        }
        Regime::SftThenRl => {
            data.require_demos()?;
            t.sft_stage()?;
            t.restart_rl();
            t.run_actor(Actor::VanillaRL, config.steps)?;
        }
        Regime::SuperRl => {
            data.require_demos()?;
            t.eval()?;
            t.super_rl()?;
        }
    }
    t.finish()
}

/// Sequential baseline: supervised epochs, best checkpoint by eval EM, then
/// RL from that checkpoint.
pub fn train_sft_then_rl(config: &TrainConfig) -> Result<TrainOutcome> {
    train(&TrainConfig {
        regime: Regime::SftThenRl,
        ..config.clone()
    })
}

/// Index of the highest score; ties go to the earliest.
pub fn best_epoch(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

struct DemoItem {
    prompt: Vec<usize>,
    tokens: Vec<usize>,
    reward: f64,
}

/// Endless shuffled pass over the demonstrations.
struct DemoCursor {
    order: Vec<usize>,
    pos: usize,
    rng: Rng,
}

impl DemoCursor {
    fn new(n: usize, rng: Rng) -> Self {
        Self {
            order: (0..n).collect(),
            pos: n,
            rng,
        }
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        (0..size)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.rng.shuffle(&mut self.order);
                    self.pos = 0;
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

type Rollouts = (Vec<Trajectory>, Vec<Vec<f64>>, Option<f64>, f64);

struct Trainer<'a> {
    cfg: &'a TrainConfig,
    data: &'a Dataset,
    env: Env,
    demos: Rc<Vec<DemoItem>>,
    params: PolicyParams,
    opt: Adam,
    sft_opt: Adam,
    reference: ReferencePolicy,
    step_rng: Rng,
    demo_cursor: DemoCursor,
    log: RunLog,
    /// Updates performed so far.
    step: usize,
    last_eval: Option<usize>,
    choice: Option<ActorChoice>,
}

impl<'a> Trainer<'a> {
    fn new(cfg: &'a TrainConfig, data: &'a Dataset) -> Result<Self> {
        let env = Env::new(cfg.env.clone())?;
        let root = Rng::new(cfg.seed);
        let params = PolicyParams::new(
            cfg.features(),
            cfg.hidden,
            cfg.hybrid.sigma_init,
            cfg.hybrid.alpha,
            &mut root.split(STREAM_INIT),
        );
        let by_id: HashMap<usize, &TaskInstance> = data.train.iter().map(|t| (t.prompt_id, t)).collect();
        let mut demos = Vec::with_capacity(data.demos.len());
        for (id, tokens) in &data.demos.entries {
            let Some(inst) = by_id.get(id) else {
                return config_err(format!("demonstration for prompt {id} has no training instance"));
            };
            demos.push(DemoItem {
                prompt: inst.prompt_tokens.clone(),
                reward: env.total_reward(tokens, inst),
                tokens: tokens.clone(),
            });
        }
        let n = params.num_params();
        Ok(Self {
            reference: snapshot_reference(&params),
            opt: Adam::new(n, cfg.lr, cfg.adam),
            sft_opt: Adam::new(n, cfg.lr, cfg.adam),
            step_rng: root.split(STREAM_STEPS),
            demo_cursor: DemoCursor::new(demos.len(), root.split(STREAM_DEMOS)),
            cfg,
            data,
            env,
            demos: Rc::new(demos),
            params,
            log: RunLog::default(),
            step: 0,
            last_eval: None,
            choice: None,
        })
    }

    fn eval(&mut self) -> Result<f64> {
        let em = evaluate(&self.params, &self.env, &self.data.test)?;
        let transfer_em = if self.data.transfer.is_empty() {
            None
        } else {
            Some(evaluate(&self.params, &self.env, &self.data.transfer)?)
        };
        if self.last_eval != Some(self.step) {
            self.log.records.push(Record::Eval(EvalRecord {
                step: self.step,
                em_accuracy: em,
                transfer_em,
            }));
            self.last_eval = Some(self.step);
        }
        Ok(em)
    }

    fn apply(&mut self, grad: &PolicyParams, what: &str) -> Result<()> {
        let mut flat = self.params.flatten();
        self.opt.step(&mut flat, &grad.flatten());
        self.params.assign_flat(&flat);
        self.ensure_finite(what)
    }

    fn ensure_finite(&self, what: &str) -> Result<()> {
        if !self.params.is_finite() {
            return Err(Error::NonFinite {
                step: self.step,
                what: format!("parameters after {what} update"),
            });
        }
        Ok(())
    }

    fn check(&self, value: f64, what: &str) -> Result<f64> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                step: self.step,
                what: what.into(),
            });
        }
        Ok(value)
    }

    fn blank_record(&self, phase: Phase, l_total: f64) -> StepRecord {
        StepRecord {
            step: self.step,
            phase,
            mean_reward: None,
            kl_mean: None,
            l_actor: None,
            l_sft: None,
            l_value: None,
            l_total,
            w_pg: None,
            w_sft: None,
            sigma_pg: self.params.sigma_pg,
            sigma_sft: self.params.sigma_sft,
            alpha: self.params.alpha,
            adv_group_mean_max: None,
        }
    }

    fn finish_step(&mut self, mut record: StepRecord) -> Result<()> {
        self.step += 1;
        record.sigma_pg = self.params.sigma_pg;
        record.sigma_sft = self.params.sigma_sft;
        record.alpha = self.params.alpha;
        self.log.records.push(Record::Step(record));
        if self.step.is_multiple_of(self.cfg.eval_every) {
            self.eval()?;
        }
        Ok(())
    }

    // ---- supervised stage ----

    fn sft_stage(&mut self) -> Result<()> {
        let epochs_rng = Rng::new(self.cfg.seed).split(STREAM_EPOCHS);
        let mut ems = Vec::with_capacity(self.cfg.sft_epochs);
        let mut snapshots = Vec::with_capacity(self.cfg.sft_epochs);
        for epoch in 0..self.cfg.sft_epochs {
            let mut order: Vec<usize> = (0..self.demos.len()).collect();
            epochs_rng.split(epoch as u64).shuffle(&mut order);
            for chunk in order.chunks(self.cfg.batch_size) {
                let batch: Vec<SftItem<'_>> = chunk
                    .iter()
                    .map(|&i| SftItem {
                        prompt: &self.demos[i].prompt,
                        tokens: &self.demos[i].tokens,
                    })
                    .collect();
                let (l_sft, g) = sft_loss(&self.params, &batch)?;
                self.check(l_sft, "SFT loss")?;
                let mut grad = self.params.zeros_like();
                grad.net = g;
                self.apply(&grad, "SFT")?;
                let mut rec = self.blank_record(Phase::Sft, l_sft);
                rec.l_sft = Some(l_sft);
                self.log.records.push(Record::Step(rec));
                self.step += 1;
            }
            ems.push(self.eval()?);
            snapshots.push((self.step, self.params.clone()));
        }
        let epoch = best_epoch(&ems);
        let (step, params) = snapshots.swap_remove(epoch);
        self.params = params;
        self.log.records.push(Record::Checkpoint(CheckpointRecord {
            step,
            epoch,
            em_accuracy: ems[epoch],
        }));
        Ok(())
    }

    /// RL after a supervised stage starts from the selected checkpoint, with
    /// a fresh optimizer and that checkpoint as the KL reference.
    fn restart_rl(&mut self) {
        let n = self.params.num_params();
        self.opt = Adam::new(n, self.cfg.lr, self.cfg.adam);
        self.reference = snapshot_reference(&self.params);
    }

    // ---- rollouts ----

    /// Trajectories, per-token advantages, max |group mean| (GRPO) and mean reward.
    fn rollouts(&self) -> Result<Rollouts> {
        let cfg = self.cfg;
        let mut rng = self.step_rng.split(self.step as u64);
        let n_train = self.data.train.len();
        let mut trajs = Vec::with_capacity(cfg.batch_size * cfg.group_size);
        for b in 0..cfg.batch_size {
            let inst = &self.data.train[rng.below(n_train)];
            let stream = rng.split(STREAM_ROLLOUT + b as u64);
            trajs.extend(sample_group(
                &self.params,
                &self.reference,
                &self.env,
                inst,
                cfg.group_size,
                b,
                &stream,
            )?);
        }
        let mean_reward = trajs.iter().map(|t| t.total_reward).sum::<f64>() / trajs.len() as f64;

        let (advantages, adv_group_mean_max) = match cfg.algo {
            Algo::Grpo => {
                let mut worst: f64 = 0.0;
                for group in trajs.chunks_mut(cfg.group_size) {
                    let rewards: Vec<f64> = group.iter().map(|t| t.total_reward).collect();
                    let adv = grpo_advantages(&rewards);
                    worst = worst.max((adv.iter().sum::<f64>() / adv.len() as f64).abs());
                    for (t, a) in group.iter_mut().zip(adv) {
                        t.advantage = a;
                    }
                }
                let per_token = trajs.iter().map(|t| vec![t.advantage; t.len()]).collect();
                (per_token, Some(worst))
            }
            Algo::Ppo => {
                let mut per_token = Vec::with_capacity(trajs.len());
                for t in trajs.iter_mut() {
                    let returns = t.returns();
                    let mut prev = None;
                    let mut adv = Vec::with_capacity(t.len());
                    for (s, &tok) in t.tokens.iter().enumerate() {
                        let v = self.params.value_forward(&t.prompt_tokens, s, prev)?.0;
                        adv.push(returns[s] - v);
                        prev = Some(tok);
                    }
                    t.advantage = adv.first().copied().unwrap_or(0.0);
                    per_token.push(adv);
                }
                (per_token, None)
            }
        };
        Ok((trajs, advantages, adv_group_mean_max, mean_reward))
    }

    fn demo_batch(&mut self) -> Vec<usize> {
        self.demo_cursor.next_batch(self.cfg.batch_size)
    }

    /// One RL update with the given actor; returns the batch mean reward.
    fn rl_update(&mut self, actor: Actor, phase: Phase) -> Result<f64> {
        let step = self.step;
        self.rl_update_inner(actor, phase).map_err(|e| match e {
            Error::Numeric(what) => Error::NonFinite { step, what },
            e => e,
        })
    }

    fn rl_update_inner(&mut self, actor: Actor, phase: Phase) -> Result<f64> {
        let (trajs, advantages, adv_max, mean_reward) = self.rollouts()?;
        let old: Vec<Vec<f64>> = trajs.iter().map(|t| t.logprobs.clone()).collect();
        let demo_idx = match actor {
            Actor::HybridActor => self.demo_batch(),
            Actor::VanillaRL => Vec::new(),
        };
        let mut logged = None;
        for _ in 0..self.cfg.update_epochs {
            let (actor_loss, g_actor) = ppo_objective(&self.params, &trajs, &old, &advantages, &self.cfg.hybrid)?;
            let l_actor = self.check(actor_loss.loss, "actor loss")?;

            let mut grad = self.params.zeros_like();
            let mut l_value = None;
            if self.cfg.algo == Algo::Ppo {
                let targets: Vec<Vec<f64>> = trajs.iter().map(|t| t.returns()).collect();
                let (lv, gv) = value_loss(&self.params, &trajs, &targets)?;
                l_value = Some(self.check(lv, "value loss")?);
                grad.value_net = gv;
            }

            let mut rec = self.blank_record(phase, l_actor);
            rec.mean_reward = Some(mean_reward);
            rec.kl_mean = Some(actor_loss.kl);
            rec.l_actor = Some(l_actor);
            rec.l_value = l_value;
            rec.adv_group_mean_max = adv_max;

            match actor {
                Actor::VanillaRL => {
                    grad.net = g_actor;
                    self.apply(&grad, "actor")?;
                }
                Actor::HybridActor => self.hybrid_update(&mut grad, g_actor, l_actor, &demo_idx, &mut rec)?,
            }
            rec.l_total += l_value.unwrap_or(0.0);
            // the log keeps the on-policy (first-epoch) losses
            logged.get_or_insert(rec);
        }
        self.finish_step(logged.expect("update_epochs >= 1"))?;
        Ok(mean_reward)
    }

    fn hybrid_update(
        &mut self,
        grad: &mut PolicyParams,
        g_actor: MlpParams,
        l_actor: f64,
        idx: &[usize],
        rec: &mut StepRecord,
    ) -> Result<()> {
        let demos = Rc::clone(&self.demos);
        let fusion = self.cfg.hybrid.fusion;
        if fusion == Fusion::ExpertInject {
            let experts: Vec<ExpertItem<'_>> = idx
                .iter()
                .map(|&i| ExpertItem {
                    prompt: &demos[i].prompt,
                    tokens: &demos[i].tokens,
                    reward: demos[i].reward,
                })
                .collect();
            let (objective, g_inject) = expert_injection(&self.params, &experts, self.cfg.hybrid.lambda)?;
            let l_inject = self.check(-objective, "expert injection")?;
            grad.net = g_actor;
            grad.net.add_scaled(1.0, &g_inject);
            rec.l_sft = Some(l_inject);
            rec.l_total = l_actor + l_inject;
            rec.w_pg = Some(1.0);
            rec.w_sft = Some(self.cfg.hybrid.lambda);
            return self.apply(grad, "expert-injected actor");
        }

        let batch: Vec<SftItem<'_>> = idx
            .iter()
            .map(|&i| SftItem {
                prompt: &demos[i].prompt,
                tokens: &demos[i].tokens,
            })
            .collect();
        match fusion {
            Fusion::LogSigma => {
                let (l_sft, g_sft) = sft_loss(&self.params, &batch)?;
                self.check(l_sft, "SFT loss")?;
                let terms = hybrid_log_sigma(l_actor, l_sft, self.params.sigma_pg, self.params.sigma_sft);
                grad.net.add_scaled(terms.w_pg, &g_actor);
                grad.net.add_scaled(terms.w_sft, &g_sft);
                grad.sigma_pg = terms.d_sigma_pg;
                grad.sigma_sft = terms.d_sigma_sft;
                rec.l_sft = Some(l_sft);
                rec.l_total = self.check(terms.l_total, "hybrid loss")?;
                rec.w_pg = Some(terms.w_pg);
                rec.w_sft = Some(terms.w_sft);
                self.apply(grad, "hybrid")
            }
            Fusion::Theta => {
                let (l_sft, g_sft) = sft_loss(&self.params, &batch)?;
                self.check(l_sft, "SFT loss")?;
                let terms = hybrid_theta(l_actor, l_sft, self.params.alpha);
                grad.net.add_scaled(terms.w_pg, &g_actor);
                grad.net.add_scaled(terms.w_sft, &g_sft);
                grad.alpha = terms.d_alpha;
                rec.l_sft = Some(l_sft);
                rec.l_total = self.check(terms.l_total, "hybrid loss")?;
                rec.w_pg = Some(terms.w_pg);
                rec.w_sft = Some(terms.w_sft);
                self.apply(grad, "hybrid")
            }
            Fusion::PerStep => {
                grad.net = g_actor;
                self.apply(grad, "actor")?;
                let out = per_step_sft_update(&mut self.params, &batch, &mut self.sft_opt)?;
                self.check(out.l_sft, "SFT loss")?;
                self.ensure_finite("per-step SFT")?;
                rec.l_sft = Some(out.l_sft);
                rec.l_total = l_actor + out.weighted;
                rec.w_pg = Some(1.0);
                rec.w_sft = Some(out.w_sft);
                Ok(())
            }
            Fusion::ExpertInject => unreachable!("handled above"),
        }
    }

    fn run_actor(&mut self, actor: Actor, steps: usize) -> Result<()> {
        let phase = match actor {
            Actor::VanillaRL => Phase::Rl,
            Actor::HybridActor => Phase::Hybrid,
        };
        for _ in 0..steps {
            self.rl_update(actor, phase)?;
        }
        Ok(())
    }

    fn super_rl(&mut self) -> Result<ActorChoice> {
        let sw = self.cfg.switch_config();
        let (_, mut choice) = run_probe(&mut ProbeStepper(self), &sw)?;
        self.push_switch(&choice);
        let mut remaining = self.cfg.steps - sw.k;
        let mut since = 0;
        while remaining > 0 {
            let actor = choice.choice;
            self.run_actor(actor, 1)?;
            remaining -= 1;
            since += 1;
            if let Some(n) = sw.reprobe_interval {
                if since % n == 0 {
                    let rewards = self.log.reward_series();
                    let window = &rewards[rewards.len() - sw.k..];
                    choice = decide_actor(&probe_statistics(window, sw.m)?, &sw);
                    self.push_switch(&choice);
                }
            }
        }
        self.choice = Some(choice.clone());
        Ok(choice)
    }

    fn push_switch(&mut self, choice: &ActorChoice) {
        self.log.records.push(Record::Switch(SwitchRecord {
            step: self.step,
            choice: choice.choice,
            increase_num: choice.stats.increase_num,
            recent_avg_reward: choice.stats.recent_avg_reward,
        }));
    }

    fn finish(mut self) -> Result<TrainOutcome> {
        let final_em = evaluate(&self.params, &self.env, &self.data.test)?;
        let transfer_em = if self.data.transfer.is_empty() {
            None
        } else {
            Some(evaluate(&self.params, &self.env, &self.data.transfer)?)
        };
        if self.cfg.regime != Regime::Sft {
            self.eval()?;
        }
        Ok(TrainOutcome {
            params: self.params,
            log: self.log,
            final_em,
            transfer_em,
            choice: self.choice,
        })
    }
}

struct ProbeStepper<'t, 'a>(&'t mut Trainer<'a>);

impl RlStepper for ProbeStepper<'_, '_> {
    fn rl_step(&mut self) -> Result<f64> {
        self.0.rl_update(Actor::VanillaRL, Phase::Probe)
    }
}
