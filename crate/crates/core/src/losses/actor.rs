use super::HybridConfig;
use crate::error::{config_err, Error, Result};
use crate::numerics::{entropy, mlp_backward, MlpParams};
use crate::policy::{PolicyParams, Trajectory};

/// Group-normalised advantages `(r - mean) / std` with population std.
/// Constant and singleton groups map to all zeros.
pub fn grpo_advantages(rewards: &[f64]) -> Vec<f64> {
    let n = rewards.len();
    if n < 2 || rewards.iter().all(|&r| r == rewards[0]) {
        return vec![0.0; n];
    }
    let mean = rewards.iter().sum::<f64>() / n as f64;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if std == 0.0 {
        return vec![0.0; n];
    }
    rewards.iter().map(|r| (r - mean) / std).collect()
}

/// Low-variance KL estimate `(ρ - 1) - ln ρ` with `ρ = π_ref/π_θ` at the
/// sampled token. Non-negative; unbiased for `KL(π_θ ‖ π_ref)` under π_θ.
pub fn kl_estimate_k3(logp_cur: f64, logp_ref: f64) -> f64 {
    let log_ratio = logp_ref - logp_cur;
    // expm1 keeps precision when the policies nearly agree
    log_ratio.exp_m1() - log_ratio
}

/// `min(r·A, clip(r, 1-ε, 1+ε)·A)` and its derivative in `r`.
pub fn clipped_surrogate(ratio: f64, adv: f64, eps: f64) -> (f64, f64) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    if unclipped <= clipped {
        (unclipped, adv)
    } else {
        let inside = (1.0 - eps..=1.0 + eps).contains(&ratio);
        (clipped, if inside { adv } else { 0.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActorLoss {
    /// `-(surrogate + β_ent·entropy) + kl_coef·kl`.
    pub loss: f64,
    pub surrogate: f64,
    pub entropy: f64,
    pub kl: f64,
}

/// Token-averaged clipped surrogate with entropy bonus and k3 penalty.
///
/// `old_logprobs[i][t]` is the behaviour log-probability of token `t` of
/// trajectory `i`; `advantages[i][t]` its advantage. Returns the loss and its
/// exact gradient with respect to the policy network.
pub fn ppo_objective(
    params: &PolicyParams,
    trajectories: &[Trajectory],
    old_logprobs: &[Vec<f64>],
    advantages: &[Vec<f64>],
    config: &HybridConfig,
) -> Result<(ActorLoss, MlpParams)> {
    let mut grad = params.net.zeros_like();
    let n_tokens: usize = trajectories.iter().map(|t| t.len()).sum();
    if n_tokens == 0 {
        return Ok((ActorLoss::default(), grad));
    }
    let norm = 1.0 / n_tokens as f64;
    let (mut surr_sum, mut ent_sum, mut kl_sum) = (0.0, 0.0, 0.0);
    let vocab = params.features.vocab;
    let mut g_logits = vec![0.0; vocab];

    for (i, traj) in trajectories.iter().enumerate() {
        let mut prev = None;
        for (t, &tok) in traj.tokens.iter().enumerate() {
            let ev = params.step_eval(&traj.prompt_tokens, t, prev)?;
            let lp = &ev.log_probs;
            let ratio = (lp[tok] - old_logprobs[i][t]).exp();
            if !ratio.is_finite() {
                return Err(Error::Numeric(format!(
                    "probability ratio {ratio} at trajectory {i}, step {t}"
                )));
            }
            let adv = advantages[i][t];
            let (surr, d_surr_d_ratio) = clipped_surrogate(ratio, adv, config.clip_eps);
            let h = entropy(lp);
            let kl = kl_estimate_k3(lp[tok], traj.ref_logprobs[t]);
            surr_sum += surr;
            ent_sum += h;
            kl_sum += kl;

            // d loss / d logp(tok): surrogate via r = exp(logp - old), k3 via log ρ = ref - logp
            let d_lp = -d_surr_d_ratio * ratio + config.kl_coef * (1.0 - (traj.ref_logprobs[t] - lp[tok]).exp());
            for (j, g) in g_logits.iter_mut().enumerate() {
                let p = lp[j].exp();
                let onehot = if j == tok { 1.0 } else { 0.0 };
                // dH/dz_j = -p_j (log p_j + H); loss carries -β_ent·H
                let d_ent = config.ent_coef * p * (lp[j] + h);
                *g = norm * (d_lp * (onehot - p) + d_ent);
            }
            mlp_backward(&params.net, &ev.cache, &g_logits, &mut grad)?;
            prev = Some(tok);
        }
    }
    let surrogate = surr_sum * norm;
    let ent = ent_sum * norm;
    let kl = kl_sum * norm;
    Ok((
        ActorLoss {
            loss: -(surrogate + config.ent_coef * ent) + config.kl_coef * kl,
            surrogate,
            entropy: ent,
            kl,
        },
        grad,
    ))
}

/// Mean over steps of `½(V(s_t) - target_t)²` and its gradient with respect
/// to the value network.
pub fn value_loss(params: &PolicyParams, trajectories: &[Trajectory], targets: &[Vec<f64>]) -> Result<(f64, MlpParams)> {
    let mut grad = params.value_net.zeros_like();
    let n_tokens: usize = trajectories.iter().map(|t| t.len()).sum();
    if n_tokens == 0 {
        return Ok((0.0, grad));
    }
    let norm = 1.0 / n_tokens as f64;
    let mut total = 0.0;
    for (traj, target) in trajectories.iter().zip(targets) {
        let mut prev = None;
        for (t, &tok) in traj.tokens.iter().enumerate() {
            let (v, cache) = params.value_forward(&traj.prompt_tokens, t, prev)?;
            let diff = v - target[t];
            total += 0.5 * diff * diff;
            mlp_backward(&params.value_net, &cache, &[norm * diff], &mut grad)?;
            prev = Some(tok);
        }
    }
    Ok((total * norm, grad))
}

/// A demonstration: prompt tokens and the expert response.
#[derive(Debug, Clone, Copy)]
pub struct SftItem<'a> {
    pub prompt: &'a [usize],
    pub tokens: &'a [usize],
}

/// Mean per-token negative log-likelihood of expert tokens.
pub fn sft_loss(params: &PolicyParams, batch: &[SftItem<'_>]) -> Result<(f64, MlpParams)> {
    let n_tokens: usize = batch.iter().map(|b| b.tokens.len()).sum();
    if n_tokens == 0 {
        return config_err("SFT batch is empty");
    }
    let norm = 1.0 / n_tokens as f64;
    let mut grad = params.net.zeros_like();
    let mut nll = 0.0;
    let vocab = params.features.vocab;
    let mut g_logits = vec![0.0; vocab];
    for item in batch {
        let mut prev = None;
        for (t, &tok) in item.tokens.iter().enumerate() {
            if tok >= vocab {
                return Err(Error::Domain { token: tok, vocab });
            }
            let ev = params.step_eval(item.prompt, t, prev)?;
            nll -= ev.log_probs[tok];
            for (j, g) in g_logits.iter_mut().enumerate() {
                let onehot = if j == tok { 1.0 } else { 0.0 };
                *g = norm * (ev.log_probs[j].exp() - onehot);
            }
            mlp_backward(&params.net, &ev.cache, &g_logits, &mut grad)?;
            prev = Some(tok);
        }
    }
    Ok((nll * norm, grad))
}
