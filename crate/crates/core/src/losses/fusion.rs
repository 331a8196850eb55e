use super::actor::{sft_loss, SftItem};
use crate::error::Result;
use crate::numerics::{mlp_backward, MlpParams};
use crate::optim::Adam;
use crate::policy::{sequence_logprob, PolicyParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSigmaTerms {
    pub l_total: f64,
    pub d_sigma_pg: f64,
    pub d_sigma_sft: f64,
    pub w_pg: f64,
    pub w_sft: f64,
}

/// Uncertainty-weighted sum
/// `e^{-2σ_pg}·L_actor + e^{-2σ_sft}·L_sft + σ_pg + σ_sft`
/// with its partial derivatives in both σ.
pub fn hybrid_log_sigma(l_actor: f64, l_sft: f64, sigma_pg: f64, sigma_sft: f64) -> LogSigmaTerms {
    let w_pg = (-2.0 * sigma_pg).exp();
    let w_sft = (-2.0 * sigma_sft).exp();
    LogSigmaTerms {
        l_total: w_pg * l_actor + w_sft * l_sft + sigma_pg + sigma_sft,
        d_sigma_pg: -2.0 * w_pg * l_actor + 1.0,
        d_sigma_sft: -2.0 * w_sft * l_sft + 1.0,
        w_pg,
        w_sft,
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaTerms {
    pub l_total: f64,
    pub w_pg: f64,
    pub w_sft: f64,
    pub d_alpha: f64,
}

/// Convex combination with `w_pg = sigmoid(α)`.
pub fn hybrid_theta(l_actor: f64, l_sft: f64, alpha: f64) -> ThetaTerms {
    let w_pg = sigmoid(alpha);
    let w_sft = 1.0 - w_pg;
    ThetaTerms {
        l_total: w_pg * l_actor + w_sft * l_sft,
        w_pg,
        w_sft,
        d_alpha: w_pg * w_sft * (l_actor - l_sft),
    }
}

/// `(e^{-2σ}·L + σ, e^{-2σ}, ∂/∂σ)`.
pub fn weighted_sft(l_sft: f64, sigma_sft: f64) -> (f64, f64, f64) {
    let w = (-2.0 * sigma_sft).exp();
    (w * l_sft + sigma_sft, w, -2.0 * w * l_sft + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerStepOutcome {
    pub l_sft: f64,
    pub weighted: f64,
    pub w_sft: f64,
}

/// The second of the two per-batch steps of the sequential variant: one
/// optimizer step on `e^{-2σ_sft}·L_sft + σ_sft` over the policy network and
/// `σ_sft` only.
pub fn per_step_sft_update(params: &mut PolicyParams, batch: &[SftItem<'_>], opt: &mut Adam) -> Result<PerStepOutcome> {
    let (l_sft, g_sft) = sft_loss(params, batch)?;
    let (weighted, w_sft, d_sigma) = weighted_sft(l_sft, params.sigma_sft);
    let mut grad = params.zeros_like();
    grad.net.add_scaled(w_sft, &g_sft);
    grad.sigma_sft = d_sigma;
    let mut flat = params.flatten();
    opt.step(&mut flat, &grad.flatten());
    params.assign_flat(&flat);
    Ok(PerStepOutcome {
        l_sft,
        weighted,
        w_sft,
    })
}

/// An expert trace injected as if it were a rollout, with its env reward.
#[derive(Debug, Clone, Copy)]
pub struct ExpertItem<'a> {
    pub prompt: &'a [usize],
    pub tokens: &'a [usize],
    pub reward: f64,
}

/// Injected term of the mixed objective: `λ · mean_e[r_e · log π(y_e|x_e)]`.
///
/// Returns the objective value and the gradient of its *negation* (the
/// quantity added to the loss) with respect to the policy network.
pub fn expert_injection(params: &PolicyParams, experts: &[ExpertItem<'_>], lambda: f64) -> Result<(f64, MlpParams)> {
    let mut grad = params.net.zeros_like();
    if experts.is_empty() || lambda == 0.0 {
        return Ok((0.0, grad));
    }
    let scale = lambda / experts.len() as f64;
    let mut objective = 0.0;
    let vocab = params.features.vocab;
    let mut g_logits = vec![0.0; vocab];
    for e in experts {
        if e.reward == 0.0 {
            continue;
        }
        let ev = sequence_logprob(params, e.prompt, e.tokens)?;
        objective += scale * e.reward * ev.total;
        for (step, &tok) in ev.steps.iter().zip(e.tokens) {
            for (j, g) in g_logits.iter_mut().enumerate() {
                let onehot = if j == tok { 1.0 } else { 0.0 };
                *g = -scale * e.reward * (onehot - step.log_probs[j].exp());
            }
            mlp_backward(&params.net, &step.cache, &g_logits, &mut grad)?;
        }
    }
    Ok((objective, grad))
}
