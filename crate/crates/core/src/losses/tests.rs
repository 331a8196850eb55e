use super::*;
use crate::numerics::{check_gradients, log_softmax, sample_categorical, MlpParams, Rng};
use crate::optim::{Adam, AdamConfig};
use crate::policy::{sequence_logprob, FeatureSpec, PolicyParams, Trajectory};

fn spec() -> FeatureSpec {
    FeatureSpec {
        vocab: 4,
        prompt_len: 2,
        horizon: 3,
    }
}

fn random_policy(rng: &mut Rng) -> PolicyParams {
    let mut p = PolicyParams::new(spec(), 5, (0.0, 0.0), 0.0, rng);
    p.net = MlpParams::random(spec().input_dim(), 5, 4, rng);
    p
}

fn with_net(p: &PolicyParams, flat: &[f64]) -> PolicyParams {
    let mut q = p.clone();
    q.net.assign_flat(flat);
    q
}

fn net_flat(p: &PolicyParams) -> Vec<f64> {
    let mut v = Vec::new();
    p.net.flatten_into(&mut v);
    v
}

fn flat_grad(g: &MlpParams) -> Vec<f64> {
    let mut v = Vec::new();
    g.flatten_into(&mut v);
    v
}

fn random_trajectories(p: &PolicyParams, rng: &mut Rng, n: usize) -> Vec<Trajectory> {
    (0..n)
        .map(|i| {
            let prompt = vec![rng.below(4), rng.below(4)];
            let tokens: Vec<usize> = (0..3).map(|_| rng.below(4)).collect();
            let lp = sequence_logprob(p, &prompt, &tokens).unwrap().per_step;
            Trajectory {
                prompt_id: i,
                prompt_tokens: prompt,
                ref_logprobs: lp.iter().map(|v| v + rng.uniform_range(-0.5, 0.5)).collect(),
                logprobs: lp,
                rewards: vec![0.0; 3],
                total_reward: 0.0,
                advantage: 0.0,
                group_id: i,
                tokens,
            }
        })
        .collect()
}

#[test]
fn sft_uniform_policy_is_log_vocab() {
    let mut rng = Rng::new(0);
    let p = PolicyParams::new(spec(), 5, (0.0, 0.0), 0.0, &mut rng);
    let batch = [SftItem {
        prompt: &[1, 2],
        tokens: &[0, 3, 1],
    }];
    let (loss, _) = sft_loss(&p, &batch).unwrap();
    assert!((loss - 4f64.ln()).abs() < 1e-12);
    assert!((loss - 1.386_29).abs() < 1e-5);
}

#[test]
fn sft_fitted_policy_is_near_zero() {
    let mut rng = Rng::new(1);
    let mut p = PolicyParams::new(spec(), 5, (0.0, 0.0), 0.0, &mut rng);
    p.net.b2 = vec![0.0, 0.0, 50.0, 0.0];
    let batch = [SftItem {
        prompt: &[1, 2],
        tokens: &[2, 2, 2],
    }];
    let (loss, grad) = sft_loss(&p, &batch).unwrap();
    assert!(loss < 1e-20);
    assert!(flat_grad(&grad).iter().all(|g| g.abs() < 1e-20));
}

#[test]
fn sft_empty_batch_is_config_error() {
    let mut rng = Rng::new(1);
    let p = random_policy(&mut rng);
    assert!(matches!(sft_loss(&p, &[]), Err(crate::Error::Config(_))));
}

#[test]
fn sft_gradient_matches_finite_differences() {
    let mut rng = Rng::new(2);
    for _ in 0..20 {
        let p = random_policy(&mut rng);
        let prompts: Vec<Vec<usize>> = (0..3).map(|_| vec![rng.below(4), rng.below(4)]).collect();
        let tokens: Vec<Vec<usize>> = (0..3).map(|_| (0..3).map(|_| rng.below(4)).collect()).collect();
        let batch: Vec<SftItem> = prompts
            .iter()
            .zip(&tokens)
            .map(|(p, t)| SftItem { prompt: p, tokens: t })
            .collect();
        let f = |theta: &[f64]| {
            let (l, g) = sft_loss(&with_net(&p, theta), &batch)?;
            Ok((l, flat_grad(&g)))
        };
        let err = check_gradients(f, &net_flat(&p), 1e-5).unwrap();
        assert!(err < 1e-5, "{err}");
    }
}

#[test]
fn grpo_hand_example() {
    let adv = grpo_advantages(&[1.0, 0.0, 0.0, 0.0, 1.0]);
    // mean 0.4, std sqrt(0.24)
    let std = 0.24f64.sqrt();
    let expected = [0.6 / std, -0.4 / std, -0.4 / std, -0.4 / std, 0.6 / std];
    for (a, e) in adv.iter().zip(expected) {
        assert!((a - e).abs() < 1e-12);
    }
    assert!((adv[0] - 1.2247).abs() < 1e-4);
    assert!((adv[1] + 0.8165).abs() < 1e-4);
}

#[test]
fn grpo_degenerate_groups() {
    assert_eq!(grpo_advantages(&[0.0; 5]), vec![0.0; 5]);
    assert_eq!(grpo_advantages(&[0.7]), vec![0.0]);
    assert!(grpo_advantages(&[]).is_empty());
    // mean of three 0.1s is not exactly 0.1
    assert_eq!(grpo_advantages(&[0.1; 3]), vec![0.0; 3]);
}

#[test]
fn clip_formula_cases() {
    assert_eq!(clipped_surrogate(1.5, 1.0, 0.2).0, 1.2);
    assert_eq!(clipped_surrogate(1.5, 1.0, 0.2).1, 0.0);
    assert!((clipped_surrogate(0.5, -1.0, 0.2).0 + 0.8).abs() < 1e-15);
    assert_eq!(clipped_surrogate(1.0, 0.3, 0.2), (0.3, 0.3));
}

#[test]
fn fresh_policy_surrogate_is_mean_advantage() {
    let mut rng = Rng::new(3);
    let p = random_policy(&mut rng);
    let trajs = random_trajectories(&p, &mut rng, 4);
    let old: Vec<Vec<f64>> = trajs.iter().map(|t| t.logprobs.clone()).collect();
    let adv: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64 - 1.5; 3]).collect();
    let (loss, _) = ppo_objective(&p, &trajs, &old, &adv, &HybridConfig::default()).unwrap();
    let mean_adv = adv.iter().flatten().sum::<f64>() / 12.0;
    assert_eq!(loss.surrogate, mean_adv);
}

#[test]
fn ppo_gradient_matches_finite_differences() {
    let mut rng = Rng::new(4);
    let cfg = HybridConfig {
        ent_coef: 0.05,
        kl_coef: 0.1,
        ..HybridConfig::default()
    };
    for _ in 0..20 {
        let p = random_policy(&mut rng);
        let trajs = random_trajectories(&p, &mut rng, 4);
        // behaviour log-probs off-policy so ratios land on both sides of the clip range
        let old: Vec<Vec<f64>> = trajs
            .iter()
            .map(|t| t.logprobs.iter().map(|v| v + rng.uniform_range(-0.6, 0.6)).collect())
            .collect();
        let adv: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.uniform_range(-2.0, 2.0)).collect()).collect();
        let f = |theta: &[f64]| {
            let (l, g) = ppo_objective(&with_net(&p, theta), &trajs, &old, &adv, &cfg)?;
            Ok((l.loss, flat_grad(&g)))
        };
        let err = check_gradients(f, &net_flat(&p), 1e-5).unwrap();
        assert!(err < 1e-5, "{err}");
    }
}

#[test]
fn ppo_non_finite_ratio_names_the_step() {
    let mut rng = Rng::new(5);
    let p = random_policy(&mut rng);
    let trajs = random_trajectories(&p, &mut rng, 2);
    let mut old: Vec<Vec<f64>> = trajs.iter().map(|t| t.logprobs.clone()).collect();
    old[1][2] = -1e6;
    let adv = vec![vec![1.0; 3]; 2];
    let err = ppo_objective(&p, &trajs, &old, &adv, &HybridConfig::default()).unwrap_err();
    assert!(err.to_string().contains("trajectory 1, step 2"), "{err}");
}

#[test]
fn value_loss_gradient_matches_finite_differences() {
    let mut rng = Rng::new(6);
    for _ in 0..20 {
        let mut p = random_policy(&mut rng);
        p.value_net = MlpParams::random(spec().input_dim(), 5, 1, &mut rng);
        let trajs = random_trajectories(&p, &mut rng, 3);
        let targets: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.uniform()).collect()).collect();
        let mut flat = Vec::new();
        p.value_net.flatten_into(&mut flat);
        let f = |theta: &[f64]| {
            let mut q = p.clone();
            q.value_net.assign_flat(theta);
            let (l, g) = value_loss(&q, &trajs, &targets)?;
            Ok((l, flat_grad(&g)))
        };
        let err = check_gradients(f, &flat, 1e-5).unwrap();
        assert!(err < 1e-5, "{err}");
    }
}

#[test]
fn k3_cases() {
    assert_eq!(kl_estimate_k3(-1.3, -1.3), 0.0);
    let r: f64 = 2.0;
    let v = kl_estimate_k3(0.0, r.ln());
    assert!((v - (1.0 - 2f64.ln())).abs() < 1e-15);
    assert!((v - 0.30685).abs() < 1e-5);
}

#[test]
fn k3_monte_carlo_matches_exact_kl() {
    let cur = log_softmax(&[0.5, -0.3, 1.2, 0.0, -1.0]);
    let reference = log_softmax(&[0.0, 0.4, 0.3, -0.5, 0.2]);
    let exact: f64 = cur.iter().zip(&reference).map(|(c, r)| c.exp() * (c - r)).sum();
    let mut rng = Rng::new(7);
    let n = 100_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let i = sample_categorical(&cur, &mut rng);
        let v = kl_estimate_k3(cur[i], reference[i]);
        assert!(v >= 0.0);
        sum += v;
    }
    let mean = sum / n as f64;
    assert!(((mean - exact) / exact).abs() < 0.02, "{mean} vs {exact}");
}

#[test]
#[allow(clippy::approx_constant)]
fn log_sigma_values() {
    let t = hybrid_log_sigma(1.7, 0.4, 0.0, 0.0);
    assert_eq!(t.l_total, 1.7 + 0.4);
    let t = hybrid_log_sigma(2.0, 1.0, 1.0, 0.0);
    assert!((t.l_total - (2.0 * (-2.0f64).exp() + 2.0)).abs() < 1e-15);
    assert!((t.l_total - 2.27067).abs() < 1e-5);
    let star = 0.5 * 4f64.ln();
    assert!((star - 0.69315).abs() < 1e-5);
    assert!(hybrid_log_sigma(2.0, 1.0, star, 0.0).d_sigma_pg.abs() < 1e-15);
}

#[test]
fn log_sigma_derivatives_match_finite_differences() {
    let mut rng = Rng::new(8);
    for _ in 0..20 {
        let la = rng.uniform_range(-1.0, 3.0);
        let ls = rng.uniform_range(0.0, 3.0);
        let s = [rng.uniform_range(-1.5, 1.5), rng.uniform_range(-1.5, 1.5)];
        let f = |x: &[f64]| {
            let t = hybrid_log_sigma(la, ls, x[0], x[1]);
            Ok((t.l_total, vec![t.d_sigma_pg, t.d_sigma_sft]))
        };
        assert!(check_gradients(f, &s, 1e-5).unwrap() < 1e-8);
    }
}

#[test]
fn theta_values_and_derivative() {
    let t = hybrid_theta(3.0, 1.0, 0.0);
    assert_eq!((t.w_pg, t.w_sft), (0.5, 0.5));
    assert!((hybrid_theta(3.0, 1.0, 1.0).w_pg - 0.73106).abs() < 1e-5);
    let far = hybrid_theta(3.0, 1.0, 800.0);
    assert_eq!(far.l_total, 3.0);
    let mut rng = Rng::new(9);
    for _ in 0..20 {
        let (la, ls) = (rng.uniform_range(-1.0, 2.0), rng.uniform_range(0.0, 2.0));
        let a = rng.uniform_range(-3.0, 3.0);
        let t = hybrid_theta(la, ls, a);
        assert!((t.w_pg + t.w_sft - 1.0).abs() < 1e-15);
        let f = |x: &[f64]| {
            let t = hybrid_theta(la, ls, x[0]);
            Ok((t.l_total, vec![t.d_alpha]))
        };
        assert!(check_gradients(f, &[a], 1e-5).unwrap() < 1e-8);
    }
}

#[test]
fn weighted_sft_value() {
    let (v, w, _) = weighted_sft(1.0, 0.5);
    assert!((v - ((-1.0f64).exp() + 0.5)).abs() < 1e-15);
    assert!((v - 0.86788).abs() < 1e-5);
    assert_eq!(weighted_sft(2.5, 0.0).0, 2.5);
    assert_eq!(w, (-1.0f64).exp());
}

#[test]
fn per_step_update_moves_net_and_sigma_sft_only() {
    let mut rng = Rng::new(10);
    let p0 = random_policy(&mut rng);
    let batch = [SftItem {
        prompt: &[0, 1],
        tokens: &[3, 2, 1],
    }];
    let mut p = p0.clone();
    let mut opt = Adam::new(p.num_params(), 1e-2, AdamConfig::default());
    let out = per_step_sft_update(&mut p, &batch, &mut opt).unwrap();
    assert_eq!(out.w_sft, 1.0);
    assert_ne!(p.net, p0.net);
    assert_eq!(p.value_net, p0.value_net);
    assert_eq!(p.sigma_pg, p0.sigma_pg);
    assert_ne!(p.sigma_sft, p0.sigma_sft);

    // already-fitted demos barely move the network
    let mut fitted = p0.clone();
    fitted.net.w2 = crate::numerics::Matrix::zeros(4, 5);
    fitted.net.b2 = vec![0.0, 0.0, 0.0, 60.0];
    let batch = [SftItem {
        prompt: &[0, 1],
        tokens: &[3, 3, 3],
    }];
    let before = fitted.net.clone();
    let mut opt = Adam::new(fitted.num_params(), 1e-2, AdamConfig::default());
    per_step_sft_update(&mut fitted, &batch, &mut opt).unwrap();
    let moved = fitted
        .net
        .flatten_vec()
        .iter()
        .zip(before.flatten_vec())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(moved < 1e-12, "{moved}");
}

#[test]
fn expert_injection_cases() {
    let mut rng = Rng::new(11);
    let p = random_policy(&mut rng);
    let prompt = [1, 3];
    let tokens = [2, 0, 1];
    let lp = sequence_logprob(&p, &prompt, &tokens).unwrap().total;
    let one = [ExpertItem {
        prompt: &prompt,
        tokens: &tokens,
        reward: 1.0,
    }];
    assert_eq!(expert_injection(&p, &one, 0.0).unwrap().0, 0.0);
    assert_eq!(expert_injection(&p, &one, 1.0).unwrap().0, lp);
    let zero = [ExpertItem {
        prompt: &prompt,
        tokens: &tokens,
        reward: 0.0,
    }];
    let (obj, grad) = expert_injection(&p, &zero, 1.0).unwrap();
    assert_eq!(obj, 0.0);
    assert!(flat_grad(&grad).iter().all(|g| *g == 0.0));

    let f = |theta: &[f64]| {
        let (o, g) = expert_injection(&with_net(&p, theta), &one, 0.7)?;
        Ok((-o, flat_grad(&g)))
    };
    assert!(check_gradients(f, &net_flat(&p), 1e-5).unwrap() < 1e-5);
}

#[test]
fn config_validation() {
    assert!(HybridConfig::default().validate().is_ok());
    let bad = HybridConfig {
        clip_eps: 1.0,
        ..HybridConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = HybridConfig {
        kl_coef: -0.1,
        ..HybridConfig::default()
    };
    assert!(bad.validate().is_err());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn clipped_never_exceeds_unclipped(ratio in 0.0f64..4.0, adv in -5.0f64..5.0, eps in 0.01f64..0.99) {
            prop_assert!(clipped_surrogate(ratio, adv, eps).0 <= ratio * adv);
        }

        #[test]
        fn k3_is_non_negative(a in -30.0f64..0.0, b in -30.0f64..0.0) {
            prop_assert!(kl_estimate_k3(a, b) >= 0.0);
        }

        #[test]
        fn grpo_standardises(rewards in proptest::collection::vec(0.0f64..1.0, 2..16)) {
            let adv = grpo_advantages(&rewards);
            let n = adv.len() as f64;
            let mean = adv.iter().sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-12);
            let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!((std - 1.0).abs() < 1e-9 || adv.iter().all(|a| *a == 0.0));
        }

        #[test]
        fn grpo_constant_groups_are_zero(r in -10.0f64..10.0, n in 2usize..17) {
            prop_assert!(grpo_advantages(&vec![r; n]).iter().all(|a| *a == 0.0));
        }

        #[test]
        fn log_sigma_weights_positive(s1 in -20.0f64..20.0, s2 in -20.0f64..20.0) {
            let t = hybrid_log_sigma(1.0, 1.0, s1, s2);
            prop_assert!(t.w_pg > 0.0 && t.w_sft > 0.0);
        }
    }
}
