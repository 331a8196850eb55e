use super::Rng;

/// Max-subtracted log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Shannon entropy in nats of a normalised log-probability vector.
pub fn entropy(log_probs: &[f64]) -> f64 {
    -log_probs
        .iter()
        .map(|&lp| if lp == f64::NEG_INFINITY { 0.0 } else { lp.exp() * lp })
        .sum::<f64>()
}

/// Inverse-CDF draw at temperature 1 with no truncation.
pub fn sample_categorical(log_probs: &[f64], rng: &mut Rng) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding slack above the cumulative sum
    log_probs
        .iter()
        .rposition(|lp| lp.is_finite())
        .unwrap_or(log_probs.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        for lp in log_softmax(&[0.0; 4]) {
            assert!((lp - (0.25f64).ln()).abs() < 1e-15);
            assert!((lp + 1.386_29).abs() < 1e-5);
        }
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let lp = log_softmax(&[1000.0, 0.0]);
        assert!(lp[0].abs() < 1e-12);
        assert!((lp[1] + 1000.0).abs() < 1e-9);
    }

    #[test]
    fn proportional_to_exponentials() {
        let lp = log_softmax(&[1.0, 2.0, 3.0]);
        let z: f64 = [1.0f64, 2.0, 3.0].iter().map(|v| v.exp()).sum();
        for (i, v) in [1.0f64, 2.0, 3.0].iter().enumerate() {
            assert!((lp[i].exp() - v.exp() / z).abs() < 1e-15);
        }
        assert!(((lp[1] - lp[0]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn entropy_of_uniform_and_point_mass() {
        assert!((entropy(&log_softmax(&[0.0; 8])) - 8f64.ln()).abs() < 1e-14);
        assert_eq!(entropy(&[0.0, f64::NEG_INFINITY]), 0.0);
    }

    #[test]
    fn one_hot_always_sampled() {
        let lp = [f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY];
        let mut rng = Rng::new(11);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&lp, &mut rng), 2);
        }
    }

    #[test]
    fn uniform_frequencies_within_three_sigma() {
        let lp = log_softmax(&[0.0; 4]);
        let mut rng = Rng::new(2024);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[sample_categorical(&lp, &mut rng)] += 1;
        }
        // binomial sd of the frequency: sqrt(p(1-p)/n)
        let sd = (0.25 * 0.75 / n as f64).sqrt();
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 0.25).abs() < 3.0 * sd, "frequency {f}");
        }
    }

    #[test]
    fn fixed_seed_reproduces_samples() {
        let lp = log_softmax(&[0.3, -0.2, 1.0, 0.0, 0.5]);
        let draw = |seed| {
            let mut rng = Rng::new(seed);
            (0..200).map(|_| sample_categorical(&lp, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }
}
