use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;

/// Compares an analytic gradient with central differences.
///
/// `loss_fn` maps a flat parameter vector to `(loss, analytic_gradient)`.
/// Returns `max_i |analytic_i - numeric_i| / max(1, |analytic_i|)`.
pub fn check_gradients<F>(loss_fn: F, params: &[f64], eps: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (base, analytic) = loss_fn(params)?;
    if !base.is_finite() {
        return Err(Error::Numeric(format!("loss is {base} at the check point")));
    }
    if analytic.len() != params.len() {
        return Err(Error::Shape(format!(
            "gradient has {} entries for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    let mut theta = params.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        theta[i] = params[i] + eps;
        let (plus, _) = loss_fn(&theta)?;
        theta[i] = params[i] - eps;
        let (minus, _) = loss_fn(&theta)?;
        theta[i] = params[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!("loss non-finite when perturbing parameter {i}")));
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{log_softmax, softmax, Rng};

    #[test]
    fn quadratic_loss() {
        let mut rng = Rng::new(0);
        let theta: Vec<f64> = (0..10).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
        let f = |t: &[f64]| Ok((0.5 * t.iter().map(|v| v * v).sum::<f64>(), t.to_vec()));
        assert!(check_gradients(f, &theta, 1e-5).unwrap() < 1e-8);
    }

    #[test]
    fn constant_loss() {
        let f = |t: &[f64]| Ok((3.0, vec![0.0; t.len()]));
        assert_eq!(check_gradients(f, &[1.0, 2.0], 1e-5).unwrap(), 0.0);
    }

    #[test]
    fn softmax_cross_entropy() {
        let mut rng = Rng::new(1);
        for _ in 0..20 {
            let z: Vec<f64> = (0..6).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
            let target = rng.below(6);
            let f = |t: &[f64]| {
                let lp = log_softmax(t);
                let mut g = softmax(t);
                g[target] -= 1.0;
                Ok((-lp[target], g))
            };
            assert!(check_gradients(f, &z, 1e-5).unwrap() < 1e-6);
        }
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let f = |_: &[f64]| Ok((f64::NAN, vec![0.0]));
        assert!(matches!(check_gradients(f, &[0.0], 1e-5), Err(Error::Numeric(_))));
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let f = |t: &[f64]| Ok((t[0] * t[0], vec![t[0]]));
        assert!(check_gradients(f, &[3.0], 1e-5).unwrap() > 0.4);
    }
}
