use serde::{Deserialize, Serialize};

use super::{Matrix, Rng};
use crate::error::{Error, Result};

/// Two-layer perceptron `logits = W2 · tanh(W1 · x + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

/// Activations recorded by [`mlp_forward`]; enough for exact backprop.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub input: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            w1: Matrix::zeros(hidden, input),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(output, hidden),
            b2: vec![0.0; output],
        }
    }

    /// Glorot-uniform hidden layer and a zero output layer, so a freshly
    /// initialised network emits all-zero logits.
    pub fn init(input: usize, hidden: usize, output: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(input, hidden, output);
        let a = (6.0 / (input + hidden) as f64).sqrt();
        for w in p.w1.data_mut() {
            *w = rng.uniform_range(-a, a);
        }
        p
    }

    /// Glorot-uniform weights on both layers, small random biases.
    pub fn random(input: usize, hidden: usize, output: usize, rng: &mut Rng) -> Self {
        let mut p = Self::init(input, hidden, output, rng);
        let a = (6.0 / (hidden + output) as f64).sqrt();
        for w in p.w2.data_mut() {
            *w = rng.uniform_range(-a, a);
        }
        for b in p.b1.iter_mut().chain(p.b2.iter_mut()) {
            *b = rng.uniform_range(-0.1, 0.1);
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.rows()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden_dim(), self.output_dim())
    }

    pub fn num_params(&self) -> usize {
        self.w1.data().len() + self.b1.len() + self.w2.data().len() + self.b2.len()
    }

    /// Parameters in a fixed order: W1, b1, W2, b2.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w1.data());
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(self.w2.data());
        out.extend_from_slice(&self.b2);
    }

    pub fn flatten_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.flatten_into(&mut out);
        out
    }

    /// Inverse of [`flatten_into`](Self::flatten_into); returns the number of
    /// values consumed.
    pub fn assign_flat(&mut self, flat: &[f64]) -> usize {
        let mut off = 0;
        for dst in [
            self.w1.data_mut(),
            &mut self.b1[..],
            self.w2.data_mut(),
            &mut self.b2[..],
        ] {
            dst.copy_from_slice(&flat[off..off + dst.len()]);
            off += dst.len();
        }
        off
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, scale: f64, other: &Self) {
        let pairs: [(&mut [f64], &[f64]); 4] = [
            (self.w1.data_mut(), other.w1.data()),
            (&mut self.b1, &other.b1),
            (self.w2.data_mut(), other.w2.data()),
            (&mut self.b2, &other.b2),
        ];
        for (dst, src) in pairs {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite()
            && self.w2.is_finite()
            && self.b1.iter().chain(&self.b2).all(|v| v.is_finite())
    }
}

pub fn mlp_forward(params: &MlpParams, input: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
    if input.len() != params.input_dim() {
        return Err(Error::Shape(format!(
            "mlp input length {} but W1 has {} columns",
            input.len(),
            params.input_dim()
        )));
    }
    let mut hidden = params.w1.matvec_sparse(input);
    for (h, b) in hidden.iter_mut().zip(&params.b1) {
        *h = (*h + b).tanh();
    }
    let mut logits = params.w2.matvec(&hidden)?;
    for (l, b) in logits.iter_mut().zip(&params.b2) {
        *l += b;
    }
    Ok((
        logits,
        MlpCache {
            input: input.to_vec(),
            hidden,
        },
    ))
}

/// Accumulates `∂(logits · grad_logits)/∂params` into `grad`.
pub fn mlp_backward(
    params: &MlpParams,
    cache: &MlpCache,
    grad_logits: &[f64],
    grad: &mut MlpParams,
) -> Result<()> {
    if grad_logits.len() != params.output_dim()
        || cache.hidden.len() != params.hidden_dim()
        || cache.input.len() != params.input_dim()
    {
        return Err(Error::Shape(format!(
            "mlp_backward: cache ({} in, {} hidden) / grad ({}) do not match params {}-{}-{}",
            cache.input.len(),
            cache.hidden.len(),
            grad_logits.len(),
            params.input_dim(),
            params.hidden_dim(),
            params.output_dim()
        )));
    }
    grad.w2.add_outer(1.0, grad_logits, &cache.hidden);
    for (b, g) in grad.b2.iter_mut().zip(grad_logits) {
        *b += g;
    }
    let mut d_pre = params.w2.matvec_t(grad_logits)?;
    for (d, h) in d_pre.iter_mut().zip(&cache.hidden) {
        *d *= 1.0 - h * h;
    }
    grad.w1.add_outer(1.0, &d_pre, &cache.input);
    for (b, d) in grad.b1.iter_mut().zip(&d_pre) {
        *b += d;
    }
    Ok(())
}

impl Matrix {
    /// `self · x` for a pre-validated `x`, skipping zero inputs.
    fn matvec_sparse(&self, x: &[f64]) -> Vec<f64> {
        let active: Vec<usize> = (0..x.len()).filter(|&c| x[c] != 0.0).collect();
        (0..self.rows())
            .map(|r| {
                let row = self.row(r);
                active.iter().map(|&c| row[c] * x[c]).sum()
            })
            .collect()
    }
}
