//! A small dense network with exact reverse-mode gradients and Adam.
//!
//! Parameters live in one flat vector. Layer `i` stores its weight matrix
//! (`dims[i+1] x dims[i]`, row-major) followed by its bias vector.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{rng_from_seed, SimRng};

#[cfg(test)]
mod tests;

#[derive(Debug, Error, PartialEq)]
pub enum ApproxError {
    #[error("expected input of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid network: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Linear,
    Softmax,
}

/// What to differentiate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Loss {
    /// `0.5 * weight * (y[index] - target)^2`.
    SelectedSquaredError { index: usize, target: f64, weight: f64 },
    /// `-advantage * ln pi[action] - entropy_coef * H(pi)`; softmax output only.
    PolicyGradient { action: usize, advantage: f64, entropy_coef: f64 },
    /// `0.5 * (y[0] - target)^2`.
    ValueRegression { target: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    dims: Vec<usize>,
    hidden: Activation,
    output: OutputActivation,
    params: Vec<f64>,
}

/// Per-layer activations kept for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    /// `acts[0]` is the input, `acts[L]` the network output.
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map_or(&[], Vec::as_slice)
    }
}

impl Mlp {
    /// Uniform He (relu) or Xavier (tanh, output layer) initialisation with
    /// zero biases.
    pub fn new(dims: &[usize], hidden: Activation, output: OutputActivation, seed: u64) -> Result<Self, ApproxError> {
        let mut net = Self::zeros(dims, hidden, output)?;
        let mut rng = rng_from_seed(seed);
        let n_layers = dims.len() - 1;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (dims[l] as f64, dims[l + 1] as f64);
            let bound = if l + 1 < n_layers && hidden == Activation::Relu {
                (6.0 / fan_in).sqrt()
            } else {
                (6.0 / (fan_in + fan_out)).sqrt()
            };
            let (w, _) = net.layer_ranges(l);
            for p in &mut net.params[w] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(dims: &[usize], hidden: Activation, output: OutputActivation) -> Result<Self, ApproxError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(ApproxError::Invalid("need at least two positive layer sizes".into()));
        }
        let n = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            dims: dims.to_vec(),
            hidden,
            output,
            params: vec![0.0; n],
        })
    }

    /// Rebuilds a network from stored parameters.
    pub fn from_params(
        dims: &[usize],
        hidden: Activation,
        output: OutputActivation,
        params: Vec<f64>,
    ) -> Result<Self, ApproxError> {
        let mut net = Self::zeros(dims, hidden, output)?;
        if params.len() != net.params.len() {
            return Err(ApproxError::ShapeMismatch(format!(
                "{} parameters for dims {:?}, expected {}",
                params.len(),
                dims,
                net.params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(ApproxError::NonFinite("parameters"));
        }
        net.params = params;
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two layers")
    }

    /// Weight and bias ranges of layer `l` inside the flat parameter vector.
    pub fn layer_ranges(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let offset: usize = self.dims.windows(2).take(l).map(|w| w[0] * w[1] + w[1]).sum();
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        (offset..offset + i * o, offset + i * o..offset + i * o + o)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, ApproxError> {
        let mut cache = ForwardCache::default();
        self.forward_cached(input, &mut cache)?;
        Ok(cache.acts.pop().unwrap_or_default())
    }

    pub fn forward_cached(&self, input: &[f64], cache: &mut ForwardCache) -> Result<(), ApproxError> {
        if input.len() != self.dims[0] {
            return Err(ApproxError::DimensionMismatch {
                expected: self.dims[0],
                got: input.len(),
            });
        }
        let n_layers = self.dims.len() - 1;
        cache.acts.resize_with(n_layers + 1, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(input);
        for l in 0..n_layers {
            let (w, b) = self.layer_ranges(l);
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let (prev, rest) = cache.acts.split_at_mut(l + 1);
            let x = &prev[l];
            let out = &mut rest[0];
            out.clear();
            let weights = &self.params[w];
            let biases = &self.params[b];
            for j in 0..n_out {
                let row = &weights[j * n_in..(j + 1) * n_in];
                let z = biases[j] + dot(row, x);
                out.push(z);
            }
            if l + 1 < n_layers {
                match self.hidden {
                    Activation::Tanh => out.iter_mut().for_each(|v| *v = v.tanh()),
                    Activation::Relu => out.iter_mut().for_each(|v| *v = v.max(0.0)),
                }
            } else if self.output == OutputActivation::Softmax {
                softmax_in_place(out);
            }
        }
        if cache.output().iter().any(|v| !v.is_finite()) {
            return Err(ApproxError::NonFinite("forward pass"));
        }
        Ok(())
    }

    /// Loss value and its gradient with respect to every parameter.
    pub fn grad(&self, input: &[f64], loss: Loss) -> Result<(f64, Vec<f64>), ApproxError> {
        let mut g = vec![0.0; self.params.len()];
        let mut cache = ForwardCache::default();
        let value = self.accumulate_grad(input, loss, 1.0, &mut cache, &mut g)?;
        Ok((value, g))
    }

    /// Adds `scale * dLoss/dParams` into `grads` and returns the loss.
    pub fn accumulate_grad(
        &self,
        input: &[f64],
        loss: Loss,
        scale: f64,
        cache: &mut ForwardCache,
        grads: &mut [f64],
    ) -> Result<f64, ApproxError> {
        if grads.len() != self.params.len() {
            return Err(ApproxError::ShapeMismatch("gradient buffer".into()));
        }
        self.forward_cached(input, cache)?;
        let (value, mut delta) = self.output_delta(cache.output(), loss)?;
        let n_layers = self.dims.len() - 1;
        for l in (0..n_layers).rev() {
            let (w, b) = self.layer_ranges(l);
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let x = &cache.acts[l];
            {
                let gw = &mut grads[w.clone()];
                for j in 0..n_out {
                    let d = scale * delta[j];
                    if d != 0.0 {
                        for (gk, xk) in gw[j * n_in..(j + 1) * n_in].iter_mut().zip(x) {
                            *gk += d * xk;
                        }
                    }
                }
            }
            for (gb, d) in grads[b].iter_mut().zip(&delta) {
                *gb += scale * d;
            }
            if l == 0 {
                break;
            }
            let weights = &self.params[w];
            let mut prev = vec![0.0; n_in];
            for j in 0..n_out {
                let d = delta[j];
                if d != 0.0 {
                    for (p, wk) in prev.iter_mut().zip(&weights[j * n_in..(j + 1) * n_in]) {
                        *p += d * wk;
                    }
                }
            }
            match self.hidden {
                Activation::Tanh => prev.iter_mut().zip(x).for_each(|(p, a)| *p *= 1.0 - a * a),
                Activation::Relu => prev.iter_mut().zip(x).for_each(|(p, a)| {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }),
            }
            delta = prev;
        }
        if !value.is_finite() || grads.iter().any(|v| !v.is_finite()) {
            return Err(ApproxError::NonFinite("gradient"));
        }
        Ok(value)
    }

    /// Loss and its derivative with respect to the output pre-activations.
    fn output_delta(&self, y: &[f64], loss: Loss) -> Result<(f64, Vec<f64>), ApproxError> {
        let n = y.len();
        match loss {
            Loss::SelectedSquaredError { index, target, weight } => {
                if index >= n {
                    return Err(ApproxError::ShapeMismatch(format!("output index {index} of {n}")));
                }
                let r = y[index] - target;
                let mut dy = vec![0.0; n];
                dy[index] = weight * r;
                Ok((0.5 * weight * r * r, self.through_output(y, dy)))
            }
            Loss::ValueRegression { target } => {
                let r = y[0] - target;
                let mut dy = vec![0.0; n];
                dy[0] = r;
                Ok((0.5 * r * r, self.through_output(y, dy)))
            }
            Loss::PolicyGradient {
                action,
                advantage,
                entropy_coef,
            } => {
                if self.output != OutputActivation::Softmax {
                    return Err(ApproxError::Invalid("policy-gradient loss needs a softmax head".into()));
                }
                if action >= n {
                    return Err(ApproxError::ShapeMismatch(format!("action {action} of {n}")));
                }
                let logs: Vec<f64> = y.iter().map(|p| p.max(f64::MIN_POSITIVE).ln()).collect();
                let entropy: f64 = -y.iter().zip(&logs).map(|(p, l)| p * l).sum::<f64>();
                let value = -advantage * logs[action] - entropy_coef * entropy;
                let delta = (0..n)
                    .map(|j| {
                        let onehot = if j == action { 1.0 } else { 0.0 };
                        -advantage * (onehot - y[j]) + entropy_coef * y[j] * (logs[j] + entropy)
                    })
                    .collect();
                Ok((value, delta))
            }
        }
    }

    fn through_output(&self, y: &[f64], dy: Vec<f64>) -> Vec<f64> {
        match self.output {
            OutputActivation::Linear => dy,
            OutputActivation::Softmax => {
                let inner: f64 = dy.iter().zip(y).map(|(d, p)| d * p).sum();
                y.iter().zip(&dy).map(|(p, d)| p * (d - inner)).collect()
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Self {
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn for_net(net: &Mlp, learning_rate: f64) -> Self {
        Self::new(net.n_params(), learning_rate)
    }

    /// One bias-corrected Adam update of `params` along `grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), ApproxError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(ApproxError::ShapeMismatch(format!(
                "{} params / {} grads for an optimiser of {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(ApproxError::NonFinite("gradient"));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Adam step on a network's parameters.
pub fn adam_step(net: &mut Mlp, grads: &[f64], state: &mut AdamState) -> Result<(), ApproxError> {
    state.step(net.params_mut(), grads)
}

/// Random input vector helper used by tests and benches.
pub fn random_input(dim: usize, rng: &mut SimRng) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}
