//! Feedforward networks for the stochastic policy and the value baseline.
//!
//! Everything is plain `Vec<f64>` math: the networks involved are tiny
//! (32x32 policy, 128x128 value) and the training code needs per-sample
//! score vectors in a flat parameter layout anyway. Hidden layers use tanh;
//! the final layer is linear, with the policy squashing its mean through
//! tanh on top.
//!
//! Flat parameter layout, used by gradients and updates: for each layer,
//! row-major weights then biases; the policy appends its log-std vector at
//! the end.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

/// Observation dimensionality seen by controllers.
pub const OBS_DIM: usize = 10;
/// Action dimensionality produced by controllers.
pub const ACTION_DIM: usize = 7;
/// Hard floor applied to every log-std component after updates.
pub const MIN_LOG_STD: f64 = -1.0;
/// Log-std at initialization.
pub const INIT_LOG_STD: f64 = -0.25;
const LN_2PI: f64 = 1.8378770664093453;

/// Multilayer perceptron with tanh hidden activations and linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// Layer widths, input first.
    pub dims: Vec<usize>,
    /// Row-major `dims[l+1] x dims[l]` weight matrix per layer.
    pub weights: Vec<Vec<f64>>,
    /// Bias vector per layer.
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn zeros(dims: &[usize]) -> Self {
        let weights = dims
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = dims[1..].iter().map(|&n| vec![0.0; n]).collect();
        Mlp {
            dims: dims.to_vec(),
            weights,
            biases,
        }
    }

    /// Scaled uniform (Xavier-style) init; the final layer is shrunk so the
    /// initial outputs stay near zero.
    pub fn init(dims: &[usize], final_scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut mlp = Self::zeros(dims);
        let layers = dims.len() - 1;
        for l in 0..layers {
            let bound = (6.0 / (dims[l] + dims[l + 1]) as f64).sqrt()
                * if l + 1 == layers { final_scale } else { 1.0 };
            for w in mlp.weights[l].iter_mut() {
                *w = rng.gen_range(-bound..bound);
            }
        }
        mlp
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.dims
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(Error::validation("MLP needs at least one layer"));
        }
        if self.weights.len() != self.layer_count() || self.biases.len() != self.layer_count() {
            return Err(Error::validation("MLP layer arrays out of sync with dims"));
        }
        for l in 0..self.layer_count() {
            if self.weights[l].len() != self.dims[l] * self.dims[l + 1]
                || self.biases[l].len() != self.dims[l + 1]
            {
                return Err(Error::validation(format!("MLP layer {l} has wrong shape")));
            }
            if !self.weights[l].iter().chain(self.biases[l].iter()).all(|v| v.is_finite()) {
                return Err(Error::domain(format!("MLP layer {l} has non-finite parameters")));
            }
        }
        Ok(())
    }

    /// Raw (pre-squash) network output; hidden layers tanh.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut h = input.to_vec();
        for l in 0..self.layer_count() {
            h = self.layer_out(l, &h);
            if l + 1 < self.layer_count() {
                for v in h.iter_mut() {
                    *v = v.tanh();
                }
            }
        }
        h
    }

    fn layer_out(&self, l: usize, input: &[f64]) -> Vec<f64> {
        let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
        let mut out = self.biases[l].clone();
        let w = &self.weights[l];
        for (j, o) in out.iter_mut().enumerate() {
            let row = &w[j * n_in..(j + 1) * n_in];
            *o += row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
        }
        debug_assert_eq!(out.len(), n_out);
        out
    }

    /// Forward pass that keeps every layer's post-activation values (input
    /// first, raw output last) for backprop.
    pub fn forward_cached(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.dims.len());
        acts.push(input.to_vec());
        for l in 0..self.layer_count() {
            let mut h = self.layer_out(l, acts.last().unwrap());
            if l + 1 < self.layer_count() {
                for v in h.iter_mut() {
                    *v = v.tanh();
                }
            }
            acts.push(h);
        }
        acts
    }

    /// Accumulate `d(scalar)/d(params)` into `grad` (flat layout), given the
    /// cached activations and the derivative at the raw output.
    pub fn backprop_into(&self, acts: &[Vec<f64>], delta_out: &[f64], grad: &mut [f64]) {
        let mut delta = delta_out.to_vec();
        let mut offset = self.param_count();
        for l in (0..self.layer_count()).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            offset -= n_in * n_out + n_out;
            let (gw, gb) = grad[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            let input = &acts[l];
            for j in 0..n_out {
                let dj = delta[j];
                gb[j] += dj;
                let row = &mut gw[j * n_in..(j + 1) * n_in];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += dj * x;
                }
            }
            if l > 0 {
                let w = &self.weights[l];
                let mut prev = vec![0.0; n_in];
                for j in 0..n_out {
                    let dj = delta[j];
                    let row = &w[j * n_in..(j + 1) * n_in];
                    for (p, wji) in prev.iter_mut().zip(row) {
                        *p += dj * wji;
                    }
                }
                // through the tanh of layer l-1's output
                for (p, h) in prev.iter_mut().zip(&acts[l]) {
                    *p *= 1.0 - h * h;
                }
                delta = prev;
            }
        }
    }

    /// `params += scale * delta` over the flat layout.
    pub fn apply_flat(&mut self, delta: &[f64], scale: f64) {
        let mut offset = 0;
        for l in 0..self.layer_count() {
            for w in self.weights[l].iter_mut() {
                *w += scale * delta[offset];
                offset += 1;
            }
            for b in self.biases[l].iter_mut() {
                *b += scale * delta[offset];
                offset += 1;
            }
        }
        debug_assert_eq!(offset, self.param_count());
    }
}

/// Stochastic policy: tanh-squashed MLP mean plus a state-independent
/// diagonal Gaussian parameterized by log standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub mlp: Mlp,
    pub log_std: Vec<f64>,
}

/// On-disk policy format.
#[derive(Serialize, Deserialize)]
struct PolicyFile {
    format_version: u32,
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    log_std: Vec<f64>,
}

impl PolicyParams {
    /// Default architecture: 10 -> 32 -> 32 -> 7.
    pub fn layer_dims() -> Vec<usize> {
        vec![OBS_DIM, 32, 32, ACTION_DIM]
    }

    pub fn init(rng: &mut ChaCha8Rng) -> Self {
        PolicyParams {
            mlp: Mlp::init(&Self::layer_dims(), 0.01, rng),
            log_std: vec![INIT_LOG_STD; ACTION_DIM],
        }
    }

    pub fn zeros() -> Self {
        PolicyParams {
            mlp: Mlp::zeros(&Self::layer_dims()),
            log_std: vec![INIT_LOG_STD; ACTION_DIM],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mlp.validate()?;
        if self.mlp.input_dim() != OBS_DIM || self.mlp.output_dim() != ACTION_DIM {
            return Err(Error::validation(format!(
                "policy must map {OBS_DIM} observations to {ACTION_DIM} actions"
            )));
        }
        if self.log_std.len() != ACTION_DIM {
            return Err(Error::validation("log_std must have one entry per action"));
        }
        if !self.log_std.iter().all(|v| v.is_finite()) {
            return Err(Error::domain("non-finite log_std"));
        }
        if self.log_std.iter().any(|&v| v < MIN_LOG_STD - 1e-12) {
            return Err(Error::validation(format!(
                "log_std below the {MIN_LOG_STD} floor"
            )));
        }
        Ok(())
    }

    /// Total parameters including log-std entries.
    pub fn param_count(&self) -> usize {
        self.mlp.param_count() + self.log_std.len()
    }

    /// Deterministic action: tanh-squashed network output.
    pub fn mean(&self, obs: &[f64]) -> Vec<f64> {
        self.mlp.forward(obs).iter().map(|v| v.tanh()).collect()
    }

    /// Log density of `action` under the Gaussian about the squashed mean.
    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> f64 {
        let mean = self.mean(obs);
        let mut lp = 0.0;
        for j in 0..ACTION_DIM {
            let std = self.log_std[j].exp();
            let z = (action[j] - mean[j]) / std;
            lp += -0.5 * z * z - self.log_std[j] - 0.5 * LN_2PI;
        }
        lp
    }

    /// Accumulate `weight * d(log_prob)/d(params)` into `grad` (flat layout:
    /// MLP params then log_std). Returns the log-prob as a by-product.
    pub fn log_prob_grad_into(
        &self,
        obs: &[f64],
        action: &[f64],
        weight: f64,
        grad: &mut [f64],
    ) -> f64 {
        let acts = self.mlp.forward_cached(obs);
        let raw = acts.last().unwrap();
        let mut lp = 0.0;
        let mut delta = vec![0.0; ACTION_DIM];
        let mlp_n = self.mlp.param_count();
        for j in 0..ACTION_DIM {
            let mean = raw[j].tanh();
            let std = self.log_std[j].exp();
            let z = (action[j] - mean) / std;
            lp += -0.5 * z * z - self.log_std[j] - 0.5 * LN_2PI;
            // d lp / d mean, then through the output tanh
            delta[j] = weight * (z / std) * (1.0 - mean * mean);
            grad[mlp_n + j] += weight * (z * z - 1.0);
        }
        self.mlp.backprop_into(&acts, &delta, grad);
        lp
    }

    /// `params += scale * delta`, then floor log-std at [`MIN_LOG_STD`].
    pub fn apply_flat(&mut self, delta: &[f64], scale: f64) {
        let mlp_n = self.mlp.param_count();
        self.mlp.apply_flat(&delta[..mlp_n], scale);
        for (ls, d) in self.log_std.iter_mut().zip(&delta[mlp_n..]) {
            *ls = (*ls + scale * d).max(MIN_LOG_STD);
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = PolicyFile {
            format_version: 1,
            layer_dims: self.mlp.dims.clone(),
            weights: self.mlp.weights.clone(),
            biases: self.mlp.biases.clone(),
            log_std: self.log_std.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PolicyFile = serde_json::from_str(text)?;
        if file.format_version != 1 {
            return Err(Error::Config(format!(
                "unsupported policy format_version {}",
                file.format_version
            )));
        }
        let params = PolicyParams {
            mlp: Mlp {
                dims: file.layer_dims,
                weights: file.weights,
                biases: file.biases,
            },
            log_std: file.log_std,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Value-function network (linear output).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueParams {
    pub mlp: Mlp,
}

impl ValueParams {
    pub fn layer_dims() -> Vec<usize> {
        vec![OBS_DIM, 128, 128, 1]
    }

    pub fn init(rng: &mut ChaCha8Rng) -> Self {
        ValueParams {
            mlp: Mlp::init(&Self::layer_dims(), 1.0, rng),
        }
    }

    pub fn predict(&self, obs: &[f64]) -> f64 {
        self.mlp.forward(obs)[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_policy_has_zero_mean() {
        let p = PolicyParams::zeros();
        let mean = p.mean(&[0.3; OBS_DIM]);
        assert!(mean.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn log_prob_matches_direct_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = PolicyParams::init(&mut rng);
        let obs = [0.1; OBS_DIM];
        let action = [0.2; ACTION_DIM];
        let mean = p.mean(&obs);
        let mut expected = 0.0;
        for j in 0..ACTION_DIM {
            let std = p.log_std[j].exp();
            let z: f64 = (action[j] - mean[j]) / std;
            expected += -0.5 * z * z - p.log_std[j] - 0.5 * LN_2PI;
        }
        assert!((p.log_prob(&obs, &action) - expected).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut p = PolicyParams {
            mlp: Mlp::init(&[3, 4, 2], 1.0, &mut rng),
            log_std: vec![-0.3, -0.5],
        };
        // widen to a small custom net: adapt obs/action dims manually
        let obs = vec![0.4, -0.2, 0.9];
        let action = vec![0.3, -0.6];
        let n = p.mlp.param_count() + 2;
        let mut grad = vec![0.0; n];
        let acts = p.mlp.forward_cached(&obs);
        let raw = acts.last().unwrap().clone();
        let mut delta = vec![0.0; 2];
        for j in 0..2 {
            let mean = raw[j].tanh();
            let std: f64 = p.log_std[j].exp();
            let z = (action[j] - mean) / std;
            delta[j] = (z / std) * (1.0 - mean * mean);
            grad[p.mlp.param_count() + j] = z * z - 1.0;
        }
        p.mlp.backprop_into(&acts, &delta, &mut grad);

        let log_prob = |p: &PolicyParams| {
            let raw = p.mlp.forward(&obs);
            (0..2)
                .map(|j| {
                    let mean = raw[j].tanh();
                    let std: f64 = p.log_std[j].exp();
                    let z = (action[j] - mean) / std;
                    -0.5 * z * z - p.log_std[j] - 0.5 * LN_2PI
                })
                .sum::<f64>()
        };
        let h = 1e-6;
        for k in 0..n {
            let mut basis = vec![0.0; n];
            basis[k] = 1.0;
            let mut plus = p.clone();
            plus.apply_flat(&basis, h);
            let mut minus = p.clone();
            minus.apply_flat(&basis, -h);
            let fd = (log_prob(&plus) - log_prob(&minus)) / (2.0 * h);
            assert!(
                (grad[k] - fd).abs() <= 1e-5 * fd.abs().max(1.0),
                "param {k}: analytic {} vs fd {}",
                grad[k],
                fd
            );
        }
    }

    #[test]
    fn json_roundtrip_and_floor_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = PolicyParams::init(&mut rng);
        let back = PolicyParams::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, back);

        let mut floored = p.clone();
        let n = floored.param_count();
        let mut delta = vec![0.0; n];
        for d in delta[n - ACTION_DIM..].iter_mut() {
            *d = -100.0;
        }
        floored.apply_flat(&delta, 1.0);
        assert!(floored.log_std.iter().all(|&v| v == MIN_LOG_STD));
    }
}
