//! One-hidden-layer perceptron approximating the limit state, with exact
//! first and second derivatives with respect to its inputs.
//!
//! Inputs and output are Min-Max scaled to `[-1, 1]`; the hidden layer uses
//! `tanh` and the output is linear:
//!
//! ```text
//! y~ = sum_j w_j tanh(sum_i W_ji x~_i + b_j) + b_out
//! ```

mod io;
mod train;

pub use train::{train, TrainConfig, TrainReport};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Bookkeeping carried with a trained net.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NetMetadata {
    pub seed: u64,
    /// SHA-256 of the deduplicated training data, hex encoded.
    pub training_digest: String,
    pub input_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateNet {
    pub inputs: usize,
    pub hidden: usize,
    /// Hidden weights, `hidden x inputs`, row-major.
    pub w_hidden: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub y_min: f64,
    pub y_max: f64,
    pub meta: NetMetadata,
}

impl SurrogateNet {
    /// Net with all weights zero and the given scaling bounds.
    pub fn zeros(hidden: usize, x_min: Vec<f64>, x_max: Vec<f64>, y_min: f64, y_max: f64) -> Result<Self> {
        let inputs = x_min.len();
        let net = SurrogateNet {
            inputs,
            hidden,
            w_hidden: vec![0.0; hidden * inputs],
            b_hidden: vec![0.0; hidden],
            w_out: vec![0.0; hidden],
            b_out: 0.0,
            x_min,
            x_max,
            y_min,
            y_max,
            meta: NetMetadata::default(),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let (i, j) = (self.inputs, self.hidden);
        if i == 0 || j == 0 {
            return Err(Error::InvalidArgument("network needs at least one input and one hidden unit".into()));
        }
        if self.w_hidden.len() != i * j
            || self.b_hidden.len() != j
            || self.w_out.len() != j
            || self.x_min.len() != i
            || self.x_max.len() != i
        {
            return Err(Error::InvalidArgument("network arrays do not match its dimensions".into()));
        }
        if self.x_min.iter().zip(&self.x_max).any(|(lo, hi)| !(lo < hi)) || !(self.y_min < self.y_max) {
            return Err(Error::InvalidArgument("scaling bounds need min < max".into()));
        }
        if !self.meta.input_names.is_empty() && self.meta.input_names.len() != i {
            return Err(Error::InvalidArgument("input name count does not match the input width".into()));
        }
        Ok(())
    }

    /// Fails with a binding error unless the net was trained on `names`.
    pub fn check_inputs(&self, names: &[String]) -> Result<()> {
        if self.inputs != names.len() {
            return Err(Error::Binding(format!("network has {} inputs, study defines {}", self.inputs, names.len())));
        }
        if !self.meta.input_names.is_empty() && self.meta.input_names != names {
            return Err(Error::Binding(format!(
                "network inputs {:?} differ from study variables {:?}",
                self.meta.input_names, names
            )));
        }
        Ok(())
    }

    pub fn normalize_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.x_min.iter().zip(&self.x_max)).map(|(v, (lo, hi))| 2.0 * (v - lo) / (hi - lo) - 1.0).collect()
    }

    pub fn denormalize_input(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(self.x_min.iter().zip(&self.x_max)).map(|(v, (lo, hi))| lo + 0.5 * (v + 1.0) * (hi - lo)).collect()
    }

    pub fn normalize_output(&self, y: f64) -> f64 {
        2.0 * (y - self.y_min) / (self.y_max - self.y_min) - 1.0
    }

    pub fn denormalize_output(&self, v: f64) -> f64 {
        self.y_min + 0.5 * (v + 1.0) * (self.y_max - self.y_min)
    }

    /// True when some coordinate lies outside the training bounds.
    pub fn is_out_of_range(&self, x: &[f64]) -> bool {
        x.iter().zip(self.x_min.iter().zip(&self.x_max)).any(|(v, (lo, hi))| v < lo || v > hi)
    }

    /// Hidden activations for a normalized input.
    pub(crate) fn hidden_activations(&self, u: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| {
                let row = &self.w_hidden[j * self.inputs..(j + 1) * self.inputs];
                (row.iter().zip(u).map(|(w, v)| w * v).sum::<f64>() + self.b_hidden[j]).tanh()
            })
            .collect()
    }

    /// Network output in normalized units for a normalized input.
    pub fn forward_normalized(&self, u: &[f64]) -> f64 {
        let z = self.hidden_activations(u);
        z.iter().zip(&self.w_out).map(|(z, w)| z * w).sum::<f64>() + self.b_out
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.denormalize_output(self.forward_normalized(&self.normalize_input(x)))
    }

    /// Input scale factors `d x~_i / d x_i` and output factor `d y / d y~`.
    fn scales(&self) -> (Vec<f64>, f64) {
        let sx = self.x_min.iter().zip(&self.x_max).map(|(lo, hi)| 2.0 / (hi - lo)).collect();
        (sx, 0.5 * (self.y_max - self.y_min))
    }

    /// Gradient of the physical output with respect to physical inputs.
    pub fn grad_input(&self, x: &[f64]) -> Vec<f64> {
        self.value_and_grad(x).1
    }

    pub fn value_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let u = self.normalize_input(x);
        let z = self.hidden_activations(&u);
        let (sx, sy) = self.scales();
        let mut g = vec![0.0; self.inputs];
        for j in 0..self.hidden {
            let c = self.w_out[j] * (1.0 - z[j] * z[j]);
            let row = &self.w_hidden[j * self.inputs..(j + 1) * self.inputs];
            for i in 0..self.inputs {
                g[i] += c * row[i];
            }
        }
        for i in 0..self.inputs {
            g[i] *= sy * sx[i];
        }
        let y = z.iter().zip(&self.w_out).map(|(z, w)| z * w).sum::<f64>() + self.b_out;
        (self.denormalize_output(y), g)
    }

    /// Hessian of the physical output with respect to physical inputs,
    /// row-major `inputs x inputs`.
    pub fn hessian_input(&self, x: &[f64]) -> Vec<f64> {
        let u = self.normalize_input(x);
        let z = self.hidden_activations(&u);
        let (sx, sy) = self.scales();
        let n = self.inputs;
        let mut h = vec![0.0; n * n];
        for j in 0..self.hidden {
            let c = self.w_out[j] * (-2.0 * z[j]) * (1.0 - z[j] * z[j]);
            let row = &self.w_hidden[j * n..(j + 1) * n];
            for a in 0..n {
                let ca = c * row[a];
                for b in a..n {
                    h[a * n + b] += ca * row[b];
                }
            }
        }
        for a in 0..n {
            for b in a..n {
                let v = h[a * n + b] * sy * sx[a] * sx[b];
                h[a * n + b] = v;
                h[b * n + a] = v;
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_net(hidden: usize, inputs: usize) -> SurrogateNet {
        SurrogateNet::zeros(hidden, vec![-1.0; inputs], vec![1.0; inputs], -1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_net_returns_denormalized_zero() {
        let net = SurrogateNet::zeros(3, vec![0.0, 10.0], vec![1.0, 20.0], 2.0, 6.0).unwrap();
        assert_eq!(net.forward(&[0.3, 14.0]), 4.0);
        assert!(net.grad_input(&[0.3, 14.0]).iter().all(|g| *g == 0.0));
    }

    #[test]
    fn single_unit_is_tanh() {
        let mut net = unit_net(1, 1);
        net.w_hidden[0] = 1.0;
        net.w_out[0] = 1.0;
        for x in [-0.7, 0.0, 0.4] {
            assert!((net.forward(&[x]) - x.tanh()).abs() < 1e-15);
        }
        assert_eq!(net.grad_input(&[0.0]), vec![1.0]);
    }

    #[test]
    fn gradient_at_origin_is_weight_product() {
        let mut net = unit_net(1, 2);
        net.w_hidden = vec![0.8, -1.5];
        net.w_out = vec![2.0];
        assert_eq!(net.grad_input(&[0.0, 0.0]), vec![1.6, -3.0]);
        assert!(net.hessian_input(&[0.0, 0.0]).iter().all(|h| *h == 0.0));
    }

    #[test]
    fn normalization_is_idempotent() {
        let net = SurrogateNet::zeros(2, vec![-3.0, 1e9], vec![5.0, 2e9], -0.2, 0.4).unwrap();
        for v in [-1.0, -0.3, 0.0, 0.77, 1.0] {
            let u = [v, -v];
            let back = net.normalize_input(&net.denormalize_input(&u));
            assert!((back[0] - u[0]).abs() < 1e-12 && (back[1] - u[1]).abs() < 1e-12);
            assert!((net.normalize_output(net.denormalize_output(v)) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_bounds_are_rejected() {
        assert!(SurrogateNet::zeros(2, vec![1.0], vec![1.0], 0.0, 1.0).is_err());
        assert!(SurrogateNet::zeros(0, vec![0.0], vec![1.0], 0.0, 1.0).is_err());
    }
}
