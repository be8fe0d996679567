//! Fully connected ReLU network `n -> 40 -> 40 -> 40 -> 1` with a flat
//! parameter vector and mean-squared-error loss.
//!
//! Layout: for each layer, the weight matrix row-major (`out x in`) followed
//! by the bias vector.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Dataset, Normalization, Prediction};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const HIDDEN: [usize; 3] = [40, 40, 40];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnParams {
    pub input_dim: usize,
    pub weights: Vec<f64>,
}

/// Layer widths including input and output.
pub fn layer_sizes(input_dim: usize) -> Vec<usize> {
    let mut s = Vec::with_capacity(HIDDEN.len() + 2);
    s.push(input_dim);
    s.extend_from_slice(&HIDDEN);
    s.push(1);
    s
}

pub fn param_count(input_dim: usize) -> usize {
    layer_sizes(input_dim)
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum()
}

impl NnParams {
    pub fn zeros(input_dim: usize) -> Self {
        Self {
            input_dim,
            weights: vec![0.0; param_count(input_dim)],
        }
    }

    /// Kaiming-uniform weights (`bound = sqrt(6 / fan_in)`), zero biases.
    pub fn kaiming(input_dim: usize, rng: &mut Rng) -> Self {
        let mut weights = Vec::with_capacity(param_count(input_dim));
        for w in layer_sizes(input_dim).windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                weights.push(rng.random_range(-bound..bound));
            }
            weights.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self { input_dim, weights }
    }

    fn check(&self, data: Option<&Dataset>) -> Result<()> {
        let expected = param_count(self.input_dim);
        if self.weights.len() != expected {
            return Err(Error::Dimension {
                expected,
                found: self.weights.len(),
            });
        }
        if let Some(d) = data {
            d.validate()?;
            let dims = d.dims().unwrap_or(self.input_dim);
            if dims != self.input_dim {
                return Err(Error::Dimension {
                    expected: self.input_dim,
                    found: dims,
                });
            }
        }
        Ok(())
    }

    /// Forward pass in model space.
    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut act = x.to_vec();
        let mut offset = 0;
        let sizes = layer_sizes(self.input_dim);
        let last = sizes.len() - 2;
        for (li, w) in sizes.windows(2).enumerate() {
            let (fin, fout) = (w[0], w[1]);
            let wm = &self.weights[offset..offset + fin * fout];
            let b = &self.weights[offset + fin * fout..offset + fin * fout + fout];
            offset += fin * fout + fout;
            act = (0..fout)
                .map(|o| {
                    let z = b[o] + dot(&wm[o * fin..(o + 1) * fin], &act);
                    if li < last {
                        z.max(0.0)
                    } else {
                        z
                    }
                })
                .collect();
        }
        act[0]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean squared error over `data` (model space).
pub fn loss(p: &NnParams, data: &Dataset) -> Result<f64> {
    p.check(Some(data))?;
    let n = data.len() as f64;
    Ok(data
        .points
        .iter()
        .map(|o| {
            let e = p.forward(&o.x) - o.y;
            e * e
        })
        .sum::<f64>()
        / n)
}

/// MSE and its backpropagated gradient.
pub fn loss_and_grad(p: &NnParams, data: &Dataset) -> Result<(f64, Vec<f64>)> {
    p.check(Some(data))?;
    let sizes = layer_sizes(p.input_dim);
    let nl = sizes.len() - 1;
    let mut offsets = Vec::with_capacity(nl);
    let mut off = 0;
    for w in sizes.windows(2) {
        offsets.push(off);
        off += w[0] * w[1] + w[1];
    }
    let n = data.len() as f64;
    let mut grad = vec![0.0; p.weights.len()];
    let mut total = 0.0;

    for obs in &data.points {
        // Forward, keeping activations (post-ReLU) per layer.
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(nl + 1);
        acts.push(obs.x.clone());
        for l in 0..nl {
            let (fin, fout) = (sizes[l], sizes[l + 1]);
            let wm = &p.weights[offsets[l]..offsets[l] + fin * fout];
            let b = &p.weights[offsets[l] + fin * fout..offsets[l] + fin * fout + fout];
            let prev = &acts[l];
            let a: Vec<f64> = (0..fout)
                .map(|o| {
                    let z = b[o] + dot(&wm[o * fin..(o + 1) * fin], prev);
                    if l + 1 < nl {
                        z.max(0.0)
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(a);
        }
        let err = acts[nl][0] - obs.y;
        total += err * err;

        let mut delta = vec![2.0 * err / n];
        for l in (0..nl).rev() {
            let (fin, fout) = (sizes[l], sizes[l + 1]);
            let wo = offsets[l];
            let bo = wo + fin * fout;
            let prev = &acts[l];
            for o in 0..fout {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                grad[bo + o] += d;
                let row = &mut grad[wo + o * fin..wo + (o + 1) * fin];
                for (g, a) in row.iter_mut().zip(prev) {
                    *g += d * a;
                }
            }
            if l > 0 {
                let wm = &p.weights[wo..wo + fin * fout];
                delta = (0..fin)
                    .map(|i| {
                        // ReLU derivative on the previous layer's activation.
                        if prev[i] > 0.0 {
                            (0..fout).map(|o| delta[o] * wm[o * fin + i]).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
    }
    Ok((total / n, grad))
}

pub fn loss_grad(p: &NnParams, data: &Dataset) -> Result<Vec<f64>> {
    loss_and_grad(p, data).map(|(_, g)| g)
}

/// Forward pass at a raw-space point; variance is always zero.
pub fn predict(p: &NnParams, data: &Dataset, x: &[f64]) -> Result<Prediction> {
    p.check(None)?;
    Ok(predict_with(p, data.normalization.as_ref(), x))
}

pub(crate) fn predict_with(p: &NnParams, norm: Option<&Normalization>, x: &[f64]) -> Prediction {
    let mean = match norm {
        Some(n) => n.denormalize_y(p.forward(&n.normalize_x(x))),
        None => p.forward(x),
    };
    Prediction {
        mean,
        variance: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn parameter_count() {
        assert_eq!(param_count(2), 2 * 40 + 40 + 2 * (40 * 40 + 40) + 41);
        let mut rng = Rng::seed_from_u64(0);
        assert_eq!(NnParams::kaiming(4, &mut rng).weights.len(), param_count(4));
    }

    #[test]
    fn zero_network_has_zero_loss_and_gradient() {
        let d = Dataset::from_xy(&[vec![0.0, 0.0], vec![0.0, 0.0]], &[0.0, 0.0], 0);
        let p = NnParams::zeros(2);
        assert_eq!(loss(&p, &d).unwrap(), 0.0);
        assert!(loss_grad(&p, &d).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_point_loss_is_squared_error() {
        let mut rng = Rng::seed_from_u64(5);
        let p = NnParams::kaiming(3, &mut rng);
        let x = vec![0.2, 0.7, 0.1];
        let o = p.forward(&x);
        let d = Dataset::from_xy(&[x], &[1.5], 0);
        assert!((loss(&p, &d).unwrap() - (o - 1.5).powi(2)).abs() < 1e-14);
    }

    #[test]
    fn dead_network_outputs_final_bias() {
        let mut p = NnParams::zeros(2);
        let first_bias = 2 * 40;
        for b in &mut p.weights[first_bias..first_bias + 40] {
            *b = -1.0;
        }
        let last = p.weights.len() - 1;
        p.weights[last] = 0.75;
        assert_eq!(p.forward(&[0.3, 0.9]), 0.75);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let d = Dataset::from_xy(&[vec![0.0]], &[0.0], 0);
        let p = NnParams {
            input_dim: 1,
            weights: vec![0.0; 3],
        };
        assert!(loss(&p, &d).is_err());
    }
}
