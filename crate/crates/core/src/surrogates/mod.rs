//! Differentiable surrogate models: exact GPR and a small ReLU MLP.
//!
//! Both expose a loss, its gradient with respect to the flat parameter
//! vector, and predictions. Losses are computed on the dataset as stored;
//! callers normalize beforehand with [`Dataset::normalized`].

mod dataset;
pub mod gpr;
pub mod nn;

use serde::{Deserialize, Serialize};

pub use dataset::{Dataset, Normalization, Observation};
pub use gpr::{GprParams, GprPosterior};
pub use nn::NnParams;

use crate::error::{Error, Result};
use crate::rng::Rng;

thread_local! {
    static GRAD_EVALS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
    static PREDICTIONS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
}

/// Number of fitted-surrogate predictions performed on this thread so far.
pub fn prediction_count() -> u64 {
    PREDICTIONS.with(|c| c.get())
}

/// Number of loss-gradient evaluations performed on this thread so far.
pub fn gradient_evaluations() -> u64 {
    GRAD_EVALS.with(|c| c.get())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SurrogateKind {
    Gpr,
    Nn,
}

/// Parameter vector θ of a surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "UPPERCASE")]
pub enum SurrogateParams {
    Gpr(GprParams),
    Nn(NnParams),
}

impl SurrogateParams {
    /// Default starting point: `l = 1, sf2 = 1, sn2 = 0.01` for GPR,
    /// Kaiming-uniform weights for the network.
    pub fn initial(kind: SurrogateKind, input_dim: usize, rng: &mut Rng) -> Self {
        match kind {
            SurrogateKind::Gpr => Self::Gpr(GprParams::default()),
            SurrogateKind::Nn => Self::Nn(NnParams::kaiming(input_dim, rng)),
        }
    }

    pub fn kind(&self) -> SurrogateKind {
        match self {
            Self::Gpr(_) => SurrogateKind::Gpr,
            Self::Nn(_) => SurrogateKind::Nn,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Gpr(_) => 3,
            Self::Nn(p) => p.weights.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Self::Gpr(p) => p.to_array().to_vec(),
            Self::Nn(p) => p.weights.clone(),
        }
    }

    /// Same variant with a new flat parameter vector.
    pub fn with_vec(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                found: v.len(),
            });
        }
        Ok(match self {
            Self::Gpr(_) => Self::Gpr(GprParams::from_slice(v)),
            Self::Nn(p) => Self::Nn(NnParams {
                input_dim: p.input_dim,
                weights: v.to_vec(),
            }),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }

    /// GPR: negative log marginal likelihood. NN: mean squared error.
    pub fn loss(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Empty("training data"));
        }
        match self {
            Self::Gpr(p) => gpr::loss(p, data),
            Self::Nn(p) => nn::loss(p, data),
        }
    }

    pub fn loss_and_grad(&self, data: &Dataset) -> Result<(f64, Vec<f64>)> {
        if data.is_empty() {
            return Err(Error::Empty("training data"));
        }
        GRAD_EVALS.with(|c| c.set(c.get() + 1));
        match self {
            Self::Gpr(p) => gpr::loss_and_grad(p, data).map(|(v, g)| (v, g.to_vec())),
            Self::Nn(p) => nn::loss_and_grad(p, data),
        }
    }

    pub fn loss_grad(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.loss_and_grad(data).map(|(_, g)| g)
    }

    pub fn predict(&self, data: &Dataset, x: &[f64]) -> Result<Prediction> {
        Ok(self.fit(data)?.predict(x))
    }

    /// Prepares the model for repeated predictions on `data`.
    pub fn fit(&self, data: &Dataset) -> Result<FittedSurrogate> {
        if data.is_empty() {
            return Err(Error::Empty("training data"));
        }
        Ok(match self {
            Self::Gpr(p) => FittedSurrogate::Gpr(GprPosterior::fit(p, data)?),
            Self::Nn(p) => FittedSurrogate::Nn {
                params: p.clone(),
                normalization: data.normalization.clone(),
            },
        })
    }
}

/// A surrogate bound to its training data.
#[derive(Debug, Clone)]
pub enum FittedSurrogate {
    Gpr(GprPosterior),
    Nn {
        params: NnParams,
        normalization: Option<Normalization>,
    },
}

impl FittedSurrogate {
    /// Prediction at a raw-space point.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        PREDICTIONS.with(|c| c.set(c.get() + 1));
        match self {
            Self::Gpr(post) => post.predict(x),
            Self::Nn {
                params,
                normalization,
            } => nn::predict_with(params, normalization.as_ref(), x),
        }
    }

    pub fn kind(&self) -> SurrogateKind {
        match self {
            Self::Gpr(_) => SurrogateKind::Gpr,
            Self::Nn { .. } => SurrogateKind::Nn,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let p = SurrogateParams::Gpr(GprParams::from_natural(0.4, 2.0, 0.1));
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"variant\":\"GPR\""));
        let back: SurrogateParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn with_vec_checks_length() {
        let p = SurrogateParams::Gpr(GprParams::default());
        assert!(p.with_vec(&[1.0, 2.0]).is_err());
        assert_eq!(p.with_vec(&[0.0, 0.0, 0.0]).unwrap().to_vec(), vec![0.0; 3]);
    }

    #[test]
    fn empty_data_is_rejected() {
        let p = SurrogateParams::Gpr(GprParams::default());
        assert!(matches!(p.loss(&Dataset::new()), Err(Error::Empty(_))));
    }
}
