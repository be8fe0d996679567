use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::surrogates::{FittedSurrogate, Prediction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionConfig {
    /// Exploration weight of the upper confidence bound.
    pub w: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self { w: 2.0 }
    }
}

/// Multi-start settings: `probes_per_dim * n` random probes, the best
/// `starts` of them refined by compass search sharing `refine_budget`
/// surrogate evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaximizerConfig {
    pub probes_per_dim: usize,
    pub starts: usize,
    pub refine_budget: usize,
}

impl Default for MaximizerConfig {
    fn default() -> Self {
        Self {
            probes_per_dim: 512,
            starts: 8,
            refine_budget: 2000,
        }
    }
}

/// Upper confidence bound `mean + w * sqrt(variance)`.
pub fn ucb(pred: Prediction, w: f64) -> f64 {
    pred.mean + w * pred.variance.max(0.0).sqrt()
}

/// Maximizes the UCB surface of `model` over the box. Returns the best point
/// found; a flat surface yields the best random probe.
pub fn maximize_acquisition(
    model: &FittedSurrogate,
    acq: &AcquisitionConfig,
    lower: &[f64],
    upper: &[f64],
    config: &MaximizerConfig,
    rng: &mut Rng,
) -> Vec<f64> {
    let n = lower.len();
    let to_raw = |z: &[f64]| -> Vec<f64> {
        z.iter()
            .zip(lower.iter().zip(upper))
            .map(|(v, (l, u))| l + v * (u - l))
            .collect()
    };
    let score = |z: &[f64]| ucb(model.predict(&to_raw(z)), acq.w);

    let probes = (config.probes_per_dim * n).max(1);
    let mut scored: Vec<(f64, Vec<f64>)> = (0..probes)
        .map(|_| {
            let z: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            (score(&z), z)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(config.starts.max(1));

    let per_start = config.refine_budget / scored.len().max(1);
    let mut best = scored[0].clone();
    for (s0, z0) in scored {
        let (s, z) = compass_search(&score, z0, s0, per_start);
        if s > best.0 {
            best = (s, z);
        }
    }
    to_raw(&best.1)
}

/// Bounded compass search in the unit box: try `±step` along each axis, move
/// to the best improving neighbour, halve the step when none improves.
fn compass_search(
    f: &impl Fn(&[f64]) -> f64,
    mut z: Vec<f64>,
    mut fz: f64,
    budget: usize,
) -> (f64, Vec<f64>) {
    let mut step = 0.1;
    let mut used = 0;
    while used < budget && step > 1e-7 {
        let mut best_move: Option<(f64, Vec<f64>)> = None;
        'axes: for d in 0..z.len() {
            for dir in [1.0, -1.0] {
                if used >= budget {
                    break 'axes;
                }
                let mut c = z.clone();
                c[d] = (c[d] + dir * step).clamp(0.0, 1.0);
                if c[d] == z[d] {
                    continue;
                }
                used += 1;
                let fc = f(&c);
                if fc > best_move.as_ref().map_or(fz, |b| b.0) {
                    best_move = Some((fc, c));
                }
            }
        }
        match best_move {
            Some((fc, c)) => {
                fz = fc;
                z = c;
            }
            None => step *= 0.5,
        }
    }
    (fz, z)
}
