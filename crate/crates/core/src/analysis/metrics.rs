use serde::{Deserialize, Serialize};

use crate::engine::RunTrace;
use crate::error::{Error, Result};

fn check_complete(trace: &RunTrace) -> Result<()> {
    if trace.envs.is_empty() {
        return Err(Error::Empty("environment records"));
    }
    for (i, e) in trace.envs.iter().enumerate() {
        if e.env != i {
            return Err(Error::Invalid(format!(
                "environment record {i} is labelled {}",
                e.env
            )));
        }
        if e.fe_count == 0 || !e.best_y.is_finite() || !e.optimum_y.is_finite() {
            return Err(Error::Invalid(format!("environment {i} is incomplete")));
        }
    }
    Ok(())
}

/// Per-environment error `f(x*, t) - f(x_best, t)` at the end of each
/// environment.
pub fn env_errors(trace: &RunTrace) -> Result<Vec<f64>> {
    check_complete(trace)?;
    Ok(trace.envs.iter().map(|e| e.optimum_y - e.best_y).collect())
}

/// Best error before change: mean over environments of the final error.
pub fn e_bbc(trace: &RunTrace) -> Result<f64> {
    let errs = env_errors(trace)?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Mean over environments of `peer[t] / best[t]`.
pub fn budget_ratio(peer_counts: &[usize], best_counts: &[usize]) -> Result<f64> {
    if peer_counts.len() != best_counts.len() {
        return Err(Error::Dimension {
            expected: best_counts.len(),
            found: peer_counts.len(),
        });
    }
    if peer_counts.is_empty() {
        return Err(Error::Empty("FE counts"));
    }
    if peer_counts.iter().chain(best_counts).any(|&c| c == 0) {
        return Err(Error::Invalid("FE counts must be at least 1".into()));
    }
    let sum: f64 = peer_counts
        .iter()
        .zip(best_counts)
        .map(|(&p, &b)| p as f64 / b as f64)
        .sum();
    Ok(sum / peer_counts.len() as f64)
}

/// One point of the loss curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    /// 1-based FE index over the whole run.
    pub fe: usize,
    pub env: usize,
    pub loss: f64,
}

/// Gap between the environment's optimum and the best-so-far after every FE.
/// The series restarts at each environment boundary.
pub fn loss_curve(trace: &RunTrace) -> Vec<LossPoint> {
    trace
        .fes
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let opt = trace.envs.iter().find(|e| e.env == r.env)?.optimum_y;
            Some(LossPoint {
                fe: i + 1,
                env: r.env,
                loss: opt - r.best_so_far,
            })
        })
        .collect()
}
