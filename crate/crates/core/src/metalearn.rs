//! Meta-learning across previous environments and adaptation to the new one.
//!
//! Each meta-batch samples `m` archived environments, draws a support and a
//! query set of `K` points from each, adapts θ with one gradient step on the
//! support set and scores the adapted parameters on the query set. The summed
//! query loss is the meta-loss; θ moves against its gradient. After a change,
//! the adaptation component starts from the meta-learned θ and fits it to the
//! new environment's data with the same optimizer.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::surrogates::{gpr, Dataset, SurrogateParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaOptimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaConfig {
    pub few_shot_k: usize,
    /// Upper bound on tasks per batch; the effective value is
    /// `min(tasks_per_batch, archived environments)`.
    pub tasks_per_batch: usize,
    pub inner_lr: f64,
    pub outer_lr: f64,
    pub max_epochs: usize,
    pub convergence_tol: f64,
    pub first_order: bool,
    pub optimizer: MetaOptimizer,
    pub adapt_max_iters: usize,
    pub adapt_tol: f64,
    /// Keep a parameter snapshot per batch in the trace.
    pub snapshot_params: bool,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            few_shot_k: 5,
            tasks_per_batch: 5,
            inner_lr: 0.01,
            outer_lr: 0.01,
            max_epochs: 200,
            convergence_tol: 1e-4,
            first_order: true,
            optimizer: MetaOptimizer::Sgd,
            adapt_max_iters: 100,
            adapt_tol: 1e-6,
            snapshot_params: true,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.few_shot_k == 0 {
            return bad("few_shot_k must be positive");
        }
        if self.tasks_per_batch == 0 {
            return bad("tasks_per_batch must be positive");
        }
        if !(self.inner_lr >= 0.0 && self.inner_lr.is_finite()) {
            return bad("inner_lr must be finite and non-negative");
        }
        if !(self.outer_lr > 0.0 && self.outer_lr.is_finite()) {
            return bad("outer_lr must be finite and positive");
        }
        if !(self.convergence_tol > 0.0) {
            return bad("convergence_tol must be positive");
        }
        Ok(())
    }
}

/// Data of the environments optimized so far, in time order. Stored in
/// model space (each environment normalized on its own).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskArchive {
    tasks: Vec<(usize, Dataset)>,
}

impl TaskArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends environment `t`. Rejects empty data and out-of-order steps.
    pub fn push(&mut self, t: usize, data: Dataset) -> Result<()> {
        if data.is_empty() {
            return Err(Error::Empty("archived environment"));
        }
        if let Some(&(last, _)) = self.tasks.last() {
            if t <= last {
                return Err(Error::Invalid(format!(
                    "environment {t} archived after environment {last}"
                )));
            }
        }
        self.tasks.push((t, data));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn time_steps(&self) -> Vec<usize> {
        self.tasks.iter().map(|(t, _)| *t).collect()
    }

    pub fn get(&self, i: usize) -> &Dataset {
        &self.tasks[i].1
    }

    pub fn iter(&self) -> impl Iterator<Item = &Dataset> {
        self.tasks.iter().map(|(_, d)| d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaRecord {
    pub batch: usize,
    /// Meta-loss averaged over the batches executed so far.
    pub al_b: f64,
    /// Meta-loss of this batch alone.
    pub meta_loss: f64,
    /// Parameters after this batch's update (empty when snapshots are off).
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetaTrace {
    pub records: Vec<MetaRecord>,
}

impl MetaTrace {
    pub fn al_b(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.al_b).collect()
    }

    /// CSV with columns `batch, al_b` followed by one column per parameter.
    pub fn to_csv(&self, param_names: &[String]) -> String {
        let mut out = String::from("batch,al_b");
        for name in param_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{}", r.batch, r.al_b));
            for v in &r.params {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// One inner gradient step `θ' = θ - α ∇L(θ, support)`.
pub fn inner_step(theta: &SurrogateParams, support: &Dataset, alpha: f64) -> Result<SurrogateParams> {
    let g = theta.loss_grad(support)?;
    let v: Vec<f64> = theta
        .to_vec()
        .iter()
        .zip(&g)
        .map(|(t, gi)| t - alpha * gi)
        .collect();
    theta.with_vec(&v)
}

/// Summed query loss of the adapted parameters over the tasks.
pub fn meta_loss(theta: &SurrogateParams, tasks: &[(Dataset, Dataset)], alpha: f64) -> Result<f64> {
    if tasks.is_empty() {
        return Err(Error::Empty("meta-batch"));
    }
    tasks.iter().try_fold(0.0, |acc, (support, query)| {
        let adapted = inner_step(theta, support, alpha)?;
        Ok(acc + adapted.loss(query)?)
    })
}

/// Meta-loss and its gradient with respect to θ.
///
/// First order: the query gradient at θ' stands in for the gradient with
/// respect to θ. Exact (GPR only): `(I - α H_support(θ)) ∇L_query(θ')`.
pub fn meta_loss_and_grad(
    theta: &SurrogateParams,
    tasks: &[(Dataset, Dataset)],
    alpha: f64,
    first_order: bool,
) -> Result<(f64, Vec<f64>)> {
    if tasks.is_empty() {
        return Err(Error::Empty("meta-batch"));
    }
    let gp = match (theta, first_order) {
        (_, true) => None,
        (SurrogateParams::Gpr(p), false) => Some(*p),
        (SurrogateParams::Nn(_), false) => {
            return Err(Error::Config(
                "exact second-order meta-gradient is only available for GPR".into(),
            ))
        }
    };
    let mut total = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for (support, query) in tasks {
        let adapted = inner_step(theta, support, alpha)?;
        let (lq, gq) = adapted.loss_and_grad(query)?;
        total += lq;
        match gp {
            None => grad.iter_mut().zip(&gq).for_each(|(a, b)| *a += b),
            Some(p) => {
                let h = gpr::loss_hessian(&p, support)?;
                for i in 0..3 {
                    let hg: f64 = (0..3).map(|j| h[i][j] * gq[j]).sum();
                    grad[i] += gq[i] - alpha * hg;
                }
            }
        }
    }
    Ok((total, grad))
}

/// Gradient-descent or Adam state over a flat parameter vector.
struct Stepper {
    kind: MetaOptimizer,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Stepper {
    fn new(kind: MetaOptimizer, lr: f64, len: usize) -> Self {
        Self {
            kind,
            lr,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, theta: &[f64], grad: &[f64]) -> Vec<f64> {
        match self.kind {
            MetaOptimizer::Sgd => theta
                .iter()
                .zip(grad)
                .map(|(t, g)| t - self.lr * g)
                .collect(),
            MetaOptimizer::Adam => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                self.t += 1;
                let c1 = 1.0 - B1.powi(self.t);
                let c2 = 1.0 - B2.powi(self.t);
                theta
                    .iter()
                    .zip(grad)
                    .enumerate()
                    .map(|(i, (t, g))| {
                        self.m[i] = B1 * self.m[i] + (1.0 - B1) * g;
                        self.v[i] = B2 * self.v[i] + (1.0 - B2) * g * g;
                        t - self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8)
                    })
                    .collect()
            }
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Learns initial surrogate parameters from the archive.
///
/// Runs until `max_epochs` batches, or until both the relative parameter
/// change and the relative meta-loss change fall below `convergence_tol`.
pub fn meta_learn(
    archive: &TaskArchive,
    config: &MetaConfig,
    theta_init: &SurrogateParams,
    rng: &mut Rng,
) -> Result<(SurrogateParams, MetaTrace)> {
    config.validate()?;
    if archive.is_empty() {
        return Err(Error::Empty("task archive"));
    }
    let m = config.tasks_per_batch.min(archive.len());
    let mut theta = theta_init.clone();
    let mut stepper = Stepper::new(config.optimizer, config.outer_lr, theta.len());
    let mut trace = MetaTrace::default();
    let mut cumulative = 0.0;
    let mut prev_loss: Option<f64> = None;

    for b in 1..=config.max_epochs {
        let mut tasks = Vec::with_capacity(m);
        for _ in 0..m {
            let env = rng.random_range(0..archive.len());
            tasks.push(archive.get(env).sample_split(config.few_shot_k, rng)?);
        }
        let (loss, grad) = meta_loss_and_grad(&theta, &tasks, config.inner_lr, config.first_order)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            break;
        }
        let old = theta.to_vec();
        let new = stepper.step(&old, &grad);
        let next = theta.with_vec(&new)?;

        cumulative += loss;
        trace.records.push(MetaRecord {
            batch: b,
            al_b: cumulative / b as f64,
            meta_loss: loss,
            params: if config.snapshot_params {
                new.clone()
            } else {
                Vec::new()
            },
        });

        let dtheta = norm(&old.iter().zip(&new).map(|(a, b)| a - b).collect::<Vec<_>>());
        let param_conv = dtheta / norm(&old).max(1.0) < config.convergence_tol;
        let loss_conv = prev_loss
            .map(|p| (loss - p).abs() / p.abs().max(1.0) < config.convergence_tol)
            .unwrap_or(false);
        theta = next;
        if param_conv && loss_conv {
            break;
        }
        prev_loss = Some(loss);
    }
    Ok((theta, trace))
}

/// Fits the surrogate to the current environment's data.
///
/// Starts from `theta_ml` after a change and from `theta_current` otherwise,
/// then descends the full loss with the meta-optimizer family until
/// `adapt_max_iters` steps or until a step improves the loss by less than
/// `adapt_tol`. Never returns parameters with a higher loss than the start.
pub fn adapt(
    data: &Dataset,
    theta_ml: &SurrogateParams,
    theta_current: &SurrogateParams,
    change_detected: bool,
    config: &MetaConfig,
) -> Result<SurrogateParams> {
    if data.is_empty() {
        return Err(Error::Empty("adaptation data"));
    }
    let start = if change_detected {
        theta_ml
    } else {
        theta_current
    };
    let mut theta = start.clone();
    if config.adapt_max_iters == 0 {
        return Ok(theta);
    }
    let (mut loss, mut grad) = theta.loss_and_grad(data)?;
    let mut stepper = Stepper::new(config.optimizer, config.outer_lr, theta.len());
    for _ in 0..config.adapt_max_iters {
        let cand = theta.with_vec(&stepper.step(&theta.to_vec(), &grad))?;
        let Ok((cand_loss, cand_grad)) = cand.loss_and_grad(data) else {
            break;
        };
        if !cand_loss.is_finite() {
            break;
        }
        let improvement = loss - cand_loss;
        if improvement > 0.0 {
            theta = cand;
            loss = cand_loss;
            grad = cand_grad;
        }
        if improvement < config.adapt_tol {
            break;
        }
    }
    Ok(theta)
}
