use serde::{Deserialize, Serialize};

use super::objective::Objective;
use super::trace::{EnvRecord, FeRecord, RunTrace};
use super::{AlgorithmSpec, BudgetPolicy, Family};
use crate::error::{Error, Result};
use crate::metalearn::{adapt, meta_learn, MetaTrace, TaskArchive};
use crate::mpb::MpbConfig;
use crate::optim::{
    ea_step, environmental_selection, identify_promising, latin_hypercube, maximize_acquisition,
    ucb, Population,
};
use crate::rng::{stream, Stream};
use crate::surrogates::{Dataset, FittedSurrogate, Observation, SurrogateKind, SurrogateParams};

/// Result of an extended-budget run: FEs needed per environment to reach the
/// target (capped at the extended limit) and the full trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedRun {
    pub counts: Vec<usize>,
    pub trace: RunTrace,
}

fn require(spec: &AlgorithmSpec, ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{} cannot be run as {what}",
            spec.id()
        )))
    }
}

pub fn run_mlbo(
    problem: &MpbConfig,
    spec: &AlgorithmSpec,
    budget: &BudgetPolicy,
    seed: u64,
) -> Result<RunTrace> {
    require(spec, spec.family == Family::Mlbo, "MLBO")?;
    execute(problem, spec, budget, seed, None)
}

pub fn run_mlddeo(
    problem: &MpbConfig,
    spec: &AlgorithmSpec,
    budget: &BudgetPolicy,
    seed: u64,
) -> Result<RunTrace> {
    require(spec, spec.family == Family::Mlddeo, "MLDDEO")?;
    execute(problem, spec, budget, seed, None)
}

pub fn run_baseline(
    problem: &MpbConfig,
    spec: &AlgorithmSpec,
    budget: &BudgetPolicy,
    seed: u64,
) -> Result<RunTrace> {
    require(spec, !spec.family.uses_meta_learning(), "a baseline")?;
    execute(problem, spec, budget, seed, None)
}

/// Runs any family.
pub fn run(
    problem: &MpbConfig,
    spec: &AlgorithmSpec,
    budget: &BudgetPolicy,
    seed: u64,
) -> Result<RunTrace> {
    execute(problem, spec, budget, seed, None)
}

/// Runs `spec` with the per-environment cap raised to the extended limit and
/// counts, per environment, the FEs needed for the best-so-far to reach
/// `targets[t]`. Environments that never reach it count the full extended
/// cap. Only the first `max_fe_per_env` observations of an environment are
/// carried into later environments, so the run stays in lockstep with an
/// ordinary run of the same spec and seed.
pub fn run_extended_budget(
    problem: &MpbConfig,
    spec: &AlgorithmSpec,
    budget: &BudgetPolicy,
    targets: &[f64],
    seed: u64,
) -> Result<ExtendedRun> {
    if targets.len() != problem.num_environments {
        return Err(Error::Dimension {
            expected: problem.num_environments,
            found: targets.len(),
        });
    }
    let trace = execute(problem, spec, budget, seed, Some(targets))?;
    let counts = trace
        .envs
        .iter()
        .map(|e| e.fe_to_target.unwrap_or(budget.extended_cap()))
        .collect();
    Ok(ExtendedRun { counts, trace })
}

fn fitness(model: &FittedSurrogate, w: f64, x: &[f64]) -> f64 {
    let p = model.predict(x);
    match model.kind() {
        SurrogateKind::Gpr => ucb(p, w),
        SurrogateKind::Nn => p.mean,
    }
}

struct EnvState {
    data: Dataset,
    best_y: f64,
    best_x: Vec<f64>,
    fe_to_best: usize,
    fe_to_target: Option<usize>,
}

fn execute(
    problem: &MpbConfig,
    spec: &AlgorithmSpec,
    budget: &BudgetPolicy,
    seed: u64,
    targets: Option<&[f64]>,
) -> Result<RunTrace> {
    problem.validate()?;
    spec.validate()?;
    budget.validate()?;

    let n = problem.dims;
    let lower = problem.lower();
    let upper = problem.upper();
    let cap = budget.max_fe_per_env;
    let hard_cap = if targets.is_some() {
        budget.extended_cap()
    } else {
        cap
    };
    let xi = spec.xi();
    let w = spec.acquisition.w;
    let mut meta_cfg = spec.meta.clone();
    if spec.surrogate == SurrogateKind::Nn {
        meta_cfg.snapshot_params = false;
    }

    let theta0 = SurrogateParams::initial(spec.surrogate, n, &mut stream(seed, Stream::ModelInit, 0));
    let mut objective = Objective::new(problem, hard_cap)?;
    let mut archive = TaskArchive::new();
    let mut all_data = Dataset::new();
    // Parameters carried across a change by CBO, as of the last adaptation
    // inside the ordinary budget.
    let mut carried = theta0.clone();

    let mut trace = RunTrace {
        algorithm: spec.id(),
        seed,
        dims: n,
        fe_cap: cap,
        truncated: false,
        fes: Vec::new(),
        envs: Vec::new(),
    };

    for t in 0..problem.num_environments {
        if t > 0 {
            objective.change()?;
        }
        let mut meta_trace: Option<MetaTrace> = None;
        let theta_start = match spec.family {
            Family::Mlbo | Family::Mlddeo if t > 0 => {
                let mut rng = stream(seed, Stream::Meta, t);
                match meta_learn(&archive, &meta_cfg, &theta0, &mut rng) {
                    Ok((theta_ml, mt)) if theta_ml.is_finite() => {
                        meta_trace = Some(mt);
                        theta_ml
                    }
                    _ => theta0.clone(),
                }
            }
            Family::Cbo => carried.clone(),
            _ => theta0.clone(),
        };
        let target = targets.map(|v| v[t]);

        let mut env = EnvState {
            data: Dataset::new(),
            best_y: f64::NEG_INFINITY,
            best_x: Vec::new(),
            fe_to_best: 0,
            fe_to_target: None,
        };
        let mut evaluate = |x: Vec<f64>, env: &mut EnvState, trace: &mut RunTrace| -> Result<()> {
            let y = objective.evaluate(&x)?;
            let fe = objective.used_in_env();
            if y > env.best_y {
                env.best_y = y;
                env.best_x = x.clone();
                env.fe_to_best = fe;
            }
            if env.fe_to_target.is_none() && target.is_some_and(|tv| env.best_y >= tv) {
                env.fe_to_target = Some(fe);
            }
            trace.fes.push(FeRecord {
                env: t,
                fe,
                x: x.clone(),
                y_true: y,
                best_so_far: env.best_y,
            });
            env.data.push(Observation { x, t, y });
            Ok(())
        };

        let design = latin_hypercube(
            budget.init_samples,
            &lower,
            &upper,
            &mut stream(seed, Stream::Design, t),
        );
        if budget.init_samples > cap {
            trace.truncated = true;
        }
        for x in design.into_iter().take(cap) {
            evaluate(x, &mut env, &mut trace)?;
        }

        let mut pop_rng = stream(seed, Stream::Population, t);
        let mut search_rng = stream(seed, Stream::Search, t);
        let mut acq_rng = stream(seed, Stream::Acquisition, t);
        let mut population: Option<Population> = None;
        let mut theta = theta_start.clone();
        let mut first = true;

        loop {
            let used = env.data.len();
            let more = used < cap
                || (used < hard_cap && target.is_some_and(|tv| env.best_y < tv));
            if !more || env.data.is_empty() {
                break;
            }
            let raw = training_set(spec.family, &all_data, &env.data);
            let train = raw.normalized(&lower, &upper);
            theta = adapt(&train, &theta_start, &theta, first, &meta_cfg)
                .unwrap_or_else(|_| if first { theta_start.clone() } else { theta.clone() });
            first = false;
            if used < cap {
                carried = theta.clone();
            }
            let model = match theta.fit(&train) {
                Ok(m) => m,
                Err(_) => theta0.fit(&train)?,
            };

            let remaining = hard_cap - used;
            let candidates = match spec.ea {
                None => vec![maximize_acquisition(
                    &model,
                    &spec.acquisition,
                    &lower,
                    &upper,
                    &spec.maximizer,
                    &mut acq_rng,
                )],
                Some(kind) => {
                    let mut score = |x: &[f64]| fitness(&model, w, x);
                    let parents = match population.take() {
                        None => Population::random(
                            kind,
                            &spec.ea_params,
                            &lower,
                            &upper,
                            &mut score,
                            &mut pop_rng,
                        ),
                        Some(mut p) => {
                            p.refresh_fitness(&mut score);
                            p
                        }
                    };
                    let offspring = ea_step(&parents, &spec.ea_params, &mut score, &mut search_rng);
                    let seen: Vec<Vec<f64>> = env.data.xs().map(|x| x.to_vec()).collect();
                    let picks =
                        identify_promising(&parents, &offspring, &model, &spec.acquisition, xi, &seen)?;
                    population = Some(environmental_selection(&parents, &offspring));
                    picks
                }
            };
            for x in candidates.into_iter().take(remaining) {
                evaluate(x, &mut env, &mut trace)?;
            }
        }
        let train_size = training_set(spec.family, &all_data, &env.data).len();

        let (optimum_x, optimum_y) = objective.state().global_optimum();
        trace.envs.push(EnvRecord {
            env: t,
            best_x: env.best_x.clone(),
            best_y: env.best_y,
            optimum_x,
            optimum_y,
            fe_count: objective.used_in_env(),
            fe_to_best: env.fe_to_best,
            fe_to_target: if target.is_some() {
                Some(env.fe_to_target.unwrap_or(hard_cap))
            } else {
                None
            },
            train_size,
            start_params: theta_start,
            final_params: theta,
            meta_trace,
        });

        let kept = Dataset::from_points(env.data.points.iter().take(cap).cloned().collect());
        if spec.family == Family::Cbo {
            for p in &kept.points {
                all_data.push(p.clone());
            }
        }
        if spec.family.uses_meta_learning() && !kept.is_empty() {
            archive.push(t, kept.normalized(&lower, &upper))?;
        }
    }
    Ok(trace)
}

/// Data the surrogate is trained on: the current environment, or for CBO
/// everything collected so far.
fn training_set(family: Family, history: &Dataset, current: &Dataset) -> Dataset {
    if family == Family::Cbo {
        let mut all = history.clone();
        for p in &current.points {
            all.push(p.clone());
        }
        all
    } else {
        current.clone()
    }
}
