use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use mlo_core::engine::{run, run_extended_budget, AlgorithmSpec};
use mlo_core::rng::derive_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analyze::analyze;
use crate::config::{config_path, CampaignConfig, Mode};
use crate::store::{cell_stem, extended_dir, load_cell, save_cell, traces_dir, write_atomic, CellRecord};

const RUN_TAG: u64 = 0x52_55_4e;
const PROBLEM_TAG: u64 = 0x4d_50_42;

/// Seed of the optimizer streams for one cell. Algorithms sharing
/// `(n, seed index)` share it, so their comparisons are paired.
pub fn run_seed(campaign_seed: u64, dims: usize, seed_index: usize) -> u64 {
    derive_seed(&[campaign_seed, RUN_TAG, dims as u64, seed_index as u64])
}

/// Seed of the benchmark instance for one cell.
pub fn problem_seed(campaign_seed: u64, dims: usize, seed_index: usize) -> u64 {
    derive_seed(&[campaign_seed, PROBLEM_TAG, dims as u64, seed_index as u64])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ran,
    Reused,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub algorithm: String,
    pub dims: usize,
    pub seed_index: usize,
    pub run_seed: u64,
    pub problem_seed: u64,
    pub extended: bool,
    pub status: CellStatus,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: CampaignConfig,
    pub cells: Vec<CellEntry>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub ran: usize,
    pub reused: usize,
    pub failed: Vec<String>,
}

impl Outcome {
    pub fn success(&self) -> bool {
        self.failed.is_empty()
    }
}

struct Cell {
    spec: AlgorithmSpec,
    dims: usize,
    seed_index: usize,
    /// Reference id for extended-budget cells.
    reference: Option<String>,
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".into()
    }
}

fn execute_cell(config: &CampaignConfig, root: &Path, cell: &Cell) -> CellEntry {
    let id = cell.spec.id();
    let rs = run_seed(config.campaign_seed, cell.dims, cell.seed_index);
    let ps = problem_seed(config.campaign_seed, cell.dims, cell.seed_index);
    let dir = if cell.reference.is_some() {
        extended_dir(root)
    } else {
        traces_dir(root)
    };
    let path = dir.join(format!("{}.json", cell_stem(&id, cell.dims, cell.seed_index)));
    let mut entry = CellEntry {
        algorithm: id.clone(),
        dims: cell.dims,
        seed_index: cell.seed_index,
        run_seed: rs,
        problem_seed: ps,
        extended: cell.reference.is_some(),
        status: CellStatus::Reused,
        seconds: 0.0,
        error: None,
    };
    if load_cell(&path).is_some() {
        return entry;
    }
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(|| -> Result<()> {
        let mut problem = config.problem.clone();
        problem.dims = cell.dims;
        problem.seed = ps;
        let budget = config.budget.policy(cell.dims);
        let record = match &cell.reference {
            None => CellRecord {
                algorithm: id.clone(),
                dims: cell.dims,
                seed_index: cell.seed_index,
                run_seed: rs,
                problem_seed: ps,
                extended_counts: None,
                reference: None,
                trace: run(&problem, &cell.spec, &budget, rs)?,
            },
            Some(reference) => {
                let ref_path = traces_dir(root)
                    .join(format!("{}.json", cell_stem(reference, cell.dims, cell.seed_index)));
                let base = load_cell(&ref_path)
                    .ok_or_else(|| anyhow!("reference trace {} is missing", ref_path.display()))?;
                let targets: Vec<f64> = base.trace.envs.iter().map(|e| e.best_y).collect();
                let ext = run_extended_budget(&problem, &cell.spec, &budget, &targets, rs)?;
                CellRecord {
                    algorithm: id.clone(),
                    dims: cell.dims,
                    seed_index: cell.seed_index,
                    run_seed: rs,
                    problem_seed: ps,
                    extended_counts: Some(ext.counts),
                    reference: Some(reference.clone()),
                    trace: ext.trace,
                }
            }
        };
        save_cell(&dir, &record)
    }));
    entry.seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(Ok(())) => entry.status = CellStatus::Ran,
        Ok(Err(e)) => {
            entry.status = CellStatus::Failed;
            entry.error = Some(format!("{e:#}"));
        }
        Err(p) => {
            entry.status = CellStatus::Failed;
            entry.error = Some(panic_message(p));
        }
    }
    match entry.status {
        CellStatus::Failed => log::error!(
            "{id} n={} seed={} failed: {}",
            cell.dims,
            cell.seed_index,
            entry.error.as_deref().unwrap_or("")
        ),
        _ => log::info!(
            "{id} n={} seed={} done in {:.1}s",
            cell.dims,
            cell.seed_index,
            entry.seconds
        ),
    }
    entry
}

fn run_cells(config: &CampaignConfig, root: &Path, cells: &[Cell]) -> Result<Vec<CellEntry>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .context("building the worker pool")?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|c| execute_cell(config, root, c))
            .collect()
    }))
}

/// Runs every (algorithm, dimension, seed) cell, then the analysis.
///
/// Cells whose trace already exists are skipped, so an interrupted campaign
/// resumes where it stopped. A failing cell is logged and recorded in the
/// manifest; the others proceed.
pub fn run_campaign(config: &CampaignConfig) -> Result<Outcome> {
    config.validate()?;
    let root = config.output_dir.clone();
    std::fs::create_dir_all(traces_dir(&root))
        .with_context(|| format!("creating {}", root.display()))?;
    let start = Instant::now();
    let algos = config.expanded_algorithms();

    let mut cells = Vec::new();
    for &n in &config.dims {
        for spec in &algos {
            for i in 0..config.seeds {
                cells.push(Cell {
                    spec: spec.clone(),
                    dims: n,
                    seed_index: i,
                    reference: None,
                });
            }
        }
    }
    let mut entries = run_cells(config, &root, &cells)?;

    if config.mode == Mode::BudgetRatio {
        let reference = config.reference_id().unwrap_or_default();
        let ext: Vec<Cell> = cells
            .iter()
            .filter(|c| c.spec.id() != reference)
            .map(|c| Cell {
                spec: c.spec.clone(),
                dims: c.dims,
                seed_index: c.seed_index,
                reference: Some(reference.clone()),
            })
            .collect();
        entries.extend(run_cells(config, &root, &ext)?);
    }

    let mut outcome = Outcome::default();
    for e in &entries {
        match e.status {
            CellStatus::Ran => outcome.ran += 1,
            CellStatus::Reused => outcome.reused += 1,
            CellStatus::Failed => outcome.failed.push(format!(
                "{} n={} seed={}{}",
                e.algorithm,
                e.dims,
                e.seed_index,
                if e.extended { " (extended)" } else { "" }
            )),
        }
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        cells: entries,
        seconds: start.elapsed().as_secs_f64(),
    };
    write_atomic(&config_path(&root), &serde_json::to_vec_pretty(&manifest)?)?;
    analyze(&root, config)?;
    Ok(outcome)
}

pub fn load_manifest(root: &Path) -> Result<Manifest> {
    let path = config_path(root);
    let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}
