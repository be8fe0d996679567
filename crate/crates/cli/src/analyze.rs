use std::collections::HashMap;
use std::path::Path;

use anyhow::Result;
use mlo_core::analysis::{budget_ratio, e_bbc, env_errors, loss_curve, MetricRow, MetricTable, TestReport};
use serde_json::json;

use crate::config::{CampaignConfig, Mode};
use crate::store::{extended_dir, load_all, traces_dir, write_atomic, CellRecord};

/// Metric tables and tests of a campaign.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub table: MetricTable,
    pub ebbc: TestReport,
    pub rho_c: Option<TestReport>,
}

/// Stored cells that belong to `config`, ordered by dimension, algorithm
/// (config order) and seed.
pub fn campaign_cells(root: &Path, config: &CampaignConfig) -> Result<Vec<CellRecord>> {
    let order: Vec<String> = config.expanded_algorithms().iter().map(|a| a.id()).collect();
    let mut cells: Vec<CellRecord> = load_all(&traces_dir(root))?
        .into_iter()
        .filter(|c| {
            order.contains(&c.algorithm) && config.dims.contains(&c.dims) && c.seed_index < config.seeds
        })
        .collect();
    let pos = |a: &str| order.iter().position(|o| o == a).unwrap_or(usize::MAX);
    cells.sort_by_key(|c| (c.dims, pos(&c.algorithm), c.seed_index));
    Ok(cells)
}

pub fn metric_table(root: &Path, config: &CampaignConfig) -> Result<(MetricTable, Vec<CellRecord>)> {
    let cells = campaign_cells(root, config)?;
    let mut extended: HashMap<(String, usize, usize), Vec<usize>> = HashMap::new();
    if config.mode == Mode::BudgetRatio {
        for c in load_all(&extended_dir(root))? {
            if let Some(counts) = c.extended_counts {
                extended.insert((c.algorithm, c.dims, c.seed_index), counts);
            }
        }
    }
    let reference = config.reference_id().unwrap_or_default();
    let mut table = MetricTable::default();
    for c in &cells {
        let rho_c = if config.mode == Mode::BudgetRatio {
            let own = cells
                .iter()
                .find(|r| r.algorithm == reference && r.dims == c.dims && r.seed_index == c.seed_index)
                .map(|r| r.trace.envs.iter().map(|e| e.fe_to_best).collect::<Vec<_>>());
            match own {
                Some(best) if c.algorithm == reference => Some(budget_ratio(&best, &best)?),
                Some(best) => match extended.get(&(c.algorithm.clone(), c.dims, c.seed_index)) {
                    Some(peer) => Some(budget_ratio(peer, &best)?),
                    None => None,
                },
                None => None,
            }
        } else {
            None
        };
        table.rows.push(MetricRow {
            algorithm: c.algorithm.clone(),
            dims: c.dims,
            seed: c.seed_index,
            e_bbc: e_bbc(&c.trace)?,
            rho_c,
            env_errors: env_errors(&c.trace)?,
        });
    }
    Ok((table, cells))
}

fn with_metric(metric: &str, csv: &str) -> String {
    let mut out = String::new();
    for (i, line) in csv.lines().enumerate() {
        if i == 0 {
            out.push_str("metric,");
        } else {
            out.push_str(metric);
            out.push(',');
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

fn loss_curves_csv(cells: &[CellRecord]) -> String {
    let mut out = String::from("algo,n,seed,fe,L\n");
    for c in cells {
        for p in loss_curve(&c.trace) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.algorithm, c.dims, c.seed_index, p.fe, p.loss
            ));
        }
    }
    out
}

fn meta_trace_csv(cells: &[CellRecord]) -> String {
    let mut out = String::from("algo,n,seed,env,batch,al_b,meta_loss,params\n");
    for c in cells {
        for e in &c.trace.envs {
            let Some(mt) = &e.meta_trace else { continue };
            for r in &mt.records {
                let params: Vec<String> = r.params.iter().map(|v| v.to_string()).collect();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    c.algorithm,
                    c.dims,
                    c.seed_index,
                    e.env,
                    r.batch,
                    r.al_b,
                    r.meta_loss,
                    params.join(";")
                ));
            }
        }
    }
    out
}

fn schema() -> serde_json::Value {
    json!({
        "metrics.csv": {
            "algo": "algorithm id",
            "n": "problem dimension",
            "seed": "seed index within the campaign",
            "e_bbc": "mean over environments of (global optimum - best found before the change)",
            "rho_c": "budget ratio against the reference algorithm (budget_ratio mode only)",
            "env_errors": "per-environment errors joined by ';'"
        },
        "wilcoxon.csv": {
            "metric": "e_bbc or rho_c",
            "scope": "dimension, or 'all' for samples pooled over dimensions",
            "a": "first algorithm", "b": "second algorithm",
            "pairs": "number of seed-paired observations",
            "w_plus": "sum of ranks of positive differences a - b",
            "w_minus": "sum of ranks of negative differences",
            "p": "two-sided p-value; zero differences dropped, tied ranks averaged",
            "verdict": "greater / less: a's metric is significantly larger / smaller than b's; tie otherwise",
            "method": "exact (at most 25 non-zero pairs), normal (continuity and tie corrected) or all-zero"
        },
        "a12.csv": {
            "metric": "e_bbc or rho_c",
            "scope": "dimension or 'all'",
            "a": "first algorithm", "b": "second algorithm",
            "a12": "P(a > b) + 0.5 P(a = b)",
            "class": "large (|A12-0.5| >= 0.21), medium (>= 0.14), small (>= 0.06) or equivalent"
        },
        "scott_knott.csv": {
            "metric": "e_bbc or rho_c",
            "scope": "dimension or 'all'",
            "algo": "algorithm id",
            "mean": "mean metric value",
            "rank": "Scott-Knott cluster, 1 = lowest mean"
        },
        "loss_curves.csv": {
            "algo": "algorithm id", "n": "dimension", "seed": "seed index",
            "fe": "1-based FE index over the whole run",
            "L": "environment optimum minus best-so-far in the environment"
        },
        "meta_trace.csv": {
            "algo": "algorithm id", "n": "dimension", "seed": "seed index",
            "env": "environment whose change triggered the meta-learning",
            "batch": "1-based meta-batch",
            "al_b": "running mean of the meta-loss over batches so far",
            "meta_loss": "meta-loss of this batch",
            "params": "parameter snapshot after the batch, joined by ';' (empty when not recorded)"
        }
    })
}

/// Recomputes every table from the stored traces and writes them to `root`.
pub fn analyze(root: &Path, config: &CampaignConfig) -> Result<Analysis> {
    let (table, cells) = metric_table(root, config)?;
    let ebbc = TestReport::build(&table, |r| Some(r.e_bbc), config.level)?;
    let rho_c = if config.mode == Mode::BudgetRatio {
        Some(TestReport::build(&table, |r| r.rho_c, config.level)?)
    } else {
        None
    };

    write_atomic(&root.join("metrics.csv"), table.to_csv().as_bytes())?;
    let mut wil = with_metric("e_bbc", &ebbc.wilcoxon_csv());
    let mut a12 = with_metric("e_bbc", &ebbc.a12_csv());
    let mut sk = with_metric("e_bbc", &ebbc.ranks_csv());
    if let Some(r) = &rho_c {
        for (acc, body) in [
            (&mut wil, r.wilcoxon_csv()),
            (&mut a12, r.a12_csv()),
            (&mut sk, r.ranks_csv()),
        ] {
            let extra = with_metric("rho_c", &body);
            acc.push_str(extra.split_once('\n').map(|x| x.1).unwrap_or(""));
        }
    }
    write_atomic(&root.join("wilcoxon.csv"), wil.as_bytes())?;
    write_atomic(&root.join("a12.csv"), a12.as_bytes())?;
    write_atomic(&root.join("scott_knott.csv"), sk.as_bytes())?;
    write_atomic(&root.join("loss_curves.csv"), loss_curves_csv(&cells).as_bytes())?;
    write_atomic(&root.join("meta_trace.csv"), meta_trace_csv(&cells).as_bytes())?;
    write_atomic(
        &root.join("schema.json"),
        &serde_json::to_vec_pretty(&schema())?,
    )?;
    Ok(Analysis { table, ebbc, rho_c })
}
