use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
struct MetricLine {
    algo: String,
    n: usize,
    #[allow(dead_code)]
    seed: usize,
    e_bbc: f64,
    rho_c: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct WilcoxonLine {
    metric: String,
    scope: String,
    a: String,
    b: String,
    p: f64,
    verdict: String,
}

#[derive(Debug, Deserialize)]
struct A12Line {
    metric: String,
    scope: String,
    a: String,
    b: String,
    a12: f64,
    class: String,
}

#[derive(Debug, Deserialize)]
struct RankLine {
    metric: String,
    scope: String,
    algo: String,
    rank: usize,
}

fn read<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for r in rd.deserialize() {
        out.push(r?);
    }
    Ok(out)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// Outcome for `a` when lower metric values are better.
fn outcome(verdict: &str) -> &'static str {
    match verdict {
        "less" => "win",
        "greater" => "loss",
        _ => "tie",
    }
}

/// Human-readable summary of a finished campaign directory.
pub fn report(dir: &Path) -> Result<String> {
    let metrics_path = dir.join("metrics.csv");
    if !metrics_path.exists() {
        bail!("missing artifact: {}", metrics_path.display());
    }
    let metrics: Vec<MetricLine> = read(&metrics_path)?;
    let mut missing = Vec::new();
    let mut load = |name: &str| -> Option<std::path::PathBuf> {
        let p = dir.join(name);
        if p.exists() {
            Some(p)
        } else {
            missing.push(name.to_string());
            None
        }
    };
    let wilcoxon: Vec<WilcoxonLine> = match load("wilcoxon.csv") {
        Some(p) => read(&p)?,
        None => Vec::new(),
    };
    let a12: Vec<A12Line> = match load("a12.csv") {
        Some(p) => read(&p)?,
        None => Vec::new(),
    };
    let ranks: Vec<RankLine> = match load("scott_knott.csv") {
        Some(p) => read(&p)?,
        None => Vec::new(),
    };

    let mut algos: Vec<String> = Vec::new();
    let mut dims: Vec<usize> = Vec::new();
    for m in &metrics {
        if !algos.contains(&m.algo) {
            algos.push(m.algo.clone());
        }
        if !dims.contains(&m.n) {
            dims.push(m.n);
        }
    }
    dims.sort_unstable();
    let with_rho = metrics.iter().any(|m| m.rho_c.is_some());

    let mut out = String::new();
    for &n in &dims {
        writeln!(out, "n = {n}")?;
        write!(out, "  {:<28} {:>22}", "algorithm", "E_BBC mean ± std")?;
        if with_rho {
            write!(out, " {:>20}", "rho_c mean ± std")?;
        }
        writeln!(out, " {:>8}", "SK rank")?;
        for a in &algos {
            let rows: Vec<&MetricLine> = metrics.iter().filter(|m| &m.algo == a && m.n == n).collect();
            if rows.is_empty() {
                continue;
            }
            let (m, s) = mean_std(&rows.iter().map(|r| r.e_bbc).collect::<Vec<_>>());
            write!(out, "  {a:<28} {:>22}", format!("{m:.4} ± {s:.4}"))?;
            if with_rho {
                let rho: Vec<f64> = rows.iter().filter_map(|r| r.rho_c).collect();
                let cell = if rho.is_empty() {
                    "-".to_string()
                } else {
                    let (m, s) = mean_std(&rho);
                    format!("{m:.4} ± {s:.4}")
                };
                write!(out, " {cell:>20}")?;
            }
            let rank = ranks
                .iter()
                .find(|r| r.metric == "e_bbc" && r.scope == n.to_string() && &r.algo == a)
                .map(|r| r.rank.to_string())
                .unwrap_or_else(|| "-".into());
            writeln!(out, " {rank:>8}")?;
        }
        let scope = n.to_string();
        let pairs: Vec<&WilcoxonLine> = wilcoxon.iter().filter(|w| w.scope == scope).collect();
        let effects: Vec<&A12Line> = a12.iter().filter(|e| e.scope == scope).collect();
        if algos.len() > 1 && (!pairs.is_empty() || !effects.is_empty()) {
            writeln!(out, "  pairwise (a vs b):")?;
            for e in &effects {
                let w = pairs
                    .iter()
                    .find(|w| w.metric == e.metric && w.a == e.a && w.b == e.b);
                let test = match w {
                    Some(w) => format!("{} (p = {:.4})", outcome(&w.verdict), w.p),
                    None => "no test (fewer than 5 pairs)".into(),
                };
                writeln!(
                    out,
                    "    [{}] {} vs {}: {test}, A12 = {:.3} ({})",
                    e.metric, e.a, e.b, e.a12, e.class
                )?;
            }
        }
        writeln!(out)?;
    }
    let pooled: Vec<&RankLine> = ranks.iter().filter(|r| r.scope == "all").collect();
    if !pooled.is_empty() {
        writeln!(out, "Scott-Knott ranks pooled over dimensions:")?;
        for r in pooled {
            writeln!(out, "  [{}] {:<28} {}", r.metric, r.algo, r.rank)?;
        }
    }
    for m in missing {
        writeln!(out, "missing artifact: {m}")?;
    }
    Ok(out)
}
