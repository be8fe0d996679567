use serde::{Deserialize, Serialize};

use super::stats::{a12, scott_knott, wilcoxon_signed_rank, EffectSize, Verdict, WilcoxonMethod};
use crate::error::Result;

/// Metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub algorithm: String,
    pub dims: usize,
    pub seed: usize,
    pub e_bbc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_c: Option<f64>,
    pub env_errors: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
}

impl MetricTable {
    /// Algorithms in order of first appearance.
    pub fn algorithms(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.algorithm) {
                out.push(r.algorithm.clone());
            }
        }
        out
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.rows.iter().map(|r| r.dims).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// `(seed, value)` pairs of one cell, sorted by seed.
    pub fn sample(
        &self,
        algorithm: &str,
        dims: usize,
        metric: impl Fn(&MetricRow) -> Option<f64>,
    ) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self
            .rows
            .iter()
            .filter(|r| r.algorithm == algorithm && r.dims == dims)
            .filter_map(|r| metric(r).map(|m| (r.seed, m)))
            .collect();
        v.sort_by_key(|p| p.0);
        v
    }

    pub fn mean(&self, algorithm: &str, dims: usize, metric: impl Fn(&MetricRow) -> Option<f64>) -> Option<f64> {
        let s = self.sample(algorithm, dims, metric);
        (!s.is_empty()).then(|| s.iter().map(|p| p.1).sum::<f64>() / s.len() as f64)
    }

    /// `algo,n,seed,e_bbc,rho_c,env_errors` with per-environment errors
    /// joined by `;`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("algo,n,seed,e_bbc,rho_c,env_errors\n");
        let mut rows: Vec<&MetricRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            (a.dims, &a.algorithm, a.seed).cmp(&(b.dims, &b.algorithm, b.seed))
        });
        for r in rows {
            let errs: Vec<String> = r.env_errors.iter().map(|e| e.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.algorithm,
                r.dims,
                r.seed,
                r.e_bbc,
                r.rho_c.map(|v| v.to_string()).unwrap_or_default(),
                errs.join(";")
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonRow {
    /// Dimension, or `all` for the pooled comparison.
    pub scope: String,
    pub a: String,
    pub b: String,
    pub pairs: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p: f64,
    /// `a` compared with `b` on the metric.
    pub verdict: Verdict,
    pub method: WilcoxonMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A12Row {
    pub scope: String,
    pub a: String,
    pub b: String,
    pub a12: f64,
    pub class: EffectSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub scope: String,
    pub algorithm: String,
    pub mean: f64,
    pub rank: usize,
}

/// Pairwise tests and Scott–Knott ranks for one metric, per dimension and
/// pooled over dimensions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub wilcoxon: Vec<WilcoxonRow>,
    pub a12: Vec<A12Row>,
    pub ranks: Vec<RankRow>,
}

impl TestReport {
    /// Builds the report. Samples are paired by seed; Wilcoxon rows need at
    /// least 5 common seeds. Lower metric values rank first.
    pub fn build(
        table: &MetricTable,
        metric: impl Fn(&MetricRow) -> Option<f64> + Copy,
        level: f64,
    ) -> Result<Self> {
        let algos = table.algorithms();
        let dims = table.dims();
        let mut report = TestReport::default();
        let mut scopes: Vec<(String, Vec<usize>)> =
            dims.iter().map(|d| (d.to_string(), vec![*d])).collect();
        if dims.len() > 1 {
            scopes.push(("all".into(), dims.clone()));
        }
        for (scope, ds) in &scopes {
            // Pair key: (dims, seed).
            let samples: Vec<(String, Vec<((usize, usize), f64)>)> = algos
                .iter()
                .map(|a| {
                    let v = ds
                        .iter()
                        .flat_map(|&d| {
                            table
                                .sample(a, d, metric)
                                .into_iter()
                                .map(move |(s, m)| ((d, s), m))
                        })
                        .collect();
                    (a.clone(), v)
                })
                .filter(|(_, v): &(String, Vec<_>)| !v.is_empty())
                .collect();

            for i in 0..samples.len() {
                for j in (i + 1)..samples.len() {
                    let (na, sa) = &samples[i];
                    let (nb, sb) = &samples[j];
                    let va: Vec<f64> = sa.iter().map(|p| p.1).collect();
                    let vb: Vec<f64> = sb.iter().map(|p| p.1).collect();
                    let e = a12(&va, &vb)?;
                    report.a12.push(A12Row {
                        scope: scope.clone(),
                        a: na.clone(),
                        b: nb.clone(),
                        a12: e,
                        class: EffectSize::of(e),
                    });
                    let (pa, pb): (Vec<f64>, Vec<f64>) = sa
                        .iter()
                        .filter_map(|(k, x)| sb.iter().find(|(kb, _)| kb == k).map(|(_, y)| (*x, *y)))
                        .unzip();
                    if pa.len() >= 5 {
                        let w = wilcoxon_signed_rank(&pa, &pb, level)?;
                        report.wilcoxon.push(WilcoxonRow {
                            scope: scope.clone(),
                            a: na.clone(),
                            b: nb.clone(),
                            pairs: pa.len(),
                            w_plus: w.w_plus,
                            w_minus: w.w_minus,
                            p: w.p,
                            verdict: w.verdict,
                            method: w.method,
                        });
                    }
                }
            }

            if !samples.is_empty() {
                let groups: Vec<(String, Vec<f64>)> = samples
                    .iter()
                    .map(|(n, v)| (n.clone(), v.iter().map(|p| p.1).collect()))
                    .collect();
                for ((name, rank), (_, v)) in scott_knott(&groups)?.into_iter().zip(&groups) {
                    report.ranks.push(RankRow {
                        scope: scope.clone(),
                        algorithm: name,
                        mean: v.iter().sum::<f64>() / v.len() as f64,
                        rank,
                    });
                }
            }
        }
        Ok(report)
    }

    pub fn wilcoxon_csv(&self) -> String {
        let mut out = String::from("scope,a,b,pairs,w_plus,w_minus,p,verdict,method\n");
        for r in &self.wilcoxon {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.scope,
                r.a,
                r.b,
                r.pairs,
                r.w_plus,
                r.w_minus,
                r.p,
                verdict_name(r.verdict),
                method_name(r.method)
            ));
        }
        out
    }

    pub fn a12_csv(&self) -> String {
        let mut out = String::from("scope,a,b,a12,class\n");
        for r in &self.a12 {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.scope,
                r.a,
                r.b,
                r.a12,
                r.class.name()
            ));
        }
        out
    }

    pub fn ranks_csv(&self) -> String {
        let mut out = String::from("scope,algo,mean,rank\n");
        for r in &self.ranks {
            out.push_str(&format!("{},{},{},{}\n", r.scope, r.algorithm, r.mean, r.rank));
        }
        out
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Greater => "greater",
        Verdict::Less => "less",
        Verdict::Tie => "tie",
    }
}

fn method_name(m: WilcoxonMethod) -> &'static str {
    match m {
        WilcoxonMethod::Exact => "exact",
        WilcoxonMethod::Normal => "normal",
        WilcoxonMethod::Degenerate => "all-zero",
    }
}
