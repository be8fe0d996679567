use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Outcome of a two-sided test, read as "a compared with b".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Greater,
    Less,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WilcoxonMethod {
    /// Exact null distribution of the signed-rank statistic.
    Exact,
    /// Normal approximation with continuity and tie correction.
    Normal,
    /// Every difference was zero.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    pub w_plus: f64,
    pub w_minus: f64,
    /// Pairs left after dropping zero differences.
    pub n_effective: usize,
    pub p: f64,
    pub verdict: Verdict,
    pub method: WilcoxonMethod,
}

/// Largest effective sample for which the exact distribution is used.
pub const EXACT_LIMIT: usize = 25;

/// Average ranks (1-based) of `v`, ties sharing the mean of their positions.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Paired two-sided Wilcoxon signed-rank test of `a - b`.
///
/// Zero differences are dropped and tied magnitudes get averaged ranks.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], level: f64) -> Result<Wilcoxon> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.len() < 5 {
        return Err(Error::Invalid(format!(
            "need at least 5 pairs, got {}",
            a.len()
        )));
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite difference".into()));
    }
    let n = d.len();
    if n == 0 {
        return Ok(Wilcoxon {
            w_plus: 0.0,
            w_minus: 0.0,
            n_effective: 0,
            p: 1.0,
            verdict: Verdict::Tie,
            method: WilcoxonMethod::Degenerate,
        });
    }
    let mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&mags);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;

    let (p, method) = if n <= EXACT_LIMIT {
        (exact_p(&ranks, w_plus), WilcoxonMethod::Exact)
    } else {
        (normal_p(&mags, n, w_plus), WilcoxonMethod::Normal)
    };
    let p = p.clamp(f64::MIN_POSITIVE, 1.0);
    let verdict = if p < level && w_plus != w_minus {
        if w_plus > w_minus {
            Verdict::Greater
        } else {
            Verdict::Less
        }
    } else {
        Verdict::Tie
    };
    Ok(Wilcoxon {
        w_plus,
        w_minus,
        n_effective: n,
        p,
        verdict,
        method,
    })
}

/// Two-sided p-value from the exact permutation distribution. Average ranks
/// are multiples of 1/2, so doubled ranks index an integer table.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let all: f64 = counts.iter().sum();
    let w = (2.0 * w_plus).round() as usize;
    let le: f64 = counts[..=w].iter().sum::<f64>() / all;
    let ge: f64 = counts[w..].iter().sum::<f64>() / all;
    (2.0 * le.min(ge)).min(1.0)
}

fn normal_p(mags: &[f64], n: usize, w_plus: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted = mags.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    (2.0 * (1.0 - std_normal.cdf(z))).min(1.0)
}

/// Vargha–Delaney effect size class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectSize {
    Equivalent,
    Small,
    Medium,
    Large,
}

impl EffectSize {
    pub fn of(a12: f64) -> Self {
        let d = (a12 - 0.5).abs();
        if d >= 0.21 {
            Self::Large
        } else if d >= 0.14 {
            Self::Medium
        } else if d >= 0.06 {
            Self::Small
        } else {
            Self::Equivalent
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Equivalent => "equivalent",
            Self::Small => "small",
            Self::Medium => "medium",
            Self::Large => "large",
        }
    }
}

/// Probability that a draw from `a` exceeds one from `b`, ties counting half.
pub fn a12(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("A12 sample"));
    }
    let mut wins = 0.0;
    for x in a {
        for y in b {
            if x > y {
                wins += 1.0;
            } else if x == y {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (a.len() * b.len()) as f64)
}

struct Group {
    mean: f64,
    len: usize,
}

/// Scott–Knott clustering of named samples, lower means ranked first.
///
/// Groups are ordered by mean and split recursively at the cut maximizing the
/// between-cluster sum of squares of the means. A split is kept when
/// `λ = π / (2(π - 2)) · B0 / σ0²` exceeds the 95% quantile of χ² with
/// `g / (π - 2)` degrees of freedom. Returns `(name, rank)` in input order;
/// ranks are contiguous from 1.
pub fn scott_knott(groups: &[(String, Vec<f64>)]) -> Result<Vec<(String, usize)>> {
    if groups.is_empty() {
        return Err(Error::Empty("Scott-Knott groups"));
    }
    if groups.iter().any(|(_, v)| v.is_empty()) {
        return Err(Error::Empty("Scott-Knott group sample"));
    }
    let stats: Vec<Group> = groups
        .iter()
        .map(|(_, v)| Group {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            len: v.len(),
        })
        .collect();
    let dof: usize = groups.iter().map(|(_, v)| v.len() - 1).sum();
    let sse: f64 = groups
        .iter()
        .zip(&stats)
        .map(|((_, v), g)| v.iter().map(|y| (y - g.mean).powi(2)).sum::<f64>())
        .sum();
    let pooled = if dof > 0 { sse / dof as f64 } else { 0.0 };

    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| stats[a].mean.total_cmp(&stats[b].mean).then(a.cmp(&b)));

    let mut clusters = Vec::new();
    split(&order, &stats, pooled, dof, &mut clusters);

    let mut rank = vec![0; groups.len()];
    for (r, cluster) in clusters.iter().enumerate() {
        for &i in cluster {
            rank[i] = r + 1;
        }
    }
    Ok(groups
        .iter()
        .zip(rank)
        .map(|((name, _), r)| (name.clone(), r))
        .collect())
}

fn split(idx: &[usize], stats: &[Group], pooled: f64, dof: usize, out: &mut Vec<Vec<usize>>) {
    let g = idx.len();
    if g < 2 {
        out.push(idx.to_vec());
        return;
    }
    let means: Vec<f64> = idx.iter().map(|&i| stats[i].mean).collect();
    let grand = means.iter().sum::<f64>() / g as f64;
    let mut best = (0.0, 0);
    for k in 1..g {
        let (left, right) = means.split_at(k);
        let ml = left.iter().sum::<f64>() / k as f64;
        let mr = right.iter().sum::<f64>() / (g - k) as f64;
        let b0 = k as f64 * (ml - grand).powi(2) + (g - k) as f64 * (mr - grand).powi(2);
        if b0 > best.0 {
            best = (b0, k);
        }
    }
    let (b0, cut) = best;
    if cut == 0 {
        out.push(idx.to_vec());
        return;
    }
    let between: f64 = means.iter().map(|m| (m - grand).powi(2)).sum();
    let mean_var = idx
        .iter()
        .map(|&i| pooled / stats[i].len as f64)
        .sum::<f64>()
        / g as f64;
    let nu = dof as f64;
    let sigma2 = (between + nu * mean_var) / (g as f64 + nu);
    let accept = if sigma2 > 0.0 {
        let lambda = PI / (2.0 * (PI - 2.0)) * b0 / sigma2;
        let df = g as f64 / (PI - 2.0);
        let threshold = ChiSquared::new(df)
            .map(|c| c.inverse_cdf(0.95))
            .unwrap_or(f64::INFINITY);
        lambda > threshold
    } else {
        b0 > 0.0
    };
    if accept {
        split(&idx[..cut], stats, pooled, dof, out);
        split(&idx[cut..], stats, pooled, dof, out);
    } else {
        out.push(idx.to_vec());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn exact_small_case() {
        let w = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5], 0.05).unwrap();
        assert_eq!((w.w_plus, w.w_minus), (15.0, 0.0));
        assert!((w.p - 0.0625).abs() < 1e-15);
        assert_eq!(w.verdict, Verdict::Tie);
    }

    #[test]
    fn all_zero_is_tie() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let w = wilcoxon_signed_rank(&a, &a, 0.05).unwrap();
        assert_eq!((w.p, w.verdict), (1.0, Verdict::Tie));
    }

    #[test]
    fn effect_classes() {
        assert_eq!(EffectSize::of(0.5), EffectSize::Equivalent);
        assert_eq!(EffectSize::of(0.0), EffectSize::Large);
        assert_eq!(EffectSize::of(0.65), EffectSize::Medium);
        assert_eq!(EffectSize::of(0.43), EffectSize::Small);
    }

    #[test]
    fn scott_knott_separates_distant_groups() {
        let g = vec![
            ("hi".to_string(), vec![100.0, 100.01, 99.99, 100.0, 100.02]),
            ("lo".to_string(), vec![0.0, 0.01, -0.01, 0.02, 0.0]),
        ];
        let r = scott_knott(&g).unwrap();
        assert_eq!(r, vec![("hi".to_string(), 2), ("lo".to_string(), 1)]);
    }
}
