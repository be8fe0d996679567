use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// One true evaluation `<(x, t), y>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    pub t: usize,
    pub y: f64,
}

/// Affine maps between raw and model space: inputs are min-max scaled by the
/// search bounds, targets standardized by the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub y_shift: f64,
    pub y_scale: f64,
}

impl Normalization {
    pub fn normalize_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (v - l) / (u - l))
            .collect()
    }

    pub fn denormalize_x(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| l + v * (u - l))
            .collect()
    }

    pub fn normalize_y(&self, y: f64) -> f64 {
        (y - self.y_shift) / self.y_scale
    }

    pub fn denormalize_y(&self, z: f64) -> f64 {
        z * self.y_scale + self.y_shift
    }
}

/// A set of observations. When `normalization` is set, the stored values are
/// already in model space and the record maps predictions back.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<Observation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: Vec<Observation>) -> Self {
        Self {
            points,
            normalization: None,
        }
    }

    /// Builds a dataset from parallel `xs`/`ys`, all tagged with time step `t`.
    pub fn from_xy(xs: &[Vec<f64>], ys: &[f64], t: usize) -> Self {
        Self::from_points(
            xs.iter()
                .zip(ys)
                .map(|(x, &y)| Observation {
                    x: x.clone(),
                    t,
                    y,
                })
                .collect(),
        )
    }

    pub fn push(&mut self, obs: Observation) {
        self.points.push(obs);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dims(&self) -> Option<usize> {
        self.points.first().map(|p| p.x.len())
    }

    pub fn xs(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(|p| p.x.as_slice())
    }

    pub fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.y)
    }

    /// Checks shared dimension and finite targets.
    pub fn validate(&self) -> Result<()> {
        let n = self.dims().ok_or(Error::Empty("dataset"))?;
        for p in &self.points {
            if p.x.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: p.x.len(),
                });
            }
            if !p.y.is_finite() || p.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid("non-finite observation".into()));
            }
        }
        Ok(())
    }

    /// Maps raw observations into model space. A constant target column gets
    /// unit scale.
    pub fn normalized(&self, lower: &[f64], upper: &[f64]) -> Dataset {
        let n = self.len().max(1) as f64;
        let mean = self.ys().sum::<f64>() / n;
        let var = self.ys().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        let norm = Normalization {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            y_shift: mean,
            y_scale: if std > 1e-12 * mean.abs().max(1.0) {
                std
            } else {
                1.0
            },
        };
        let points = self
            .points
            .iter()
            .map(|p| Observation {
                x: norm.normalize_x(&p.x),
                t: p.t,
                y: norm.normalize_y(p.y),
            })
            .collect();
        Dataset {
            points,
            normalization: Some(norm),
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            points: idx.iter().map(|&i| self.points[i].clone()).collect(),
            normalization: self.normalization.clone(),
        }
    }

    /// Draws disjoint support and query sets of `k` points each when the
    /// dataset holds at least `2k` points; otherwise each set is drawn with
    /// replacement.
    pub fn sample_split(&self, k: usize, rng: &mut Rng) -> Result<(Dataset, Dataset)> {
        if self.is_empty() {
            return Err(Error::Empty("task dataset"));
        }
        if k == 0 {
            return Err(Error::Invalid("few-shot size must be positive".into()));
        }
        let n = self.len();
        if n >= 2 * k {
            let picks = index::sample(rng, n, 2 * k).into_vec();
            Ok((self.subset(&picks[..k]), self.subset(&picks[k..])))
        } else {
            let support: Vec<usize> = (0..k).map(|_| rng.random_range(0..n)).collect();
            let query: Vec<usize> = (0..k).map(|_| rng.random_range(0..n)).collect();
            Ok((self.subset(&support), self.subset(&query)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn data(n: usize) -> Dataset {
        Dataset::from_points(
            (0..n)
                .map(|i| Observation {
                    x: vec![i as f64, 2.0 * i as f64],
                    t: 0,
                    y: (i * i) as f64,
                })
                .collect(),
        )
    }

    #[test]
    fn split_is_disjoint_with_enough_points() {
        let d = data(12);
        let mut rng = Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (s, q) = d.sample_split(5, &mut rng).unwrap();
            assert_eq!(s.len(), 5);
            assert_eq!(q.len(), 5);
            for a in &s.points {
                assert!(q.points.iter().all(|b| b.x != a.x));
            }
        }
    }

    #[test]
    fn split_with_replacement_on_small_sets() {
        let d = data(3);
        let mut rng = Rng::seed_from_u64(3);
        let (s, q) = d.sample_split(5, &mut rng).unwrap();
        assert_eq!((s.len(), q.len()), (5, 5));
    }

    #[test]
    fn normalization_maps_bounds_to_unit_box() {
        let d = data(5).normalized(&[0.0, 0.0], &[4.0, 8.0]);
        let norm = d.normalization.as_ref().unwrap();
        assert_eq!(d.points[4].x, vec![1.0, 1.0]);
        let mean = d.ys().sum::<f64>() / 5.0;
        assert!(mean.abs() < 1e-12);
        assert!((norm.denormalize_y(d.points[3].y) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn constant_targets_get_unit_scale() {
        let d = Dataset::from_xy(&[vec![0.0], vec![1.0]], &[3.0, 3.0], 0).normalized(&[0.0], &[1.0]);
        assert_eq!(d.normalization.unwrap().y_scale, 1.0);
        assert!(d.points.iter().all(|p| p.y == 0.0));
    }
}
