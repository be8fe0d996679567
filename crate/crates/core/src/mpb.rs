//! Moving Peaks Benchmark with cone-shaped peaks.
//!
//! The landscape at time step `t` is
//! `f(x, t) = max_i [H_i(t) - W_i(t) * ||x - X_i(t)||]`, a maximization
//! problem. Between environments every peak height and width takes a
//! Gaussian step and every center moves by a vector of fixed length
//! `shift_severity` whose direction blends a fresh random direction with the
//! previous shift through the correlation `lambda`. All quantities are
//! mirrored back into their ranges at the boundaries.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};
use rand::SeedableRng;

const ADVANCE_TAG: u64 = 0x6d70_625f_6164_7600;
const INIT_TAG: u64 = 0x6d70_625f_696e_6974;

fn default_bounds() -> Vec<(f64, f64)> {
    vec![(0.0, 100.0)]
}

/// Benchmark configuration. `bounds` holds either one interval per dimension
/// or a single interval applied to every dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpbConfig {
    pub dims: usize,
    pub num_peaks: usize,
    pub bounds: Vec<(f64, f64)>,
    pub height_range: (f64, f64),
    pub width_range: (f64, f64),
    pub height_severity: f64,
    pub shift_severity: f64,
    pub width_severity: f64,
    pub correlation: f64,
    pub num_environments: usize,
    pub seed: u64,
}

impl Default for MpbConfig {
    fn default() -> Self {
        Self {
            dims: 4,
            num_peaks: 5,
            bounds: default_bounds(),
            height_range: (30.0, 70.0),
            width_range: (1.0, 12.0),
            height_severity: 7.0,
            shift_severity: 5.0,
            width_severity: 1.0,
            correlation: 0.0,
            num_environments: 10,
            seed: 0,
        }
    }
}

impl MpbConfig {
    /// Interval of dimension `i`.
    pub fn bound(&self, i: usize) -> (f64, f64) {
        if self.bounds.len() == 1 {
            self.bounds[0]
        } else {
            self.bounds[i]
        }
    }

    pub fn lower(&self) -> Vec<f64> {
        (0..self.dims).map(|i| self.bound(i).0).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        (0..self.dims).map(|i| self.bound(i).1).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.dims == 0 {
            return bad("dims must be positive".into());
        }
        if self.num_peaks == 0 {
            return bad("num_peaks must be positive".into());
        }
        if self.bounds.len() != 1 && self.bounds.len() != self.dims {
            return bad(format!(
                "bounds must hold 1 or {} intervals, found {}",
                self.dims,
                self.bounds.len()
            ));
        }
        for (i, &(l, u)) in self.bounds.iter().enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return bad(format!("bounds[{i}] = [{l}, {u}] is degenerate"));
            }
        }
        for (name, (lo, hi)) in [
            ("height_range", self.height_range),
            ("width_range", self.width_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return bad(format!("{name} = [{lo}, {hi}] must satisfy 0 < lo <= hi"));
            }
        }
        for (name, v) in [
            ("height_severity", self.height_severity),
            ("shift_severity", self.shift_severity),
            ("width_severity", self.width_severity),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            return bad("correlation must lie in [0, 1]".into());
        }
        // T = 1 is accepted: it is the degenerate no-change problem.
        if self.num_environments == 0 {
            return bad("num_environments must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub center: Vec<f64>,
    pub height: f64,
    pub width: f64,
    pub prev_shift: Vec<f64>,
}

/// One environment of the benchmark. Immutable; `advance` returns the next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpbState {
    pub time_step: usize,
    pub peaks: Vec<Peak>,
}

/// Mirrors `v` into `[lo, hi]`. Returns the folded value and whether the
/// number of reflections was odd.
fn reflect(v: f64, lo: f64, hi: f64) -> (f64, bool) {
    let w = hi - lo;
    if w <= 0.0 {
        return (lo, false);
    }
    if (lo..=hi).contains(&v) {
        return (v, false);
    }
    let d = (v - lo).rem_euclid(2.0 * w);
    if d > w {
        (lo + 2.0 * w - d, false)
    } else {
        (lo + d, true)
    }
}

fn uniform(rng: &mut Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

impl MpbState {
    /// Samples the initial landscape.
    pub fn init(config: &MpbConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::seed_from_u64(derive_seed(&[config.seed, INIT_TAG]));
        let peaks = (0..config.num_peaks)
            .map(|_| {
                let center = (0..config.dims)
                    .map(|i| uniform(&mut rng, config.bound(i)))
                    .collect();
                let height = uniform(&mut rng, config.height_range);
                let width = uniform(&mut rng, config.width_range);
                Peak {
                    center,
                    height,
                    width,
                    prev_shift: vec![0.0; config.dims],
                }
            })
            .collect();
        Ok(Self {
            time_step: 0,
            peaks,
        })
    }

    pub fn dims(&self) -> usize {
        self.peaks[0].center.len()
    }

    /// Objective value at `x`. Pure; no evaluation accounting.
    pub fn eval(&self, config: &MpbConfig, x: &[f64]) -> Result<f64> {
        if x.len() != config.dims {
            return Err(Error::Dimension {
                expected: config.dims,
                found: x.len(),
            });
        }
        for (i, &xi) in x.iter().enumerate() {
            let (l, u) = config.bound(i);
            if !(xi >= l && xi <= u) {
                return Err(Error::OutOfBounds(format!("x[{i}] = {xi} not in [{l}, {u}]")));
            }
        }
        Ok(self.value(x))
    }

    /// Unchecked evaluation.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.peaks
            .iter()
            .map(|p| p.height - p.width * distance(x, &p.center))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Produces the next environment. Deterministic in `(config.seed, time_step)`.
    pub fn advance(&self, config: &MpbConfig) -> Result<Self> {
        if self.time_step + 1 >= config.num_environments {
            return Err(Error::PastLastEnvironment {
                time_step: self.time_step,
                num_environments: config.num_environments,
            });
        }
        let next_t = self.time_step + 1;
        let mut rng = Rng::seed_from_u64(derive_seed(&[config.seed, ADVANCE_TAG, next_t as u64]));
        let lambda = config.correlation;
        let peaks = self
            .peaks
            .iter()
            .map(|peak| {
                let dh: f64 = StandardNormal.sample(&mut rng);
                let dw: f64 = StandardNormal.sample(&mut rng);
                let height = reflect(
                    peak.height + config.height_severity * dh,
                    config.height_range.0,
                    config.height_range.1,
                )
                .0;
                let width = reflect(
                    peak.width + config.width_severity * dw,
                    config.width_range.0,
                    config.width_range.1,
                )
                .0;

                let random_dir = random_direction(&mut rng, config.dims);
                let mut shift: Vec<f64> = random_dir
                    .iter()
                    .zip(&peak.prev_shift)
                    .map(|(r, v)| (1.0 - lambda) * config.shift_severity * r + lambda * v)
                    .collect();
                let norm = shift.iter().map(|s| s * s).sum::<f64>().sqrt();
                if norm > 0.0 {
                    shift.iter_mut().for_each(|s| *s *= config.shift_severity / norm);
                } else {
                    shift = random_dir
                        .iter()
                        .map(|r| r * config.shift_severity)
                        .collect();
                }

                let mut center = peak.center.clone();
                for i in 0..config.dims {
                    let (l, u) = config.bound(i);
                    let (c, flipped) = reflect(center[i] + shift[i], l, u);
                    center[i] = c;
                    if flipped {
                        shift[i] = -shift[i];
                    }
                }
                Peak {
                    center,
                    height,
                    width,
                    prev_shift: shift,
                }
            })
            .collect();
        Ok(Self {
            time_step: next_t,
            peaks,
        })
    }

    /// Apex of the highest peak and its height. Ties go to the lowest index.
    pub fn global_optimum(&self) -> (Vec<f64>, f64) {
        let mut best = 0;
        for (i, p) in self.peaks.iter().enumerate().skip(1) {
            if p.height > self.peaks[best].height {
                best = i;
            }
        }
        (self.peaks[best].center.clone(), self.peaks[best].height)
    }

    pub fn max_width(&self) -> f64 {
        self.peaks.iter().map(|p| p.width).fold(0.0, f64::max)
    }

    /// Plot-friendly snapshot: per-peak arrays.
    pub fn snapshot(&self) -> LandscapeSnapshot {
        LandscapeSnapshot {
            time_step: self.time_step,
            centers: self.peaks.iter().map(|p| p.center.clone()).collect(),
            heights: self.peaks.iter().map(|p| p.height).collect(),
            widths: self.peaks.iter().map(|p| p.width).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSnapshot {
    pub time_step: usize,
    pub centers: Vec<Vec<f64>>,
    pub heights: Vec<f64>,
    pub widths: Vec<f64>,
}

fn random_direction(rng: &mut Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
