use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::rng::Rng;

/// Latin hypercube design of `count` points in the box: each axis is cut into
/// `count` equal strata and every stratum holds exactly one point.
pub fn latin_hypercube(count: usize, lower: &[f64], upper: &[f64], rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = lower.len();
    let mut points = vec![vec![0.0; n]; count];
    let mut perm: Vec<usize> = (0..count).collect();
    for d in 0..n {
        perm.shuffle(rng);
        let width = (upper[d] - lower[d]) / count as f64;
        for (p, &stratum) in points.iter_mut().zip(&perm) {
            let u: f64 = rng.random();
            p[d] = (lower[d] + (stratum as f64 + u) * width).min(upper[d]);
        }
    }
    points
}
