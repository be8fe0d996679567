//! Population steps of CMA-ES, PSO and DE on surrogate fitness
//! (maximization). Offspring are repaired by clamping to the box.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{acquisition::ucb, clamp_to_bounds, AcquisitionConfig};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::surrogates::{FittedSurrogate, SurrogateKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EaKind {
    Cmaes,
    Pso,
    De,
}

impl EaKind {
    pub fn name(&self) -> &'static str {
        match self {
            EaKind::Cmaes => "CMA-ES",
            EaKind::Pso => "PSO",
            EaKind::De => "DE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EaParams {
    pub pop_size: usize,
    /// Initial CMA-ES step size as a fraction of the box width.
    pub cma_sigma: f64,
    pub pso_inertia: f64,
    pub pso_c1: f64,
    pub pso_c2: f64,
    pub de_f: f64,
    pub de_cr: f64,
}

impl Default for EaParams {
    fn default() -> Self {
        Self {
            pop_size: 20,
            cma_sigma: 0.3,
            pso_inertia: 0.729,
            pso_c1: 1.49445,
            pso_c2: 1.49445,
            de_f: 0.5,
            de_cr: 0.9,
        }
    }
}

/// CMA-ES state in unit-box coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub path_c: DVector<f64>,
    pub path_sigma: DVector<f64>,
    pub generation: usize,
    eig_b: DMatrix<f64>,
    eig_d: DVector<f64>,
}

impl CmaState {
    fn new(mean: DVector<f64>, sigma: f64) -> Self {
        let n = mean.len();
        Self {
            mean,
            sigma,
            cov: DMatrix::identity(n, n),
            path_c: DVector::zeros(n),
            path_sigma: DVector::zeros(n),
            generation: 0,
            eig_b: DMatrix::identity(n, n),
            eig_d: DVector::from_element(n, 1.0),
        }
    }

    fn refresh_eigen(&mut self) {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        self.eig_d = eig.eigenvalues.map(|v| v.max(1e-20).sqrt());
        self.eig_b = eig.eigenvectors;
        self.cov = &self.eig_b * DMatrix::from_diagonal(&self.eig_d.map(|d| d * d)) * self.eig_b.transpose();
    }

    fn inv_sqrt_times(&self, v: &DVector<f64>) -> DVector<f64> {
        let bt_v = self.eig_b.transpose() * v;
        let scaled = bt_v.component_div(&self.eig_d);
        &self.eig_b * scaled
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoState {
    pub velocities: Vec<Vec<f64>>,
    pub best_x: Vec<Vec<f64>>,
    pub best_f: Vec<f64>,
    pub global_x: Vec<f64>,
    pub global_f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Cmaes(Box<CmaState>),
    Pso(PsoState),
    De,
}

/// Individuals with surrogate fitness and algorithm state.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub individuals: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
    pub strategy: Strategy,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Population {
    /// Uniform random population inside the box.
    pub fn random(
        kind: EaKind,
        params: &EaParams,
        lower: &[f64],
        upper: &[f64],
        eval: &mut dyn FnMut(&[f64]) -> f64,
        rng: &mut Rng,
    ) -> Self {
        let individuals: Vec<Vec<f64>> = (0..params.pop_size)
            .map(|_| {
                lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| l + rng.random::<f64>() * (u - l))
                    .collect()
            })
            .collect();
        Self::from_individuals(kind, params, lower, upper, individuals, eval)
    }

    pub fn from_individuals(
        kind: EaKind,
        params: &EaParams,
        lower: &[f64],
        upper: &[f64],
        individuals: Vec<Vec<f64>>,
        eval: &mut dyn FnMut(&[f64]) -> f64,
    ) -> Self {
        let fitness: Vec<f64> = individuals.iter().map(|x| eval(x)).collect();
        let n = lower.len();
        let strategy = match kind {
            EaKind::Cmaes => {
                let mut m = DVector::zeros(n);
                for x in &individuals {
                    m += DVector::from_iterator(n, to_unit(x, lower, upper));
                }
                m /= individuals.len().max(1) as f64;
                Strategy::Cmaes(Box::new(CmaState::new(m, params.cma_sigma)))
            }
            EaKind::Pso => {
                let gi = argmax(&fitness);
                Strategy::Pso(PsoState {
                    velocities: vec![vec![0.0; n]; individuals.len()],
                    best_x: individuals.clone(),
                    best_f: fitness.clone(),
                    global_x: individuals[gi].clone(),
                    global_f: fitness[gi],
                })
            }
            EaKind::De => Strategy::De,
        };
        Self {
            individuals,
            fitness,
            strategy,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
        }
    }

    pub fn kind(&self) -> EaKind {
        match self.strategy {
            Strategy::Cmaes(_) => EaKind::Cmaes,
            Strategy::Pso(_) => EaKind::Pso,
            Strategy::De => EaKind::De,
        }
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    /// Re-scores the individuals after the surrogate changed.
    pub fn refresh_fitness(&mut self, eval: &mut dyn FnMut(&[f64]) -> f64) {
        self.fitness = self.individuals.iter().map(|x| eval(x)).collect();
    }
}

fn to_unit(x: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(lower.iter().zip(upper))
        .map(|(v, (l, u))| (v - l) / (u - l))
        .collect()
}

fn from_unit(z: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    z.iter()
        .zip(lower.iter().zip(upper))
        .map(|(v, (l, u))| l + v * (u - l))
        .collect()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// One generation of variation. Returns the offspring population `Q`, scored
/// with `eval`; the parents' strategy state is carried over unchanged.
pub fn ea_step(
    pop: &Population,
    params: &EaParams,
    eval: &mut dyn FnMut(&[f64]) -> f64,
    rng: &mut Rng,
) -> Population {
    let (lower, upper) = (&pop.lower, &pop.upper);
    let n = lower.len();
    let size = pop.len();
    let mut offspring: Vec<Vec<f64>> = Vec::with_capacity(size);
    let mut strategy = pop.strategy.clone();

    match &mut strategy {
        Strategy::Cmaes(state) => {
            for _ in 0..size {
                let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
                let y = &state.eig_b * z.component_mul(&state.eig_d);
                let unit: Vec<f64> = (&state.mean + y * state.sigma)
                    .iter()
                    .map(|v| v.clamp(0.0, 1.0))
                    .collect();
                offspring.push(from_unit(&unit, lower, upper));
            }
        }
        Strategy::Pso(state) => {
            for i in 0..size {
                let x = &pop.individuals[i];
                let mut v = state.velocities[i].clone();
                let mut next = x.clone();
                for d in 0..n {
                    let r1: f64 = rng.random();
                    let r2: f64 = rng.random();
                    v[d] = params.pso_inertia * v[d]
                        + params.pso_c1 * r1 * (state.best_x[i][d] - x[d])
                        + params.pso_c2 * r2 * (state.global_x[d] - x[d]);
                    let vmax = upper[d] - lower[d];
                    v[d] = v[d].clamp(-vmax, vmax);
                    next[d] = x[d] + v[d];
                }
                clamp_to_bounds(&mut next, lower, upper);
                state.velocities[i] = v;
                offspring.push(next);
            }
        }
        Strategy::De => {
            for i in 0..size {
                let [r1, r2, r3] = distinct_others(i, size, rng);
                let (a, b, c) = (
                    &pop.individuals[r1],
                    &pop.individuals[r2],
                    &pop.individuals[r3],
                );
                let jrand = rng.random_range(0..n);
                let mut trial = pop.individuals[i].clone();
                for d in 0..n {
                    let u: f64 = rng.random();
                    // The forced component is skipped when CR = 0 so that a
                    // null crossover reproduces the parent.
                    if u < params.de_cr || (d == jrand && params.de_cr > 0.0) {
                        trial[d] = a[d] + params.de_f * (b[d] - c[d]);
                    }
                }
                clamp_to_bounds(&mut trial, lower, upper);
                offspring.push(trial);
            }
        }
    }
    let fitness = offspring.iter().map(|x| eval(x)).collect();
    Population {
        individuals: offspring,
        fitness,
        strategy,
        lower: lower.clone(),
        upper: upper.clone(),
    }
}

/// Three distinct indices different from `i`; with fewer than four
/// individuals indices may repeat.
fn distinct_others(i: usize, size: usize, rng: &mut Rng) -> [usize; 3] {
    let mut out = [i; 3];
    if size < 4 {
        for o in &mut out {
            *o = rng.random_range(0..size);
        }
        return out;
    }
    let mut k = 0;
    while k < 3 {
        let r = rng.random_range(0..size);
        if r != i && !out[..k].contains(&r) {
            out[k] = r;
            k += 1;
        }
    }
    out
}

/// Next parent population from `P ∪ Q`.
///
/// CMA-ES adapts its distribution from the best `N/2` offspring (weighted
/// recombination) and the offspring become the parents; PSO moves to the new
/// positions and updates personal and global bests; DE keeps, per index, the
/// better of parent and trial (the trial wins ties).
pub fn environmental_selection(parents: &Population, offspring: &Population) -> Population {
    match (&parents.strategy, &offspring.strategy) {
        (Strategy::Cmaes(_), Strategy::Cmaes(state)) => {
            let mut state = state.as_ref().clone();
            cma_update(&mut state, offspring);
            Population {
                strategy: Strategy::Cmaes(Box::new(state)),
                ..offspring.clone()
            }
        }
        (Strategy::Pso(_), Strategy::Pso(state)) => {
            let mut state = state.clone();
            for i in 0..offspring.len() {
                if offspring.fitness[i] > state.best_f[i] {
                    state.best_f[i] = offspring.fitness[i];
                    state.best_x[i] = offspring.individuals[i].clone();
                }
                if offspring.fitness[i] > state.global_f {
                    state.global_f = offspring.fitness[i];
                    state.global_x = offspring.individuals[i].clone();
                }
            }
            Population {
                strategy: Strategy::Pso(state),
                ..offspring.clone()
            }
        }
        _ => {
            let mut next = parents.clone();
            for i in 0..parents.len() {
                if offspring.fitness[i] >= parents.fitness[i] {
                    next.individuals[i] = offspring.individuals[i].clone();
                    next.fitness[i] = offspring.fitness[i];
                }
            }
            next
        }
    }
}

fn cma_update(state: &mut CmaState, offspring: &Population) {
    let n = state.mean.len();
    let nf = n as f64;
    let lambda = offspring.len();
    let mu = (lambda / 2).max(1);
    let raw: Vec<f64> = (0..mu)
        .map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln())
        .collect();
    let wsum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / wsum).collect();
    let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let cc = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
    let cs = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
    let cmu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
    let damps = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut order: Vec<usize> = (0..lambda).collect();
    order.sort_by(|&a, &b| offspring.fitness[b].total_cmp(&offspring.fitness[a]));
    let ys: Vec<DVector<f64>> = order[..mu]
        .iter()
        .map(|&k| {
            let z = to_unit(&offspring.individuals[k], &offspring.lower, &offspring.upper);
            (DVector::from_vec(z) - &state.mean) / state.sigma
        })
        .collect();
    let mut y_w = DVector::zeros(n);
    for (w, y) in weights.iter().zip(&ys) {
        y_w += y * *w;
    }
    state.mean += &y_w * state.sigma;

    let c_inv_sqrt_yw = state.inv_sqrt_times(&y_w);
    state.path_sigma = &state.path_sigma * (1.0 - cs) + c_inv_sqrt_yw * (cs * (2.0 - cs) * mu_eff).sqrt();
    state.generation += 1;
    let ps_norm = state.path_sigma.norm();
    let h_sigma = ps_norm / (1.0 - (1.0 - cs).powi(2 * state.generation as i32)).sqrt()
        < (1.4 + 2.0 / (nf + 1.0)) * chi_n;
    let hs = if h_sigma { 1.0 } else { 0.0 };
    state.path_c = &state.path_c * (1.0 - cc) + &y_w * (hs * (cc * (2.0 - cc) * mu_eff).sqrt());

    let mut rank_mu = DMatrix::zeros(n, n);
    for (w, y) in weights.iter().zip(&ys) {
        rank_mu += y * y.transpose() * *w;
    }
    let rank_one = &state.path_c * state.path_c.transpose();
    state.cov = &state.cov * (1.0 - c1 - cmu)
        + (rank_one + &state.cov * ((1.0 - hs) * cc * (2.0 - cc))) * c1
        + rank_mu * cmu;
    state.sigma *= ((cs / damps) * (ps_norm / chi_n - 1.0)).exp();
    state.sigma = state.sigma.clamp(1e-12, 1e3);
    state.refresh_eigen();
}

/// Picks the points of `P ∪ Q` that receive true evaluations.
///
/// GPR: ranked by UCB; NN: ranked by predicted mean. Coordinate-identical
/// candidates collapse to one and points listed in `exclude` (already
/// evaluated) are skipped while other candidates remain; the list is
/// back-filled from the next best.
pub fn identify_promising(
    parents: &Population,
    offspring: &Population,
    model: &FittedSurrogate,
    acq: &AcquisitionConfig,
    xi: usize,
    exclude: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let pool: Vec<&Vec<f64>> = parents
        .individuals
        .iter()
        .chain(&offspring.individuals)
        .collect();
    if xi == 0 || xi > pool.len() {
        return Err(Error::Invalid(format!(
            "cannot pick {xi} solutions from {} candidates",
            pool.len()
        )));
    }
    let scores: Vec<f64> = pool
        .iter()
        .map(|x| {
            let p = model.predict(x);
            match model.kind() {
                SurrogateKind::Gpr => ucb(p, acq.w),
                SurrogateKind::Nn => p.mean,
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut unique: Vec<&Vec<f64>> = Vec::new();
    for &i in &order {
        if !unique.iter().any(|u| *u == pool[i]) {
            unique.push(pool[i]);
        }
    }
    let (fresh, seen): (Vec<&Vec<f64>>, Vec<&Vec<f64>>) =
        unique.into_iter().partition(|x| !exclude.contains(x));
    Ok(fresh
        .into_iter()
        .chain(seen)
        .take(xi)
        .cloned()
        .collect())
}
