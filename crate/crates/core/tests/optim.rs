use mlo_core::optim::{
    ea_step, identify_promising, latin_hypercube, maximize_acquisition, ucb, AcquisitionConfig, EaKind, EaParams,
    MaximizerConfig, Population,
};
use mlo_core::rng::Rng;
use mlo_core::surrogates::{prediction_count, Dataset, FittedSurrogate, GprParams, SurrogateParams};
use rand::{Rng as _, SeedableRng};

fn fitted(xs: &[Vec<f64>], ys: &[f64], lower: &[f64], upper: &[f64], lengthscale: f64) -> FittedSurrogate {
    let data = Dataset::from_xy(xs, ys, 0).normalized(lower, upper);
    SurrogateParams::Gpr(GprParams::from_natural(lengthscale, 1.0, 1e-4))
        .fit(&data)
        .unwrap()
}

#[test]
fn maximizer_beats_random_probes() {
    let lower = vec![0.0; 3];
    let upper = vec![100.0; 3];
    let mut rng = Rng::seed_from_u64(1);
    for trial in 0..5 {
        let xs = latin_hypercube(12, &lower, &upper, &mut rng);
        let ys: Vec<f64> = xs.iter().map(|x| (x[0] / 15.0).sin() + (x[1] / 20.0).cos() - x[2] / 100.0).collect();
        let model = fitted(&xs, &ys, &lower, &upper, 0.3);
        let acq = AcquisitionConfig::default();
        let x = maximize_acquisition(&model, &acq, &lower, &upper, &MaximizerConfig::default(), &mut rng);
        assert!(x.iter().all(|v| (0.0..=100.0).contains(v)));
        let found = ucb(model.predict(&x), acq.w);
        let mut probe_rng = Rng::seed_from_u64(1000 + trial);
        for _ in 0..1000 {
            let p: Vec<f64> = (0..3).map(|_| probe_rng.random_range(0.0..100.0)).collect();
            assert!(found >= ucb(model.predict(&p), acq.w) - 1e-9);
        }
    }
}

#[test]
fn flat_surface_returns_a_point_in_the_box() {
    // Identical targets: the posterior mean is flat away from the data.
    let lower = vec![-5.0, 10.0];
    let upper = vec![5.0, 20.0];
    let model = fitted(&[vec![0.0, 15.0]], &[3.0], &lower, &upper, 0.2);
    let mut rng = Rng::seed_from_u64(2);
    let x = maximize_acquisition(&model, &AcquisitionConfig::default(), &lower, &upper, &MaximizerConfig::default(), &mut rng);
    assert!(x[0] >= -5.0 && x[0] <= 5.0 && x[1] >= 10.0 && x[1] <= 20.0);
}

#[test]
fn pure_exploitation_finds_quadratic_peak() {
    let lower = vec![0.0];
    let upper = vec![1.0];
    let xs: Vec<Vec<f64>> = (0..=10).map(|i| vec![i as f64 / 10.0]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| -(x[0] - 0.37).powi(2)).collect();
    let model = fitted(&xs, &ys, &lower, &upper, 0.5);
    let mut rng = Rng::seed_from_u64(3);
    let acq = AcquisitionConfig { w: 0.0 };
    let x = maximize_acquisition(&model, &acq, &lower, &upper, &MaximizerConfig::default(), &mut rng);
    assert!((x[0] - 0.37).abs() < 0.05, "{x:?}");
}

fn population(xs: Vec<Vec<f64>>, model: &FittedSurrogate) -> Population {
    let params = EaParams {
        pop_size: xs.len(),
        ..EaParams::default()
    };
    let mut f = |x: &[f64]| model.predict(x).mean;
    Population::from_individuals(EaKind::De, &params, &[0.0, 0.0], &[1.0, 1.0], xs, &mut f)
}

#[test]
fn promising_points_follow_acquisition_order() {
    let lower = vec![0.0, 0.0];
    let upper = vec![1.0, 1.0];
    let mut rng = Rng::seed_from_u64(4);
    let train = latin_hypercube(10, &lower, &upper, &mut rng);
    let ys: Vec<f64> = train.iter().map(|x| -(x[0] - 0.5).powi(2) - (x[1] - 0.2).powi(2)).collect();
    let model = fitted(&train, &ys, &lower, &upper, 0.4);
    let acq = AcquisitionConfig::default();

    let p_xs = latin_hypercube(6, &lower, &upper, &mut rng);
    let mut q_xs = latin_hypercube(6, &lower, &upper, &mut rng);
    q_xs[5] = p_xs[0].clone();
    let p = population(p_xs.clone(), &model);
    let q = population(q_xs.clone(), &model);

    let pool: Vec<Vec<f64>> = p_xs.iter().chain(&q_xs).cloned().collect();
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for x in pool {
        if !unique.contains(&x) {
            unique.push(x);
        }
    }
    assert_eq!(unique.len(), 11);
    unique.sort_by(|a, b| ucb(model.predict(b), acq.w).total_cmp(&ucb(model.predict(a), acq.w)));

    let picks = identify_promising(&p, &q, &model, &acq, 5, &[]).unwrap();
    assert_eq!(picks, unique[..5].to_vec());

    let excluded = identify_promising(&p, &q, &model, &acq, 5, &unique[..2]).unwrap();
    assert_eq!(excluded, unique[2..7].to_vec());

    let all = identify_promising(&p, &q, &model, &acq, 12, &[]).unwrap();
    assert_eq!(all.len(), 11);
    assert!(identify_promising(&p, &q, &model, &acq, 13, &[]).is_err());
}

#[test]
fn one_generation_costs_at_most_four_predictions_per_individual() {
    let lower = vec![0.0; 4];
    let upper = vec![100.0; 4];
    let mut rng = Rng::seed_from_u64(5);
    let train = latin_hypercube(16, &lower, &upper, &mut rng);
    let ys: Vec<f64> = train.iter().map(|x| -x.iter().map(|v| (v - 40.0).powi(2)).sum::<f64>()).collect();
    let model = fitted(&train, &ys, &lower, &upper, 0.3);
    let acq = AcquisitionConfig::default();
    for kind in [EaKind::Cmaes, EaKind::Pso, EaKind::De] {
        let params = EaParams::default();
        let mut f = |x: &[f64]| ucb(model.predict(x), acq.w);
        let mut pop = Population::random(kind, &params, &lower, &upper, &mut f, &mut rng);
        let before = prediction_count();
        pop.refresh_fitness(&mut f);
        let q = ea_step(&pop, &params, &mut f, &mut rng);
        identify_promising(&pop, &q, &model, &acq, 1, &[]).unwrap();
        assert!(prediction_count() - before <= 4 * params.pop_size as u64);
    }
}
