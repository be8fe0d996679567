use mlo_core::analysis::{a12, scott_knott};
use mlo_core::mpb::{MpbConfig, MpbState};
use mlo_core::optim::{ea_step, environmental_selection, EaKind, EaParams, Population};
use mlo_core::rng::Rng;
use mlo_core::surrogates::{gpr, Dataset, GprParams};
use proptest::prelude::*;
use rand::SeedableRng;

fn mpb(dims: usize, seed: u64, envs: usize) -> MpbConfig {
    MpbConfig {
        dims,
        seed,
        num_environments: envs,
        ..MpbConfig::default()
    }
}

fn inside(cfg: &MpbConfig, x: &[f64]) -> bool {
    x.iter().enumerate().all(|(i, v)| {
        let (l, u) = cfg.bound(i);
        *v >= l && *v <= u
    })
}

#[test]
fn peaks_stay_in_bounds_over_long_runs() {
    let cfg = MpbConfig {
        shift_severity: 15.0,
        height_severity: 20.0,
        width_severity: 3.0,
        ..mpb(3, 99, 10_001)
    };
    let mut s = MpbState::init(&cfg).unwrap();
    for _ in 0..10_000 {
        s = s.advance(&cfg).unwrap();
        for p in &s.peaks {
            assert!(inside(&cfg, &p.center));
            assert!(p.height >= cfg.height_range.0 && p.height <= cfg.height_range.1);
            assert!(p.width >= cfg.width_range.0 && p.width <= cfg.width_range.1);
        }
    }
    assert!(s.advance(&cfg).is_err());
}

fn point(dims: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..100.0f64, dims)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn landscape_is_lipschitz(seed in 0u64..1000, a in point(4), b in point(4)) {
        let cfg = mpb(4, seed, 3);
        let s = MpbState::init(&cfg).unwrap().advance(&cfg).unwrap();
        let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let fa = s.eval(&cfg, &a).unwrap();
        let fb = s.eval(&cfg, &b).unwrap();
        prop_assert!((fa - fb).abs() <= s.max_width() * d + 1e-9);
        let (_, best) = s.global_optimum();
        prop_assert!(fa <= best + 1e-9);
    }

    #[test]
    fn nll_ignores_point_order(seed in 0u64..1000, rot in 1usize..6) {
        let mut rng = Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (0..6).map(|_| vec![rand::Rng::random(&mut rng), rand::Rng::random(&mut rng)]).collect();
        let ys: Vec<f64> = (0..6).map(|i| (i as f64 * 0.7).sin()).collect();
        let p = GprParams::default();
        let base = gpr::loss(&p, &Dataset::from_xy(&xs, &ys, 0)).unwrap();
        let mut xr = xs.clone();
        let mut yr = ys.clone();
        xr.rotate_left(rot);
        yr.rotate_left(rot);
        let rotated = gpr::loss(&p, &Dataset::from_xy(&xr, &yr, 0)).unwrap();
        prop_assert!((base - rotated).abs() <= 1e-10 * base.abs().max(1.0));
    }

    #[test]
    fn normalization_round_trips(xs in prop::collection::vec(point(3), 2..10), ys in prop::collection::vec(-50.0..80.0f64, 10)) {
        let ys = &ys[..xs.len()];
        let lower = vec![0.0; 3];
        let upper = vec![100.0; 3];
        let d = Dataset::from_xy(&xs, ys, 0).normalized(&lower, &upper);
        let norm = d.normalization.clone().unwrap();
        for (p, (x, y)) in d.points.iter().zip(xs.iter().zip(ys)) {
            prop_assert!(p.x.iter().all(|v| (0.0..=1.0).contains(v)));
            for (a, b) in norm.denormalize_x(&p.x).iter().zip(x) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
            prop_assert!((norm.denormalize_y(p.y) - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn posterior_variance_is_bounded(seed in 0u64..1000, ll in -2.0..1.0f64, lsf in -1.0..1.0f64, lsn in -6.0..-1.0f64) {
        let mut rng = Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (0..7).map(|_| vec![rand::Rng::random(&mut rng)]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (5.0 * x[0]).cos()).collect();
        let p = GprParams { log_lengthscale: ll, log_signal_var: lsf, log_noise_var: lsn };
        let data = Dataset::from_xy(&xs, &ys, 0);
        for i in 0..=20 {
            let v = gpr::predict(&p, &data, &[i as f64 / 20.0]).unwrap().variance;
            prop_assert!(v >= 0.0 && v <= p.signal_var() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn a12_is_complementary(a in prop::collection::vec(0u8..10, 1..12), b in prop::collection::vec(0u8..10, 1..12)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let s = a12(&a, &b).unwrap() + a12(&b, &a).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scott_knott_ranks_follow_means(groups in prop::collection::vec(prop::collection::vec(0.0..100.0f64, 5), 2..6)) {
        let named: Vec<(String, Vec<f64>)> = groups.iter().enumerate().map(|(i, g)| (format!("g{i}"), g.clone())).collect();
        let ranks = scott_knott(&named).unwrap();
        prop_assert_eq!(ranks.len(), named.len());
        let mean = |name: &str| {
            let g = &named.iter().find(|(n, _)| n == name).unwrap().1;
            g.iter().sum::<f64>() / g.len() as f64
        };
        for (a, ra) in &ranks {
            for (b, rb) in &ranks {
                if mean(a) < mean(b) {
                    prop_assert!(ra <= rb);
                }
            }
        }
        let min_rank = ranks.iter().map(|r| r.1).min().unwrap();
        prop_assert_eq!(min_rank, 1);
    }

    #[test]
    fn generations_keep_size_and_bounds(seed in 0u64..500, kind in 0usize..3, pop in 2usize..12) {
        let kind = [EaKind::Cmaes, EaKind::Pso, EaKind::De][kind];
        let params = EaParams { pop_size: pop, ..EaParams::default() };
        let lower = vec![-3.0, 0.0, 10.0];
        let upper = vec![3.0, 1.0, 50.0];
        let mut f = |x: &[f64]| -(x[0] * x[0] + (x[1] - 0.5).powi(2) + (x[2] - 40.0).powi(2));
        let mut rng = Rng::seed_from_u64(seed);
        let mut p = Population::random(kind, &params, &lower, &upper, &mut f, &mut rng);
        for _ in 0..15 {
            let q = ea_step(&p, &params, &mut f, &mut rng);
            prop_assert_eq!(q.len(), pop);
            p = environmental_selection(&p, &q);
            prop_assert_eq!(p.len(), pop);
            for x in &p.individuals {
                for (i, v) in x.iter().enumerate() {
                    prop_assert!(*v >= lower[i] && *v <= upper[i]);
                }
            }
        }
    }
}
