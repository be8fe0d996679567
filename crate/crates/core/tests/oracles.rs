//! Implementations checked against independent, deliberately naive oracles.

use mlo_core::analysis::{a12, scott_knott, budget_ratio, e_bbc, loss_curve, wilcoxon_signed_rank, EffectSize, Verdict};
use mlo_core::engine::{EnvRecord, FeRecord, RunTrace};
use mlo_core::rng::Rng;
use mlo_core::surrogates::{gpr, nn, Dataset, GprParams, NnParams, SurrogateParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng as _, SeedableRng};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn kernel(p: &GprParams, a: &[f64], b: &[f64]) -> f64 {
    let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    p.signal_var() * (-0.5 * r2 / p.lengthscale().powi(2)).exp()
}

/// Dense LU-based evaluation: explicit inverse and determinant.
fn direct(p: &GprParams, data: &Dataset, x: &[f64]) -> (f64, f64, f64) {
    let n = data.len();
    let xs: Vec<&[f64]> = data.xs().collect();
    let k = DMatrix::from_fn(n, n, |i, j| {
        kernel(p, xs[i], xs[j]) + if i == j { p.noise_var() } else { 0.0 }
    });
    let kinv = k.clone().try_inverse().unwrap();
    let y = DVector::from_iterator(n, data.ys());
    let nll = 0.5 * (y.transpose() * &kinv * &y)[0]
        + 0.5 * k.determinant().ln()
        + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    let ks = DVector::from_iterator(n, xs.iter().map(|xi| kernel(p, xi, x)));
    let mean = (ks.transpose() * &kinv * &y)[0];
    let var = p.signal_var() - (ks.transpose() * &kinv * &ks)[0];
    (nll, mean, var)
}

#[test]
fn gpr_matches_direct_inverse() {
    let mut rng = Rng::seed_from_u64(3);
    for _ in 0..20 {
        let xs: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random(), rng.random()]).collect();
        let ys: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let data = Dataset::from_xy(&xs, &ys, 0);
        let p = GprParams {
            log_lengthscale: rng.random_range(-1.0..0.5),
            log_signal_var: rng.random_range(-1.0..1.0),
            log_noise_var: rng.random_range(-4.0..-1.0),
        };
        let x = vec![rng.random(), rng.random()];
        let (nll, mean, var) = direct(&p, &data, &x);
        assert!(rel(gpr::loss(&p, &data).unwrap(), nll) < 1e-10);
        let pred = gpr::predict(&p, &data, &x).unwrap();
        assert!(rel(pred.mean, mean) < 1e-8, "{} vs {mean}", pred.mean);
        assert!(rel(pred.variance, var) < 1e-8, "{} vs {var}", pred.variance);
    }
}

/// Forward pass written from the layer description alone.
fn naive_forward(p: &NnParams, x: &[f64]) -> f64 {
    let widths = [p.input_dim, 40, 40, 40, 1];
    let mut w = p.weights.iter();
    let mut h = x.to_vec();
    for l in 0..4 {
        let (fin, fout) = (widths[l], widths[l + 1]);
        let mat: Vec<Vec<f64>> = (0..fout).map(|_| (0..fin).map(|_| *w.next().unwrap()).collect()).collect();
        let bias: Vec<f64> = (0..fout).map(|_| *w.next().unwrap()).collect();
        h = mat
            .iter()
            .zip(&bias)
            .map(|(row, b)| {
                let z = b + row.iter().zip(&h).map(|(a, c)| a * c).sum::<f64>();
                if l < 3 {
                    z.max(0.0)
                } else {
                    z
                }
            })
            .collect();
    }
    assert!(w.next().is_none());
    h[0]
}

#[test]
fn nn_matches_second_implementation() {
    let mut rng = Rng::seed_from_u64(8);
    for _ in 0..20 {
        let dims = rng.random_range(1..=5);
        let mut p = NnParams::kaiming(dims, &mut rng);
        for w in &mut p.weights {
            *w += rng.random_range(-0.1..0.1);
        }
        let xs: Vec<Vec<f64>> = (0..6).map(|_| (0..dims).map(|_| rng.random()).collect()).collect();
        let ys: Vec<f64> = (0..6).map(|_| rng.random()).collect();
        let data = Dataset::from_xy(&xs, &ys, 0);
        let mut mse = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            let o = naive_forward(&p, x);
            assert!((p.forward(x) - o).abs() <= 1e-12 * o.abs().max(1.0));
            mse += (o - y).powi(2);
        }
        mse /= 6.0;
        assert!(rel(nn::loss(&p, &data).unwrap(), mse) < 1e-12);
    }
}

fn synthetic_trace(rng: &mut Rng, envs: usize, fes: usize) -> RunTrace {
    let mut trace = RunTrace {
        algorithm: "X".into(),
        seed: 0,
        dims: 1,
        fe_cap: fes,
        truncated: false,
        fes: Vec::new(),
        envs: Vec::new(),
    };
    for t in 0..envs {
        let opt: f64 = rng.random_range(30.0..70.0);
        let mut best = f64::NEG_INFINITY;
        let mut best_fe = 0;
        for fe in 1..=fes {
            let y = opt - rng.random_range(0.0..50.0);
            if y > best {
                best = y;
                best_fe = fe;
            }
            trace.fes.push(FeRecord {
                env: t,
                fe,
                x: vec![0.0],
                y_true: y,
                best_so_far: best,
            });
        }
        trace.envs.push(EnvRecord {
            env: t,
            best_x: vec![0.0],
            best_y: best,
            optimum_x: vec![0.0],
            optimum_y: opt,
            fe_count: fes,
            fe_to_best: best_fe,
            fe_to_target: None,
            train_size: fes,
            start_params: SurrogateParams::Gpr(GprParams::default()),
            final_params: SurrogateParams::Gpr(GprParams::default()),
            meta_trace: None,
        });
    }
    trace
}

#[test]
fn e_bbc_and_loss_curve_match_recomputation() {
    let mut rng = Rng::seed_from_u64(17);
    for _ in 0..20 {
        let trace = synthetic_trace(&mut rng, 7, 9);
        // Oracle: re-derive everything from the raw FE records.
        let mut total = 0.0;
        let mut curve = Vec::new();
        for t in 0..7 {
            let opt = trace.envs[t].optimum_y;
            let mut best = f64::NEG_INFINITY;
            for r in trace.fes.iter().filter(|r| r.env == t) {
                best = best.max(r.y_true);
                curve.push(opt - best);
            }
            total += opt - best;
        }
        assert_eq!(e_bbc(&trace).unwrap(), total / 7.0);
        let lc: Vec<f64> = loss_curve(&trace).iter().map(|p| p.loss).collect();
        assert_eq!(lc, curve);
    }
}

#[test]
fn e_bbc_examples() {
    let mut rng = Rng::seed_from_u64(2);
    let mut trace = synthetic_trace(&mut rng, 2, 3);
    trace.envs[0].best_y = trace.envs[0].optimum_y - 1.0;
    trace.envs[1].best_y = trace.envs[1].optimum_y - 3.0;
    assert_eq!(e_bbc(&trace).unwrap(), 2.0);
    for e in &mut trace.envs {
        e.best_y = e.optimum_y;
    }
    assert_eq!(e_bbc(&trace).unwrap(), 0.0);
    trace.envs.clear();
    assert!(e_bbc(&trace).is_err());
}

#[test]
fn budget_ratio_examples() {
    assert_eq!(budget_ratio(&[3, 8, 5], &[3, 8, 5]).unwrap(), 1.0);
    assert_eq!(budget_ratio(&[20], &[10]).unwrap(), 2.0);
    assert_eq!(budget_ratio(&[140; 4], &[20; 4]).unwrap(), 7.0);
    assert!(budget_ratio(&[1, 2], &[1]).is_err());
    let mut rng = Rng::seed_from_u64(4);
    for _ in 0..20 {
        let peer: Vec<usize> = (0..10).map(|_| rng.random_range(1..200)).collect();
        let best: Vec<usize> = (0..10).map(|_| rng.random_range(1..200)).collect();
        let mut s = 0.0;
        for t in 0..10 {
            s += peer[t] as f64 / best[t] as f64;
        }
        assert_eq!(budget_ratio(&peer, &best).unwrap(), s / 10.0);
    }
}

#[test]
fn a12_matches_pair_loop() {
    assert_eq!(a12(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(), 0.0);
    assert_eq!(EffectSize::of(0.0), EffectSize::Large);
    let same = [2.0, 3.0, 3.0, 9.0];
    assert_eq!(a12(&same, &same).unwrap(), 0.5);
    assert_eq!(EffectSize::of(0.5), EffectSize::Equivalent);

    let mut rng = Rng::seed_from_u64(9);
    for _ in 0..50 {
        let a: Vec<f64> = (0..rng.random_range(1..15)).map(|_| rng.random_range(0..6) as f64).collect();
        let b: Vec<f64> = (0..rng.random_range(1..15)).map(|_| rng.random_range(0..6) as f64).collect();
        let mut wins = 0usize;
        let mut ties = 0usize;
        for x in &a {
            for y in &b {
                if x > y {
                    wins += 1;
                }
                if x == y {
                    ties += 1;
                }
            }
        }
        let expect = (wins as f64 + 0.5 * ties as f64) / (a.len() * b.len()) as f64;
        assert_eq!(a12(&a, &b).unwrap(), expect);
    }
}

/// Two-sided p by enumerating all 2^n sign assignments of the ranks.
fn enumerate_p(d: &[f64]) -> f64 {
    let nz: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    let n = nz.len();
    let mags: Vec<f64> = nz.iter().map(|v| v.abs()).collect();
    let ranks: Vec<f64> = mags
        .iter()
        .map(|m| {
            let below = mags.iter().filter(|o| *o < m).count() as f64;
            let equal = mags.iter().filter(|o| *o == m).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = nz.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed + 1e-9 {
            le += 1;
        }
        if w >= observed - 1e-9 {
            ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (2.0 * (le.min(ge) as f64) / total).min(1.0)
}

#[test]
fn wilcoxon_matches_enumeration() {
    let w = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5], 0.05).unwrap();
    assert_eq!((w.w_plus, w.w_minus), (15.0, 0.0));
    assert!((w.p - 0.0625).abs() < 1e-15);

    let mut rng = Rng::seed_from_u64(12);
    for _ in 0..60 {
        let n = rng.random_range(5..14);
        // Small integer values produce zeros and tied magnitudes.
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..7) as f64).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..7) as f64).collect();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let w = wilcoxon_signed_rank(&a, &b, 0.05).unwrap();
        if d.iter().all(|v| *v == 0.0) {
            assert_eq!((w.p, w.verdict), (1.0, Verdict::Tie));
            continue;
        }
        let p = enumerate_p(&d);
        assert!((w.p - p).abs() < 1e-12, "{} vs {p}", w.p);
        let swapped = wilcoxon_signed_rank(&b, &a, 0.05).unwrap();
        assert_eq!((swapped.w_plus, swapped.w_minus), (w.w_minus, w.w_plus));
        assert_eq!(swapped.p, w.p);
    }
}

#[test]
fn wilcoxon_normal_branch_is_close_to_exact_tail() {
    // 30 positive, distinct differences: W- = 0; the exact p is 2 / 2^30.
    let a: Vec<f64> = (1..=30).map(|v| v as f64).collect();
    let w = wilcoxon_signed_rank(&a, &vec![0.0; 30], 0.05).unwrap();
    assert!(w.p < 1e-5 && w.p > 0.0);
    assert_eq!(w.verdict, Verdict::Greater);
}

#[test]
fn scott_knott_examples() {
    let one = scott_knott(&[("a".to_string(), vec![1.0, 2.0, 3.0])]).unwrap();
    assert_eq!(one, vec![("a".to_string(), 1)]);

    let split = scott_knott(&[
        ("hi".to_string(), vec![100.0, 101.0, 99.0, 100.5, 99.5]),
        ("lo".to_string(), vec![0.0, 1.0, -1.0, 0.5, -0.5]),
    ])
    .unwrap();
    let rank = |n: &str| split.iter().find(|(m, _)| m == n).unwrap().1;
    assert_eq!((rank("lo"), rank("hi")), (1, 2));
}

#[test]
fn scott_knott_keeps_null_groups_together() {
    let mut rng = Rng::seed_from_u64(21);
    let mut merged = 0;
    for _ in 0..100 {
        let groups: Vec<(String, Vec<f64>)> = (0..4)
            .map(|g| {
                let v = (0..20)
                    .map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng))
                    .collect();
                (format!("g{g}"), v)
            })
            .collect();
        if scott_knott(&groups).unwrap().iter().all(|(_, r)| *r == 1) {
            merged += 1;
        }
    }
    assert!(merged >= 90, "{merged} of 100");
}
