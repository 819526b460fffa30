mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use qtkit_core::stats::{bootstrap_ci_r2, ccc, levene, n_eff, r2, shapiro_wilk, wilcoxon_signed_rank, LeveneCenter};

#[test]
fn effective_sample_size_rows() {
    assert!((n_eff(0.153, 5, 25) - 15.5).abs() < 0.05);
    assert!((n_eff(0.343, 5, 25) - 10.5).abs() < 0.05);
    assert_eq!(n_eff(-0.2, 5, 25), 25.0);
}

#[test]
fn ccc_hand_cases() {
    assert!((ccc(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap() - 4.0 / 7.0).abs() < 1e-12);
    assert!((ccc(&[0.0, 1.0, 2.0], &[2.0, 1.0, 0.0]).unwrap() + 1.0).abs() < 1e-12);
    assert!((ccc(&[0.5, 1.5, 4.0], &[0.5, 1.5, 4.0]).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn wilcoxon_matches_full_enumeration() {
    let hand = [0.8, -0.3, 1.1, 0.4, -0.9, 0.25];
    let (w, p) = wilcoxon_signed_rank(&hand).unwrap();
    let (w_ref, p_ref) = common::wilcoxon_enumerated(&hand);
    assert_eq!(w, w_ref);
    assert!((p - p_ref).abs() < 1e-12, "{p} vs {p_ref}");

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 1..=8 {
        for _ in 0..25 {
            // rounding creates ties and zeros
            let d: Vec<f64> = (0..n).map(|_| (rng.random_range(-3.0f64..3.0) * 2.0).round() / 2.0).collect();
            if d.iter().all(|v| *v == 0.0) {
                assert!(wilcoxon_signed_rank(&d).is_none());
                continue;
            }
            let (w, p) = wilcoxon_signed_rank(&d).unwrap();
            let (w_ref, p_ref) = common::wilcoxon_enumerated(&d);
            assert_eq!(w, w_ref, "{d:?}");
            assert!((p - p_ref).abs() < 1e-12, "{d:?}: {p} vs {p_ref}");
        }
    }
}

#[test]
fn bootstrap_matches_second_implementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let y: Vec<f64> = (0..20).map(|i| i as f64 * 0.3 + rng.random_range(-0.5..0.5)).collect();
    let yhat: Vec<f64> = y.iter().map(|v| v + rng.random_range(-0.4..0.4)).collect();
    let (lo, hi) = bootstrap_ci_r2(&y, &yhat, 1000, 77).unwrap();

    let mut boot = ChaCha8Rng::seed_from_u64(77);
    let mut vals = Vec::new();
    for _ in 0..1000 {
        let idx: Vec<usize> = (0..y.len()).map(|_| boot.random_range(0..y.len())).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let ps: Vec<f64> = idx.iter().map(|&i| yhat[i]).collect();
        if let Ok(v) = r2(&ys, &ps) {
            vals.push(v);
        }
    }
    vals.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (vals.len() - 1) as f64;
        let (a, b) = (pos.floor() as usize, pos.ceil() as usize);
        vals[a] + (pos - a as f64) * (vals[b] - vals[a])
    };
    assert_eq!(lo, q(0.025));
    assert_eq!(hi, q(0.975));
    assert!(lo < r2(&y, &yhat).unwrap() && r2(&y, &yhat).unwrap() < hi);
}

#[test]
fn shapiro_p_agrees_with_simulated_null_at_n5() {
    let (w_obs, p) = shapiro_wilk(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    assert!(w_obs > 0.95 && p > 0.5, "W={w_obs} p={p}");
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let draws = 100_000;
    let below = (0..draws)
        .filter(|_| {
            let x: Vec<f64> = (0..5).map(|_| StandardNormal.sample(&mut rng)).collect();
            shapiro_wilk(&x).unwrap().0 <= w_obs
        })
        .count();
    let p_mc = below as f64 / draws as f64;
    assert!((p - p_mc).abs() < 0.03, "Royston p {p} vs simulated {p_mc}");
}

#[test]
fn levene_separates_very_different_variances() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a: Vec<f64> = (0..30).map(|_| StandardNormal.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..30).map(|_| 100.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
    let (_, p) = levene(&[a, b], LeveneCenter::Mean).unwrap();
    assert!(p < 1e-6, "p = {p}");
}
