use std::collections::BTreeMap;

use compass_core::stats::{
    analyze_axis, bonferroni, kruskal_wallis, mann_whitney_u, mann_whitney_u_using, pairwise_report, ranks, Axis,
    MwuMethod,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{distinct_sample, enumerated_p};

#[test]
fn smallest_exact_case() {
    let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
    assert_eq!(r.method, MwuMethod::Exact);
    assert_eq!(r.u, 0.0);
    assert!((r.p_two_sided - 1.0 / 3.0).abs() <= 1e-12);
}

#[test]
fn exact_matches_enumeration_for_all_small_designs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in 1..10 {
        for m in 1..=(10 - n) {
            for _ in 0..5 {
                let pool = distinct_sample(&mut rng, n + m);
                let (a, b) = pool.split_at(n);
                let r = mann_whitney_u(a, b).unwrap();
                assert_eq!(r.method, MwuMethod::Exact);
                let oracle = enumerated_p(a, b);
                assert!((r.p_two_sided - oracle).abs() <= 1e-9, "n={n} m={m}: {} vs {oracle}", r.p_two_sided);
            }
        }
    }
}

#[test]
fn rank_tests_ignore_monotone_transforms() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let a: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
    let b: Vec<f64> = (0..9).map(|_| rng.random_range(-2.0..4.0)).collect();
    let c: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
    let base_mwu = mann_whitney_u(&a, &b).unwrap();
    let base_kw = kruskal_wallis(&[&a, &b, &c]).unwrap();
    for _ in 0..20 {
        let (k, s, shift) = (rng.random_range(0.1..2.0), rng.random_range(0.5..5.0), rng.random_range(-50.0..50.0));
        let f = |x: &f64| s * x + k * x * x * x + shift + (0.3 * x).tanh();
        let map = |v: &[f64]| v.iter().map(f).collect::<Vec<_>>();
        assert_eq!(mann_whitney_u(&map(&a), &map(&b)).unwrap(), base_mwu);
        assert_eq!(kruskal_wallis(&[map(&a), map(&b), map(&c)]).unwrap(), base_kw);
    }
}

#[test]
fn normal_approximation_tracks_enumeration_at_five_by_five() {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = rng.random_range(0.0..2.0);
        let a: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0) + shift).collect();
        let exact = mann_whitney_u_using(&a, &b, MwuMethod::Exact).unwrap();
        let approx = mann_whitney_u_using(&a, &b, MwuMethod::NormalApprox).unwrap();
        assert_eq!(exact.u, approx.u);
        worst = worst.max((exact.p_two_sided - approx.p_two_sided).abs());
    }
    assert!(worst <= 0.02, "worst gap {worst}");
}

#[test]
fn ties_use_the_approximation_and_full_ties_give_one() {
    let r = mann_whitney_u(&[1.0, 2.0, 2.0], &[2.0, 3.0]).unwrap();
    assert_eq!(r.method, MwuMethod::NormalApprox);
    let flat = mann_whitney_u(&[5.0; 4], &[5.0; 3]).unwrap();
    assert_eq!(flat.p_two_sided, 1.0);
    assert!(mann_whitney_u_using(&[1.0, 1.0], &[2.0], MwuMethod::Exact).is_err());
    assert!(mann_whitney_u(&[], &[1.0]).is_err());
    assert!(mann_whitney_u(&[f64::NAN], &[1.0]).is_err());
}

#[test]
fn large_samples_fall_back_to_the_approximation() {
    let a: Vec<f64> = (0..7).map(f64::from).collect();
    let b: Vec<f64> = (7..13).map(f64::from).collect();
    let r = mann_whitney_u(&a, &b).unwrap();
    assert_eq!(r.method, MwuMethod::NormalApprox);
    assert_eq!(r.u, 0.0);
    assert!(r.p_two_sided < 0.01);
}

#[test]
fn kruskal_wallis_hand_values() {
    let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
    let h = 12.0 / 42.0 * (36.0 / 3.0 + 225.0 / 3.0) - 21.0;
    assert!((r.h - h).abs() < 1e-12);
    assert_eq!(r.df, 1);
    let p1 = statrs::function::erf::erfc((h / 2.0).sqrt());
    assert!((r.p - p1).abs() < 1e-10, "{} vs {p1}", r.p);

    let three = kruskal_wallis(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
    let h3 = 12.0 / 42.0 * (9.0 + 49.0 + 121.0) / 2.0 - 21.0;
    assert!((three.h - h3).abs() < 1e-12);
    assert!((three.p - (-h3 / 2.0).exp()).abs() < 1e-10);

    // Ties: ranks 1.5,1.5,3 | 4,5.5,5.5, correction 1 - 12/210.
    let tied = kruskal_wallis(&[vec![1.0, 1.0, 2.0], vec![3.0, 4.0, 4.0]]).unwrap();
    let raw = 12.0 / 42.0 * (36.0 / 3.0 + 225.0 / 3.0) - 21.0;
    assert!((tied.h - raw / (1.0 - 12.0 / 210.0)).abs() < 1e-12);
}

#[test]
fn kruskal_wallis_identical_and_degenerate_groups() {
    let g = vec![0.5, -1.0, 3.0, 3.0];
    let r = kruskal_wallis(&[g.clone(), g.clone(), g]).unwrap();
    assert_eq!(r.h, 0.0);
    assert_eq!(r.p, 1.0);
    let flat = kruskal_wallis(&[vec![2.0; 3], vec![2.0; 4]]).unwrap();
    assert_eq!((flat.h, flat.p), (0.0, 1.0));
    assert!(kruskal_wallis(&[vec![1.0]]).is_err());
    assert!(kruskal_wallis(&[vec![1.0], vec![]]).is_err());
}

#[test]
fn kruskal_wallis_ignores_group_and_member_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut groups: Vec<Vec<f64>> =
        (0..4).map(|_| (0..6).map(|_| f64::from(rng.random_range(0..10))).collect()).collect();
    let base = kruskal_wallis(&groups).unwrap();
    for _ in 0..10 {
        groups.shuffle(&mut rng);
        for g in &mut groups {
            g.shuffle(&mut rng);
        }
        let r = kruskal_wallis(&groups).unwrap();
        assert!((r.h - base.h).abs() < 1e-12 && (r.p - base.p).abs() < 1e-12);
    }
}

#[test]
fn average_ranks_and_tie_groups() {
    let (r, ties) = ranks(&[10.0, 20.0, 10.0, 30.0, 20.0, 20.0]);
    assert_eq!(r, [1.5, 4.0, 1.5, 6.0, 4.0, 4.0]);
    assert_eq!(ties, [2, 3]);
}

fn language_groups(langs: &[&str], seed: u64) -> BTreeMap<String, Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    langs.iter().map(|l| (l.to_string(), (0..11).map(|_| rng.random_range(-1.0..1.0)).collect())).collect()
}

#[test]
fn shifted_language_separates_from_the_rest() {
    let mut groups = language_groups(&["de", "en", "fr"], 3);
    for v in groups.get_mut("de").unwrap() {
        *v += 100.0;
    }
    let report = pairwise_report(&groups, 0.05).unwrap();
    let names: Vec<(&str, &str)> = report.pairs.iter().map(|p| (p.a.as_str(), p.b.as_str())).collect();
    assert_eq!(names, [("de", "en"), ("de", "fr"), ("en", "fr")]);
    assert_eq!(report.n_significant, 2);
    assert!(report.pairs[0].significant && report.pairs[1].significant && !report.pairs[2].significant);
    for p in &report.pairs {
        assert!((p.p_adjusted - (3.0 * p.test.p_two_sided).min(1.0)).abs() < 1e-15);
    }
    let axis = analyze_axis(Axis::Social, &groups, 0.05).unwrap();
    assert!(axis.kruskal_wallis.unwrap().p < 0.05);
}

#[test]
fn fourteen_languages_give_ninety_one_pairs() {
    let langs = ["ar", "de", "en", "es", "fa", "fr", "hi", "it", "ja", "ko", "pt", "ru", "tr", "zh"];
    let report = pairwise_report(&language_groups(&langs, 5), 0.05).unwrap();
    assert_eq!(report.pairs.len(), 91);
    let keys: Vec<(String, String)> = report.pairs.iter().map(|p| (p.a.clone(), p.b.clone())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn single_group_has_no_tests() {
    let groups = language_groups(&["en"], 1);
    let a = analyze_axis(Axis::Economic, &groups, 0.05).unwrap();
    assert!(a.kruskal_wallis.is_none() && a.pairwise.is_none());
    assert!(pairwise_report(&groups, 0.05).is_err());
}

proptest! {
    #[test]
    fn mwu_is_symmetric_and_bounded(a in prop::collection::vec(-20i32..20, 1..9), b in prop::collection::vec(-20i32..20, 1..9)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = mann_whitney_u(&a, &b).unwrap();
        let ba = mann_whitney_u(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab.p_two_sided));
        prop_assert!(ab.u <= (a.len() * b.len()) as f64 / 2.0);
    }

    #[test]
    fn bonferroni_scales_and_caps(ps in prop::collection::vec(0.0f64..=1.0, 1..30)) {
        let adj = bonferroni(&ps).unwrap();
        for (p, q) in ps.iter().zip(&adj) {
            prop_assert!(q >= p && *q <= 1.0);
            prop_assert!((q - (p * ps.len() as f64).min(1.0)).abs() < 1e-15);
        }
    }
}

#[test]
fn bonferroni_rejects_out_of_range() {
    assert!(bonferroni(&[0.5, 1.2]).is_err());
    assert!(bonferroni(&[f64::NAN]).is_err());
}
