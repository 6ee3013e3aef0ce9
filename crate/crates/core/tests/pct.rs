use std::collections::BTreeMap;

use compass_core::error::Error;
use compass_core::questionnaire::{
    load_questionnaire, AnswerChoice, AxisWeights, Domain, Proposition, Questionnaire,
    ScoringConfig, CANONICAL_PCT,
};
use compass_core::scoring::{aggregate_runs, score, Answers, CompassPoint};
use num_rational::Rational64;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

mod common;

/// Reads the weight table straight from the TOML document as floats,
/// bypassing the library loader.
fn oracle_table() -> Vec<(String, [(f64, f64); 4])> {
    let doc: toml::Table = CANONICAL_PCT.parse().unwrap();
    let num = |v: &toml::Value| match v {
        toml::Value::Integer(i) => *i as f64,
        toml::Value::String(s) => s.parse::<f64>().unwrap(),
        other => panic!("unexpected weight {other:?}"),
    };
    doc["propositions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            let w = p["weights"].as_table().unwrap();
            let mut out = [(0.0, 0.0); 4];
            for (slot, key) in ["sd", "d", "a", "sa"].iter().enumerate() {
                out[slot] = (num(&w[*key]["econ"]), num(&w[*key]["soc"]));
            }
            (p["id"].as_str().unwrap().to_string(), out)
        })
        .collect()
}

fn oracle_score(table: &[(String, [(f64, f64); 4])], answers: &Answers) -> (f64, f64) {
    let (mut e, mut s) = (0.0, 0.0);
    for (id, w) in table {
        let slot = usize::from(answers[id].index() - 1);
        e += w[slot].0;
        s += w[slot].1;
    }
    (e / 8.0 + 0.38, s / 19.5 + 2.41)
}

fn choice() -> impl Strategy<Value = AnswerChoice> {
    (1u8..=4).prop_map(|i| AnswerChoice::from_index(i).unwrap())
}

fn answer_set(q: &Questionnaire) -> impl Strategy<Value = Answers> {
    let ids: Vec<String> = q.propositions.iter().map(|p| p.id.clone()).collect();
    proptest::collection::vec(choice(), ids.len())
        .prop_map(move |cs| ids.iter().cloned().zip(cs).collect())
}

#[test]
fn uniform_answer_sets_match_float_oracle() {
    let q = Questionnaire::canonical().unwrap();
    let table = oracle_table();
    for c in AnswerChoice::ALL {
        let answers: Answers = q.propositions.iter().map(|p| (p.id.clone(), c)).collect();
        let got = score(&answers, &q, &ScoringConfig::canonical()).unwrap();
        let (e, s) = oracle_score(&table, &answers);
        assert!((got.economic - e).abs() < 1e-12, "{c:?}: {} vs {e}", got.economic);
        assert!((got.social - s).abs() < 1e-12, "{c:?}: {} vs {s}", got.social);
    }
}

#[test]
fn exact_extremes_lie_inside_the_plane() {
    // The score is a sum of per-proposition terms, so the extremes over all
    // 4^62 answer sets are reached by choosing each term's extreme.
    let table = oracle_table();
    let pick = |axis: usize, hi: bool| -> f64 {
        table
            .iter()
            .map(|(_, w)| {
                let vals = w.iter().map(|p| if axis == 0 { p.0 } else { p.1 });
                if hi { vals.fold(f64::MIN, f64::max) } else { vals.fold(f64::MAX, f64::min) }
            })
            .sum()
    };
    let bounds = [
        pick(0, false) / 8.0 + 0.38,
        pick(0, true) / 8.0 + 0.38,
        pick(1, false) / 19.5 + 2.41,
        pick(1, true) / 19.5 + 2.41,
    ];
    for b in bounds {
        assert!((-10.0..=10.0).contains(&b), "extreme {b} outside [-10, 10]");
    }
}

#[test]
fn zero_weights_score_exactly_the_biases() {
    let q = common::zero_weight();
    for c in AnswerChoice::ALL {
        let a: Answers = q.propositions.iter().map(|p| (p.id.clone(), c)).collect();
        let p = score(&a, &q, &q.scoring).unwrap();
        assert_eq!((p.economic, p.social), (0.38, 2.41));
    }
}

#[test]
fn three_item_fixture_matches_brute_force_table() {
    let q = common::three_item();
    let oracle = common::three_item_oracle();
    assert_eq!(oracle.len(), 64);
    for (answers, e, s) in oracle {
        let p = score(&answers, &q, &q.scoring).unwrap();
        assert!((p.economic - e).abs() <= 1e-12, "{answers:?}: {} vs {e}", p.economic);
        assert!((p.social - s).abs() <= 1e-12, "{answers:?}: {} vs {s}", p.social);
    }
}

#[test]
fn thousand_random_answer_sets_stay_on_the_plane() {
    let q = Questionnaire::canonical().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let a: Answers = q
            .propositions
            .iter()
            .map(|p| (p.id.clone(), AnswerChoice::from_index(rng.random_range(1..=4)).unwrap()))
            .collect();
        let p = score(&a, &q, &q.scoring).unwrap();
        assert!((-10.0..=10.0).contains(&p.economic) && (-10.0..=10.0).contains(&p.social), "{p:?}");
    }
}

#[test]
fn published_constants() {
    let cfg = ScoringConfig::canonical();
    assert_eq!(cfg.economic_bias, Rational64::new(38, 100));
    assert_eq!(cfg.social_bias, Rational64::new(241, 100));
    assert_eq!(cfg.economic_divisor, Rational64::from_integer(8));
    assert_eq!(cfg.social_divisor, Rational64::new(195, 10));
}

#[test]
fn canonical_domains() {
    let q = Questionnaire::canonical().unwrap();
    let expected = [
        (Domain::CountryWorld, 7),
        (Domain::Economy, 14),
        (Domain::PersonalSocialValues, 18),
        (Domain::WiderSociety, 12),
        (Domain::Religion, 5),
        (Domain::Sex, 6),
    ];
    for (d, n) in expected {
        assert_eq!(q.domain_counts[&d], n, "{d:?}");
    }
}

#[test]
fn dropping_a_proposition_breaks_canonical_load() {
    let start = CANONICAL_PCT.rfind("[[propositions]]").unwrap();
    let truncated = &CANONICAL_PCT[..start];
    let err = load_questionnaire(truncated.as_bytes()).unwrap_err();
    assert!(matches!(err, Error::DomainCountMismatch(_)), "{err}");
}

fn two_item() -> Questionnaire {
    let text = |s: &str| BTreeMap::from([("en".to_string(), s.to_string())]);
    let w = |e: i64, s: i64| AxisWeights::new(Rational64::from_integer(e), Rational64::from_integer(s));
    Questionnaire::new(
        vec![
            Proposition::new("x", Domain::Economy, text("X"), [w(-2, 0), w(-1, 0), w(1, 0), w(2, 0)]),
            Proposition::new("y", Domain::Sex, text("Y"), [w(0, 3), w(0, 1), w(0, -1), w(0, -3)]),
        ],
        vec!["en".into()],
        ScoringConfig::canonical(),
        false,
    )
    .unwrap()
}

#[test]
fn hand_computed_two_item_instrument() {
    let q = two_item();
    let a: Answers = [("x".to_string(), AnswerChoice::StronglyAgree), ("y".to_string(), AnswerChoice::StronglyDisagree)].into();
    let p = score(&a, &q, &ScoringConfig::canonical()).unwrap();
    assert!((p.economic - (2.0 / 8.0 + 0.38)).abs() < 1e-15);
    assert!((p.social - (3.0 / 19.5 + 2.41)).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn matches_oracle_and_stays_bounded(a in answer_set(&Questionnaire::canonical().unwrap())) {
        let q = Questionnaire::canonical().unwrap();
        let p = score(&a, &q, &ScoringConfig::canonical()).unwrap();
        let (e, s) = oracle_score(&oracle_table(), &a);
        prop_assert!((p.economic - e).abs() < 1e-12);
        prop_assert!((p.social - s).abs() < 1e-12);
        prop_assert!((-10.0..=10.0).contains(&p.economic));
        prop_assert!((-10.0..=10.0).contains(&p.social));
    }

    #[test]
    fn proposition_order_is_irrelevant(
        a in answer_set(&Questionnaire::canonical().unwrap()),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let q = Questionnaire::canonical().unwrap();
        let mut shuffled = q.propositions.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let q2 = Questionnaire::new(shuffled, q.languages.clone(), q.scoring, true).unwrap();
        let cfg = ScoringConfig::canonical();
        prop_assert_eq!(score(&a, &q, &cfg).unwrap(), score(&a, &q2, &cfg).unwrap());
    }

    #[test]
    fn weight_scaling_is_affine(a in answer_set(&Questionnaire::canonical().unwrap()), c in -5i64..=5) {
        let q = Questionnaire::canonical().unwrap();
        let cfg = ScoringConfig::canonical();
        let scaled: Vec<Proposition> = q
            .propositions
            .iter()
            .map(|p| {
                let w = p.all_weights().map(|w| AxisWeights::new(w.econ.0 * c, w.soc.0 * c));
                Proposition::new(p.id.clone(), p.domain, p.text.clone(), w)
            })
            .collect();
        let qs = Questionnaire::new(scaled, q.languages.clone(), cfg, false).unwrap();
        let base = score(&a, &q, &cfg).unwrap();
        let got = score(&a, &qs, &cfg).unwrap();
        let cf = c as f64;
        prop_assert!((got.economic - 0.38 - cf * (base.economic - 0.38)).abs() < 1e-12);
        prop_assert!((got.social - 2.41 - cf * (base.social - 2.41)).abs() < 1e-12);
    }

    #[test]
    fn one_answer_change_moves_by_its_weight_delta(
        a in answer_set(&Questionnaire::canonical().unwrap()),
        idx in 0usize..62,
        c in choice(),
    ) {
        let q = Questionnaire::canonical().unwrap();
        let cfg = ScoringConfig::canonical();
        let p = &q.propositions[idx];
        let mut b = a.clone();
        let old = b.insert(p.id.clone(), c).unwrap();
        let (s0, s1) = (score(&a, &q, &cfg).unwrap(), score(&b, &q, &cfg).unwrap());
        let de = (p.weights(c).econ.0 - p.weights(old).econ.0).to_f64().unwrap();
        let ds = (p.weights(c).soc.0 - p.weights(old).soc.0).to_f64().unwrap();
        prop_assert!((s1.economic - s0.economic - de / 8.0).abs() < 1e-12);
        prop_assert!((s1.social - s0.social - ds / 19.5).abs() < 1e-12);
    }

    #[test]
    fn aggregate_matches_two_pass_oracle(xs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..40)) {
        let pts: Vec<CompassPoint> = xs.iter().map(|&(e, s)| CompassPoint::new(e, s)).collect();
        let agg = aggregate_runs(&pts).unwrap();
        let n = xs.len() as f64;
        let me = xs.iter().map(|p| p.0).sum::<f64>() / n;
        let ve = xs.iter().map(|p| (p.0 - me) * (p.0 - me)).sum::<f64>() / n;
        prop_assert!((agg.mean.economic - me).abs() < 1e-12);
        prop_assert!((agg.std.economic - ve.sqrt()).abs() < 1e-9);
        prop_assert!(agg.std.social >= 0.0);
    }
}
