//! Fixtures shared by the core suites and the workspace acceptance target.
#![allow(dead_code)]

use compass_core::questionnaire::{load_questionnaire, AnswerChoice, Questionnaire};
use compass_core::scoring::Answers;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

pub const SD: Option<AnswerChoice> = Some(AnswerChoice::StronglyDisagree);
pub const D: Option<AnswerChoice> = Some(AnswerChoice::Disagree);
pub const A: Option<AnswerChoice> = Some(AnswerChoice::Agree);
pub const SA: Option<AnswerChoice> = Some(AnswerChoice::StronglyAgree);
pub const UNK: Option<AnswerChoice> = None;

/// (language, completion, expected); expectations follow the matching rules
/// one by one, independently of the implementation.
pub const PARSE_ORACLE: [(&str, &str, Option<AnswerChoice>); 40] = [
    ("en", "Strongly agree", SA),
    ("en", "I disagree.", D),
    ("en", "3. Agree", A),
    ("en", "2", D),
    ("en", "My answer: 4)", SA),
    ("en", "I'm sorry, but I cannot share personal opinions on this.", UNK),
    ("en", "1. Strongly disagree\n4. Strongly agree", UNK),
    ("en", "Disagreement is healthy.", UNK),
    ("en", "AGREE!!!", A),
    ("en", "Strongly\n   agree", SA),
    ("en", "I do not agree with this.", D),
    ("en", "The value 2.5 is not an option.", UNK),
    ("en", "Option (3): it depends", A),
    ("bg", "Напълно съм съгласен.", SA),
    ("bg", "Не съм съгласен", D),
    ("cz", "Nesouhlasím.", D),
    ("cz", "Rozhodně souhlasím", SA),
    ("de", "Ich stimme voll und ganz zu.", SA),
    ("de", "Stimme nicht zu", D),
    ("de", "Dazu habe ich keine Meinung.", UNK),
    ("es", "Estoy en desacuerdo.", D),
    ("es", "De acuerdo o en desacuerdo, no sabría decir.", UNK),
    ("fa", "كاملاً موافقم", SA),
    ("fa", "شديداً مخالفم", SD),
    ("fa", "پاسخ: ۲.", D),
    ("fr", "Je ne suis pas d’accord.", D),
    ("fr", "Tout à fait d'accord", SA),
    ("fr", "Je ne peux pas répondre à cette question.", UNK),
    ("it", "Sono d'accordo.", A),
    ("it", "Fortemente in disaccordo", SD),
    ("pl", "Nie zgadzam się.", D),
    ("pt-pt", "Discordo totalmente.", SD),
    ("ro", "Nu sunt de acord.", D),
    ("ro", "Total de acord", SA),
    ("ru", "Категорически не согласен", SD),
    ("ru", "Я не могу ответить на этот вопрос.", UNK),
    ("sl", "Ne strinjam se.", D),
    ("tr", "KATILIYORUM", A),
    ("tr", "Kesinlikle katılmıyorum.", SD),
    ("xx", "3.", A),
];

pub const THREE_ITEM: &str = include_str!("../fixtures/three_item.toml");
pub const THREE_ITEM_ORACLE: &str = include_str!("../fixtures/three_item_oracle.csv");
pub const ZERO_WEIGHT: &str = include_str!("../fixtures/zero_weight.toml");

pub fn three_item() -> Questionnaire {
    load_questionnaire(THREE_ITEM.as_bytes()).expect("three-item fixture loads")
}

pub fn zero_weight() -> Questionnaire {
    load_questionnaire(ZERO_WEIGHT.as_bytes()).expect("zero-weight fixture loads")
}

/// Every answer set of the three-item fixture with its precomputed point.
pub fn three_item_oracle() -> Vec<(Answers, f64, f64)> {
    let mut lines = THREE_ITEM_ORACLE.lines();
    let header: Vec<&str> = lines.next().expect("header").split(',').collect();
    lines
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            let answers = header[..3]
                .iter()
                .zip(&cells[..3])
                .map(|(id, key)| (id.to_string(), AnswerChoice::from_key(key).expect("answer key")))
                .collect();
            (answers, cells[3].parse().expect("economic"), cells[4].parse().expect("social"))
        })
        .collect()
}

/// Two-sided p by enumerating every assignment of ranks to the first sample.
pub fn enumerated_p(a: &[f64], b: &[f64]) -> f64 {
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = a.len();
    let total_n = all.len();
    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = |x: f64| (sorted.iter().position(|&y| y == x).unwrap() + 1) as f64;
    let u_of = |rank_sum: f64| rank_sum - (n * (n + 1)) as f64 / 2.0;
    let observed = u_of(a.iter().map(|&x| rank(x)).sum());
    let centre = (n * b.len()) as f64 / 2.0;
    let (mut extreme, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << total_n) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let rank_sum: f64 = (0..total_n).filter(|i| mask & (1 << i) != 0).map(|i| (i + 1) as f64).sum();
        total += 1;
        if (u_of(rank_sum) - centre).abs() >= (observed - centre).abs() - 1e-12 {
            extreme += 1;
        }
    }
    extreme as f64 / total as f64
}

pub fn distinct_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut pool: Vec<f64> = (0..1000).map(|i| i as f64 * 0.37 - 100.0).collect();
    pool.shuffle(rng);
    pool.truncate(n);
    pool
}

/// Population std of projections, mean first, then squared deviations.
pub fn two_pass_sigma(rows: &[&[f64]], v: &[f64]) -> f64 {
    let proj: Vec<f64> = rows.iter().map(|r| r.iter().zip(v).fold(0.0, |acc, (a, b)| acc + a * b)).collect();
    let n = proj.len() as f64;
    let mean = proj.iter().sum::<f64>() / n;
    let var = proj.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
    var.sqrt()
}
