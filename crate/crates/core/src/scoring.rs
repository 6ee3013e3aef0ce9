//! Compass coordinates from a full answer set.

use std::collections::BTreeMap;

use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedDiv, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::questionnaire::{AnswerChoice, Questionnaire, ScoringConfig};

/// A position on the economic (x) and social (y) axes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CompassPoint {
    pub economic: f64,
    pub social: f64,
}

impl CompassPoint {
    pub fn new(economic: f64, social: f64) -> Self {
        CompassPoint { economic, social }
    }
}

/// Proposition id -> chosen answer.
pub type Answers = BTreeMap<String, AnswerChoice>;

/// Scores one complete answer set.
///
/// Weighted sums, division and bias are carried out in exact rational
/// arithmetic; the single rounding step is the final conversion to `f64`.
/// Every proposition must be answered and no unknown ids may appear.
pub fn score(answers: &Answers, q: &Questionnaire, cfg: &ScoringConfig) -> Result<CompassPoint> {
    cfg.validate()?;
    if let Some(unknown) = answers.keys().find(|id| q.proposition(id).is_none()) {
        return Err(Error::UnknownProposition(unknown.clone()));
    }
    let overflow = || Error::InvalidArgument("weight sum overflows exact arithmetic".into());
    let mut econ = Rational64::from_integer(0);
    let mut soc = Rational64::from_integer(0);
    for p in &q.propositions {
        let choice = answers.get(&p.id).ok_or_else(|| Error::MissingAnswer(p.id.clone()))?;
        let w = p.weights(*choice);
        econ = econ.checked_add(&w.econ.0).ok_or_else(overflow)?;
        soc = soc.checked_add(&w.soc.0).ok_or_else(overflow)?;
    }
    let x = econ
        .checked_div(&cfg.economic_divisor)
        .and_then(|v| v.checked_add(&cfg.economic_bias))
        .ok_or_else(overflow)?;
    let y = soc
        .checked_div(&cfg.social_divisor)
        .and_then(|v| v.checked_add(&cfg.social_bias))
        .ok_or_else(overflow)?;
    Ok(CompassPoint::new(to_f64(x), to_f64(y)))
}

fn to_f64(r: Rational64) -> f64 {
    r.to_f64().expect("a ratio of two i64 values is always representable")
}

/// Mean and population standard deviation per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: CompassPoint,
    pub std: CompassPoint,
    pub n: usize,
}

pub fn aggregate_runs(points: &[CompassPoint]) -> Result<Aggregate> {
    if points.is_empty() {
        return Err(Error::EmptyInput("no runs to aggregate"));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.economic).sum::<f64>() / n;
    let my = points.iter().map(|p| p.social).sum::<f64>() / n;
    let vx = points.iter().map(|p| (p.economic - mx).powi(2)).sum::<f64>() / n;
    let vy = points.iter().map(|p| (p.social - my).powi(2)).sum::<f64>() / n;
    Ok(Aggregate {
        mean: CompassPoint::new(mx, my),
        std: CompassPoint::new(vx.sqrt(), vy.sqrt()),
        n: points.len(),
    })
}
