//! The Political Compass questionnaire: answer scale, propositions, and the
//! on-disk instrument format.
//!
//! An instrument file is a TOML document with exactly four top-level fields:
//!
//! ```toml
//! canonical = false
//! languages = ["en"]
//!
//! [scoring]
//! economic_bias = "0.38"
//! social_bias = "2.41"
//! economic_divisor = "8.0"
//! social_divisor = "19.5"
//!
//! [[propositions]]
//! id = "freer_market"
//! domain = "economy"
//! [propositions.text]
//! en = "The freer the market, the freer the people."
//! [propositions.weights]
//! sd = { econ = "-4.5", soc = "0" }
//! d  = { econ = "-2.5", soc = "0" }
//! a  = { econ = "2",    soc = "0" }
//! sa = { econ = "4",    soc = "0" }
//! ```
//!
//! Numeric fields are exact: TOML integers or quoted decimal/fraction strings
//! (`"-4.5"`, `"39/2"`). Floating-point literals are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_rational::Rational64;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// The bundled canonical instrument (62 propositions, 14 languages).
pub const CANONICAL_PCT: &str = include_str!("../data/pct.toml");

/// Proposition count of the canonical instrument.
pub const CANONICAL_PROPOSITIONS: usize = 62;
/// Propositions carrying non-zero economic weight in the canonical instrument.
pub const CANONICAL_ECONOMIC_WEIGHTED: usize = 17;
/// Propositions carrying non-zero social weight in the canonical instrument.
pub const CANONICAL_SOCIAL_WEIGHTED: usize = 45;

/// The four ordered response options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerChoice {
    StronglyDisagree,
    Disagree,
    Agree,
    StronglyAgree,
}

impl AnswerChoice {
    pub const ALL: [AnswerChoice; 4] = [
        AnswerChoice::StronglyDisagree,
        AnswerChoice::Disagree,
        AnswerChoice::Agree,
        AnswerChoice::StronglyAgree,
    ];

    /// Canonical 1-based index as printed in the options block.
    pub fn index(self) -> u8 {
        match self {
            AnswerChoice::StronglyDisagree => 1,
            AnswerChoice::Disagree => 2,
            AnswerChoice::Agree => 3,
            AnswerChoice::StronglyAgree => 4,
        }
    }

    pub fn from_index(index: u8) -> Option<Self> {
        match index {
            1..=4 => Some(Self::ALL[usize::from(index - 1)]),
            _ => None,
        }
    }

    /// Short key used in data files: `sd`, `d`, `a`, `sa`.
    pub fn key(self) -> &'static str {
        match self {
            AnswerChoice::StronglyDisagree => "sd",
            AnswerChoice::Disagree => "d",
            AnswerChoice::Agree => "a",
            AnswerChoice::StronglyAgree => "sa",
        }
    }

    /// Parses a data-file key or a long English name (`disagree`, `strongly_agree`).
    pub fn from_key(key: &str) -> Option<Self> {
        let k = key.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        match k.as_str() {
            "sd" | "strongly_disagree" => Some(AnswerChoice::StronglyDisagree),
            "d" | "disagree" => Some(AnswerChoice::Disagree),
            "a" | "agree" => Some(AnswerChoice::Agree),
            "sa" | "strongly_agree" => Some(AnswerChoice::StronglyAgree),
            _ => None,
        }
    }

    fn slot(self) -> usize {
        usize::from(self.index() - 1)
    }
}

impl fmt::Display for AnswerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnswerChoice::StronglyDisagree => "Strongly disagree",
            AnswerChoice::Disagree => "Disagree",
            AnswerChoice::Agree => "Agree",
            AnswerChoice::StronglyAgree => "Strongly agree",
        })
    }
}

/// The six PCT domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    CountryWorld,
    Economy,
    PersonalSocialValues,
    WiderSociety,
    Religion,
    Sex,
}

impl Domain {
    pub const ALL: [Domain; 6] = [
        Domain::CountryWorld,
        Domain::Economy,
        Domain::PersonalSocialValues,
        Domain::WiderSociety,
        Domain::Religion,
        Domain::Sex,
    ];

    /// Proposition count of this domain in the canonical instrument.
    pub fn canonical_count(self) -> usize {
        match self {
            Domain::CountryWorld => 7,
            Domain::Economy => 14,
            Domain::PersonalSocialValues => 18,
            Domain::WiderSociety => 12,
            Domain::Religion => 5,
            Domain::Sex => 6,
        }
    }
}

/// An exact rational read from an instrument file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exact(pub Rational64);

impl FromStr for Exact {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_exact(s).map(Exact)
    }
}

fn parse_exact(raw: &str) -> std::result::Result<Rational64, String> {
    let s = raw.trim();
    let bad = || format!("`{raw}` is not an exact decimal or fraction");
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num.trim().parse().map_err(|_| bad())?;
        let d: i64 = den.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(format!("`{raw}` has a zero denominator"));
        }
        return Ok(Rational64::new(n, d));
    }
    let (negative, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    if frac_part.len() > 15 {
        return Err(format!("`{raw}` has more than 15 decimal places"));
    }
    let scale = 10i64.pow(frac_part.len() as u32);
    let whole: i64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
    let frac: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
    let numer = whole
        .checked_mul(scale)
        .and_then(|w| w.checked_add(frac))
        .ok_or_else(|| format!("`{raw}` is out of range"))?;
    let value = Rational64::new(numer, scale);
    Ok(if negative { -value } else { value })
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct Visitor;

        impl serde::de::Visitor<'_> for Visitor {
            type Value = Exact;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer or a quoted exact decimal such as \"-4.5\"")
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<Exact, E> {
                Ok(Exact(Rational64::from_integer(v)))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<Exact, E> {
                i64::try_from(v)
                    .map(|v| Exact(Rational64::from_integer(v)))
                    .map_err(|_| E::custom("integer out of range"))
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<Exact, E> {
                Err(E::custom(format!(
                    "floating-point literal {v} is not exact; write it as a quoted string"
                )))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<Exact, E> {
                parse_exact(v).map(Exact).map_err(E::custom)
            }
        }

        deserializer.deserialize_any(Visitor)
    }
}

/// Per-answer contribution to the two axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisWeights {
    pub econ: Exact,
    pub soc: Exact,
}

impl AxisWeights {
    pub fn new(econ: Rational64, soc: Rational64) -> Self {
        AxisWeights { econ: Exact(econ), soc: Exact(soc) }
    }
}

/// Bias and normalization constants applied after the weighted sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoringConfig {
    pub economic_bias: Rational64,
    pub social_bias: Rational64,
    pub economic_divisor: Rational64,
    pub social_divisor: Rational64,
}

impl ScoringConfig {
    /// The published PCT constants: biases 0.38 / 2.41, divisors 8.0 / 19.5.
    pub fn canonical() -> Self {
        ScoringConfig {
            economic_bias: Rational64::new(38, 100),
            social_bias: Rational64::new(241, 100),
            economic_divisor: Rational64::from_integer(8),
            social_divisor: Rational64::new(39, 2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.economic_divisor <= Rational64::from_integer(0)
            || self.social_divisor <= Rational64::from_integer(0)
        {
            return Err(Error::MalformedQuestionnaire(
                "scoring divisors must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self::canonical()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposition {
    pub id: String,
    pub domain: Domain,
    /// language code -> statement
    pub text: BTreeMap<String, String>,
    weights: [AxisWeights; 4],
}

impl Proposition {
    pub fn new(
        id: impl Into<String>,
        domain: Domain,
        text: BTreeMap<String, String>,
        weights: [AxisWeights; 4],
    ) -> Self {
        Proposition { id: id.into(), domain, text, weights }
    }

    pub fn weights(&self, choice: AnswerChoice) -> AxisWeights {
        self.weights[choice.slot()]
    }

    pub fn all_weights(&self) -> &[AxisWeights; 4] {
        &self.weights
    }

    pub fn is_economic_weighted(&self) -> bool {
        self.weights.iter().any(|w| w.econ.0 != Rational64::from_integer(0))
    }

    pub fn is_social_weighted(&self) -> bool {
        self.weights.iter().any(|w| w.soc.0 != Rational64::from_integer(0))
    }

    pub fn text_for(&self, language: &str) -> Result<&str> {
        self.text.get(language).map(String::as_str).ok_or_else(|| Error::MissingLanguageText {
            proposition: self.id.clone(),
            language: language.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Questionnaire {
    pub propositions: Vec<Proposition>,
    pub languages: Vec<String>,
    pub domain_counts: BTreeMap<Domain, usize>,
    pub scoring: ScoringConfig,
    pub canonical: bool,
    /// Hex SHA-256 of the source document; empty for programmatic instruments.
    pub source_hash: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuestionnaire {
    canonical: bool,
    languages: Vec<String>,
    scoring: RawScoring,
    propositions: Vec<RawProposition>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScoring {
    economic_bias: Exact,
    social_bias: Exact,
    economic_divisor: Exact,
    social_divisor: Exact,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProposition {
    id: String,
    domain: Domain,
    text: BTreeMap<String, String>,
    weights: RawWeights,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    sd: AxisWeights,
    d: AxisWeights,
    a: AxisWeights,
    sa: AxisWeights,
}

/// Parses and validates an instrument document.
pub fn load_questionnaire(source: &[u8]) -> Result<Questionnaire> {
    let text = std::str::from_utf8(source)
        .map_err(|e| Error::MalformedQuestionnaire(format!("not UTF-8: {e}")))?;
    let raw: RawQuestionnaire =
        toml::from_str(text).map_err(|e| Error::MalformedQuestionnaire(e.to_string()))?;

    let propositions = raw
        .propositions
        .into_iter()
        .map(|p| Proposition {
            id: p.id,
            domain: p.domain,
            text: p.text,
            weights: [p.weights.sd, p.weights.d, p.weights.a, p.weights.sa],
        })
        .collect();
    let scoring = ScoringConfig {
        economic_bias: raw.scoring.economic_bias.0,
        social_bias: raw.scoring.social_bias.0,
        economic_divisor: raw.scoring.economic_divisor.0,
        social_divisor: raw.scoring.social_divisor.0,
    };
    let mut q = Questionnaire::new(propositions, raw.languages, scoring, raw.canonical)?;
    q.source_hash = crate::util::sha256_hex(source);
    Ok(q)
}

impl Questionnaire {
    /// Builds and validates an instrument from parts.
    pub fn new(
        propositions: Vec<Proposition>,
        languages: Vec<String>,
        scoring: ScoringConfig,
        canonical: bool,
    ) -> Result<Self> {
        let mut domain_counts = BTreeMap::new();
        for p in &propositions {
            *domain_counts.entry(p.domain).or_insert(0) += 1;
        }
        let q = Questionnaire {
            propositions,
            languages,
            domain_counts,
            scoring,
            canonical,
            source_hash: String::new(),
        };
        q.validate()?;
        Ok(q)
    }

    /// The bundled 62-proposition instrument.
    pub fn canonical() -> Result<Self> {
        load_questionnaire(CANONICAL_PCT.as_bytes())
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        load_questionnaire(&bytes)
    }

    pub fn len(&self) -> usize {
        self.propositions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.propositions.is_empty()
    }

    pub fn proposition(&self, id: &str) -> Option<&Proposition> {
        self.propositions.iter().find(|p| p.id == id)
    }

    pub fn economic_weighted(&self) -> usize {
        self.propositions.iter().filter(|p| p.is_economic_weighted()).count()
    }

    pub fn social_weighted(&self) -> usize {
        self.propositions.iter().filter(|p| p.is_social_weighted()).count()
    }

    fn validate(&self) -> Result<()> {
        self.scoring.validate()?;
        if self.languages.is_empty() {
            return Err(Error::MalformedQuestionnaire("no languages declared".into()));
        }
        let declared: BTreeSet<&str> = self.languages.iter().map(String::as_str).collect();
        if declared.len() != self.languages.len() {
            return Err(Error::MalformedQuestionnaire("duplicate language code".into()));
        }
        let mut ids = BTreeSet::new();
        for p in &self.propositions {
            if p.id.trim().is_empty() {
                return Err(Error::MalformedQuestionnaire("empty proposition id".into()));
            }
            if !ids.insert(p.id.as_str()) {
                return Err(Error::MalformedQuestionnaire(format!(
                    "duplicate proposition id `{}`",
                    p.id
                )));
            }
            for lang in &self.languages {
                if p.text.get(lang).is_none_or(|t| t.trim().is_empty()) {
                    return Err(Error::MissingLanguageText {
                        proposition: p.id.clone(),
                        language: lang.clone(),
                    });
                }
            }
            if let Some(extra) = p.text.keys().find(|k| !declared.contains(k.as_str())) {
                return Err(Error::MalformedQuestionnaire(format!(
                    "proposition `{}` has text for undeclared language `{extra}`",
                    p.id
                )));
            }
        }
        if self.canonical {
            self.validate_canonical()?;
        }
        Ok(())
    }

    fn validate_canonical(&self) -> Result<()> {
        if self.propositions.len() != CANONICAL_PROPOSITIONS {
            return Err(Error::DomainCountMismatch(format!(
                "canonical instrument needs {CANONICAL_PROPOSITIONS} propositions, found {}",
                self.propositions.len()
            )));
        }
        for domain in Domain::ALL {
            let found = self.domain_counts.get(&domain).copied().unwrap_or(0);
            if found != domain.canonical_count() {
                return Err(Error::DomainCountMismatch(format!(
                    "{domain:?}: expected {}, found {found}",
                    domain.canonical_count()
                )));
            }
        }
        let (econ, soc) = (self.economic_weighted(), self.social_weighted());
        if econ != CANONICAL_ECONOMIC_WEIGHTED || soc != CANONICAL_SOCIAL_WEIGHTED {
            return Err(Error::MalformedQuestionnaire(format!(
                "weight transcription check failed: {econ} economic-weighted and {soc} \
                 social-weighted propositions (expected {CANONICAL_ECONOMIC_WEIGHTED}/{CANONICAL_SOCIAL_WEIGHTED})"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"
canonical = false
languages = ["en"]

[scoring]
economic_bias = "0.38"
social_bias = "2.41"
economic_divisor = "8.0"
social_divisor = "19.5"

[[propositions]]
id = "p1"
domain = "economy"
[propositions.text]
en = "One."
[propositions.weights]
sd = { econ = 2, soc = "0" }
d = { econ = 1, soc = "0" }
a = { econ = -1, soc = "0" }
sa = { econ = -2, soc = "0" }
"#;

    #[test]
    fn exact_decimals() {
        assert_eq!(parse_exact("-4.5").unwrap(), Rational64::new(-9, 2));
        assert_eq!(parse_exact("0.38").unwrap(), Rational64::new(19, 50));
        assert_eq!(parse_exact("39/2").unwrap(), Rational64::new(39, 2));
        assert_eq!(parse_exact("+3").unwrap(), Rational64::from_integer(3));
        assert_eq!(parse_exact(".5").unwrap(), Rational64::new(1, 2));
        assert!(parse_exact("1e3").is_err());
        assert!(parse_exact("1/0").is_err());
        assert!(parse_exact("-").is_err());
    }

    #[test]
    fn canonical_instrument_integrity() {
        let q = Questionnaire::canonical().unwrap();
        assert_eq!(q.len(), 62);
        assert_eq!(q.domain_counts.len(), 6);
        assert_eq!(q.economic_weighted(), 17);
        assert_eq!(q.social_weighted(), 45);
        assert_eq!(q.languages.len(), 14);
        assert_eq!(q.scoring, ScoringConfig::canonical());
        let total: usize = q.domain_counts.values().sum();
        assert_eq!(total, 62);
    }

    #[test]
    fn fixture_loads_without_canonical_checks() {
        let q = load_questionnaire(FIXTURE.as_bytes()).unwrap();
        assert_eq!(q.len(), 1);
        assert!(!q.canonical);
        assert_eq!(q.source_hash.len(), 64);
    }

    #[test]
    fn rejects_unknown_top_level_field() {
        let doc = format!("extra = 1\n{FIXTURE}");
        let err = load_questionnaire(doc.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MalformedQuestionnaire(_)), "{err}");
    }

    #[test]
    fn rejects_float_weights() {
        let doc = FIXTURE.replace("econ = 2,", "econ = 2.0,");
        let err = load_questionnaire(doc.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("not exact"), "{err}");
    }

    #[test]
    fn rejects_missing_language_text() {
        let doc = FIXTURE.replace(r#"languages = ["en"]"#, r#"languages = ["en", "de"]"#);
        let err = load_questionnaire(doc.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MissingLanguageText { .. }), "{err}");
    }

    #[test]
    fn rejects_nonpositive_divisor() {
        let doc = FIXTURE.replace(r#"social_divisor = "19.5""#, r#"social_divisor = "0""#);
        assert!(load_questionnaire(doc.as_bytes()).is_err());
    }

    #[test]
    fn altered_domain_count_is_reported() {
        // Move one proposition from religion to sex.
        let doc = CANONICAL_PCT.replacen("domain = \"religion\"", "domain = \"sex\"", 1);
        let err = load_questionnaire(doc.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DomainCountMismatch(_)), "{err}");
        assert!(err.to_string().contains("domain-count mismatch"));
    }

    #[test]
    fn answer_index_round_trip() {
        for c in AnswerChoice::ALL {
            assert_eq!(AnswerChoice::from_index(c.index()), Some(c));
            assert_eq!(AnswerChoice::from_key(c.key()), Some(c));
        }
        assert!(AnswerChoice::StronglyDisagree < AnswerChoice::Disagree);
        assert!(AnswerChoice::Agree < AnswerChoice::StronglyAgree);
        assert_eq!(AnswerChoice::from_index(0), None);
        assert_eq!(AnswerChoice::from_index(5), None);
    }
}
