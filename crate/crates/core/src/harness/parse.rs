//! Mapping free-text completions onto the four-point answer scale.
//!
//! Both the completion and every label are normalized the same way:
//! lowercase, typographic apostrophe folded to `'`, Arabic-script letter
//! variants unified, harakat and combining dot above removed, ZWNJ treated
//! as a space, Eastern digits mapped to ASCII, whitespace collapsed.
//!
//! Candidates are labels matched on Unicode-alphanumeric word boundaries and
//! numeric indices `1.`–`4.` (also `1)`/`1:` or a bare digit as the whole
//! reply). Candidates are accepted longest first without overlap, so
//! "agree" inside "strongly agree" never counts on its own. The reply parses
//! to a choice only when every accepted candidate names the same choice.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::questionnaire::AnswerChoice;

/// The bundled label table for the 14 canonical languages.
pub const CANONICAL_LABELS: &str = include_str!("../../data/labels.toml");

/// A parsed completion: one of the four choices or Unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Parsed {
    Choice(AnswerChoice),
    Unknown,
}

impl Parsed {
    pub const ALL: [Parsed; 5] = [
        Parsed::Choice(AnswerChoice::StronglyDisagree),
        Parsed::Choice(AnswerChoice::Disagree),
        Parsed::Choice(AnswerChoice::Agree),
        Parsed::Choice(AnswerChoice::StronglyAgree),
        Parsed::Unknown,
    ];

    pub fn choice(self) -> Option<AnswerChoice> {
        match self {
            Parsed::Choice(c) => Some(c),
            Parsed::Unknown => None,
        }
    }

    pub fn is_unknown(self) -> bool {
        self == Parsed::Unknown
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parsed::Choice(AnswerChoice::StronglyDisagree) => "strongly_disagree",
            Parsed::Choice(AnswerChoice::Disagree) => "disagree",
            Parsed::Choice(AnswerChoice::Agree) => "agree",
            Parsed::Choice(AnswerChoice::StronglyAgree) => "strongly_agree",
            Parsed::Unknown => "unknown",
        }
    }
}

impl From<AnswerChoice> for Parsed {
    fn from(c: AnswerChoice) -> Self {
        Parsed::Choice(c)
    }
}

impl From<Parsed> for String {
    fn from(p: Parsed) -> String {
        p.as_str().to_string()
    }
}

impl TryFrom<String> for Parsed {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        if s == "unknown" {
            return Ok(Parsed::Unknown);
        }
        AnswerChoice::from_key(&s).map(Parsed::Choice).ok_or_else(|| format!("unknown parse value `{s}`"))
    }
}

impl fmt::Display for Parsed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parsed::Choice(c) => c.fmt(f),
            Parsed::Unknown => f.write_str("Unknown"),
        }
    }
}

/// Applies the matching normalization to text or labels.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars().flat_map(char::to_lowercase) {
        let mapped = match ch {
            '\u{064B}'..='\u{0652}' | '\u{0307}' => continue,
            '\u{2019}' | '\u{2018}' | '\u{02BC}' => '\'',
            '\u{064A}' => '\u{06CC}',
            '\u{0643}' => '\u{06A9}',
            'ı' => 'i',
            '\u{200C}' => ' ',
            '\u{06F0}'..='\u{06F9}' => char::from(b'0' + (ch as u32 - 0x06F0) as u8),
            '\u{0660}'..='\u{0669}' => char::from(b'0' + (ch as u32 - 0x0660) as u8),
            c => c,
        };
        if mapped.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.push(mapped);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct LanguageLabels {
    display: [String; 4],
    /// (normalized label chars, choice), all variants
    patterns: Vec<(Vec<char>, AnswerChoice)>,
}

/// Localized answer labels per language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    langs: BTreeMap<String, LanguageLabels>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLabels {
    languages: Vec<String>,
    lang: BTreeMap<String, RawLanguageLabels>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLanguageLabels {
    sd: Vec<String>,
    d: Vec<String>,
    a: Vec<String>,
    sa: Vec<String>,
}

impl LabelTable {
    pub fn canonical() -> &'static LabelTable {
        static TABLE: OnceLock<LabelTable> = OnceLock::new();
        TABLE.get_or_init(|| LabelTable::parse(CANONICAL_LABELS).expect("bundled label table is valid"))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawLabels =
            toml::from_str(text).map_err(|e| Error::MalformedTemplates(format!("labels: {e}")))?;
        let mut langs = BTreeMap::new();
        for lang in &raw.languages {
            let entry = raw
                .lang
                .get(lang)
                .ok_or_else(|| Error::MalformedTemplates(format!("labels: no entry for `{lang}`")))?;
            let lists = [&entry.sd, &entry.d, &entry.a, &entry.sa];
            let mut patterns = Vec::new();
            let mut display: [String; 4] = Default::default();
            for (choice, list) in AnswerChoice::ALL.into_iter().zip(lists) {
                let first = list.first().filter(|l| !normalize(l).is_empty()).ok_or_else(|| {
                    Error::MalformedTemplates(format!("labels: `{lang}` has no label for {choice}"))
                })?;
                display[usize::from(choice.index() - 1)] = first.clone();
                for label in list {
                    let norm: Vec<char> = normalize(label).chars().collect();
                    if norm.is_empty() {
                        return Err(Error::MalformedTemplates(format!("labels: empty label in `{lang}`")));
                    }
                    patterns.push((norm, choice));
                }
            }
            let distinct: BTreeSet<&Vec<char>> = patterns.iter().map(|(p, _)| p).collect();
            if distinct.len() != patterns.len() {
                return Err(Error::MalformedTemplates(format!("labels: `{lang}` repeats a label")));
            }
            langs.insert(lang.clone(), LanguageLabels { display, patterns });
        }
        Ok(LabelTable { langs })
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.langs.keys().map(String::as_str)
    }

    /// The display label of `choice`, as printed in the options block.
    pub fn display(&self, lang: &str, choice: AnswerChoice) -> Result<&str> {
        self.entry(lang).map(|l| l.display[usize::from(choice.index() - 1)].as_str())
    }

    /// Every accepted label of `choice` in `lang`.
    pub fn variants(&self, lang: &str, choice: AnswerChoice) -> Result<Vec<String>> {
        Ok(self
            .entry(lang)?
            .patterns
            .iter()
            .filter(|(_, c)| *c == choice)
            .map(|(p, _)| p.iter().collect())
            .collect())
    }

    fn entry(&self, lang: &str) -> Result<&LanguageLabels> {
        self.langs.get(lang).ok_or_else(|| Error::MissingLanguage(lang.to_string()))
    }

    /// Parses a completion; an unlisted language parses numeric indices only.
    pub fn parse_choice(&self, raw: &str, lang: &str) -> Parsed {
        let text: Vec<char> = normalize(raw).chars().collect();
        let mut candidates: Vec<(usize, usize, AnswerChoice)> = numeric_candidates(&text);
        if let Some(labels) = self.langs.get(lang) {
            for (pattern, choice) in &labels.patterns {
                for start in find_all(&text, pattern) {
                    let end = start + pattern.len();
                    let before_ok = start == 0 || !text[start - 1].is_alphanumeric();
                    let after_ok = end == text.len() || !text[end].is_alphanumeric();
                    if before_ok && after_ok {
                        candidates.push((start, end, *choice));
                    }
                }
            }
        }
        candidates.sort_by_key(|&(s, e, _)| (std::cmp::Reverse(e - s), s));
        let mut taken: Vec<(usize, usize)> = Vec::new();
        let mut found = BTreeSet::new();
        for (s, e, c) in candidates {
            if taken.iter().all(|&(ts, te)| e <= ts || s >= te) {
                taken.push((s, e));
                found.insert(c);
            }
        }
        match (found.len(), found.first()) {
            (1, Some(&c)) => Parsed::Choice(c),
            _ => Parsed::Unknown,
        }
    }
}

/// Parses a completion with the bundled label table.
pub fn parse_choice(raw: &str, lang: &str) -> Parsed {
    LabelTable::canonical().parse_choice(raw, lang)
}

fn find_all(text: &[char], pattern: &[char]) -> Vec<usize> {
    if pattern.len() > text.len() {
        return Vec::new();
    }
    (0..=text.len() - pattern.len()).filter(|&i| text[i..i + pattern.len()] == *pattern).collect()
}

fn numeric_candidates(text: &[char]) -> Vec<(usize, usize, AnswerChoice)> {
    let digit = |c: char| c.to_digit(10).and_then(|d| u8::try_from(d).ok());
    if text.len() == 1 {
        if let Some(choice) = digit(text[0]).and_then(AnswerChoice::from_index) {
            return vec![(0, 1, choice)];
        }
    }
    let mut out = Vec::new();
    for i in 0..text.len() {
        let Some(choice) = digit(text[i]).and_then(AnswerChoice::from_index) else {
            continue;
        };
        if i > 0 && text[i - 1].is_alphanumeric() {
            continue;
        }
        // "2.3." is a decimal, not option 3
        if i > 1 && text[i - 1] == '.' && text[i - 2].is_ascii_digit() {
            continue;
        }
        let Some(&next) = text.get(i + 1) else { continue };
        if !matches!(next, '.' | ')' | ':') {
            continue;
        }
        if text.get(i + 2).is_some_and(|c| c.is_ascii_digit()) {
            continue;
        }
        out.push((i, i + 2, choice));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize("  D\u{2019}Accord \n\t 3."), "d'accord 3.");
        assert_eq!(normalize("كاملاً"), "کاملا");
        assert_eq!(normalize("۳."), "3.");
        assert_eq!(normalize("گزینه‌ها"), "گزینه ها");
    }

    #[test]
    fn parsed_serde_names() {
        let s = serde_json::to_string(&Parsed::Choice(AnswerChoice::StronglyAgree)).unwrap();
        assert_eq!(s, "\"strongly_agree\"");
        let back: Parsed = serde_json::from_str("\"unknown\"").unwrap();
        assert_eq!(back, Parsed::Unknown);
        assert!(serde_json::from_str::<Parsed>("\"maybe\"").is_err());
    }

    #[test]
    fn nested_labels_take_the_longest_match() {
        assert_eq!(parse_choice("Strongly agree", "en"), Parsed::Choice(AnswerChoice::StronglyAgree));
        assert_eq!(parse_choice("Pas d'accord", "fr"), Parsed::Choice(AnswerChoice::Disagree));
        assert_eq!(parse_choice("Не съм съгласен", "bg"), Parsed::Choice(AnswerChoice::Disagree));
    }

    #[test]
    fn unlisted_language_uses_indices_only() {
        assert_eq!(parse_choice("2. whatever", "xx"), Parsed::Choice(AnswerChoice::Disagree));
        assert_eq!(parse_choice("agree", "xx"), Parsed::Unknown);
    }
}
