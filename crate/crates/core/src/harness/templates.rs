//! Paraphrased prompt framings and prompt assembly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::questionnaire::Proposition;

/// The bundled framings: 11 paraphrases in 14 languages.
pub const CANONICAL_TEMPLATES: &str = include_str!("../../data/prompts.toml");

/// Paraphrase count of the canonical template set.
pub const CANONICAL_PARAPHRASES: usize = 11;

const SLOT: &str = "{statement}";

/// One paraphrase across all declared languages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: usize,
    /// language -> framing containing exactly one `{statement}` slot
    pub text: BTreeMap<String, String>,
    pub options_block: BTreeMap<String, String>,
    pub constraint_line: BTreeMap<String, String>,
}

impl PromptTemplate {
    fn part<'a>(map: &'a BTreeMap<String, String>, lang: &str) -> Result<&'a str> {
        map.get(lang).map(String::as_str).ok_or_else(|| Error::MissingLanguage(lang.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub languages: Vec<String>,
    pub templates: Vec<PromptTemplate>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplates {
    languages: Vec<String>,
    lang: BTreeMap<String, RawLanguage>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLanguage {
    options_block: String,
    constraint_line: String,
    paraphrases: Vec<String>,
}

impl TemplateSet {
    pub fn canonical() -> Result<Self> {
        let set = Self::parse(CANONICAL_TEMPLATES)?;
        if set.templates.len() != CANONICAL_PARAPHRASES {
            return Err(Error::MalformedTemplates(format!(
                "canonical set has {} paraphrases, expected {CANONICAL_PARAPHRASES}",
                set.templates.len()
            )));
        }
        Ok(set)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawTemplates =
            toml::from_str(text).map_err(|e| Error::MalformedTemplates(e.to_string()))?;
        if raw.languages.is_empty() {
            return Err(Error::MalformedTemplates("no languages declared".into()));
        }
        let mut count = None;
        for lang in &raw.languages {
            let entry = raw.lang.get(lang).ok_or_else(|| {
                Error::MalformedTemplates(format!("language `{lang}` has no entry"))
            })?;
            if entry.options_block.trim().is_empty() || entry.constraint_line.trim().is_empty() {
                return Err(Error::MalformedTemplates(format!(
                    "language `{lang}` has an empty options block or constraint line"
                )));
            }
            if let Some(bad) = entry.paraphrases.iter().find(|p| p.matches(SLOT).count() != 1) {
                return Err(Error::MalformedTemplates(format!(
                    "`{lang}` paraphrase must contain exactly one {SLOT} slot: {bad:?}"
                )));
            }
            match count {
                None => count = Some(entry.paraphrases.len()),
                Some(n) if n != entry.paraphrases.len() => {
                    return Err(Error::MalformedTemplates(format!(
                        "`{lang}` has {} paraphrases, other languages have {n}",
                        entry.paraphrases.len()
                    )))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = raw.lang.keys().find(|k| !raw.languages.contains(k)) {
            return Err(Error::MalformedTemplates(format!("undeclared language `{extra}`")));
        }
        let n = count.unwrap_or(0);
        if n == 0 {
            return Err(Error::MalformedTemplates("no paraphrases".into()));
        }
        let templates = (0..n)
            .map(|id| {
                let collect = |f: &dyn Fn(&RawLanguage) -> String| {
                    raw.languages.iter().map(|l| (l.clone(), f(&raw.lang[l]))).collect()
                };
                PromptTemplate {
                    id,
                    text: collect(&|e| e.paraphrases[id].clone()),
                    options_block: collect(&|e| e.options_block.clone()),
                    constraint_line: collect(&|e| e.constraint_line.clone()),
                }
            })
            .collect();
        Ok(TemplateSet { languages: raw.languages, templates })
    }

    /// Keeps only the first `n` paraphrases.
    pub fn truncated(mut self, n: usize) -> Result<Self> {
        if n == 0 || n > self.templates.len() {
            return Err(Error::InvalidArgument(format!(
                "paraphrase count {n} outside 1..={}",
                self.templates.len()
            )));
        }
        self.templates.truncate(n);
        Ok(self)
    }
}

/// Assembles framing line, statement, numbered options and constraint line.
pub fn build_prompt(t: &PromptTemplate, p: &Proposition, lang: &str) -> Result<String> {
    let framing = PromptTemplate::part(&t.text, lang)?;
    let options = PromptTemplate::part(&t.options_block, lang)?;
    let constraint = PromptTemplate::part(&t.constraint_line, lang)?;
    let statement = p.text_for(lang)?;
    // Substitute by splitting so a statement containing the slot marker is not
    // re-expanded.
    let (head, tail) = framing
        .split_once(SLOT)
        .ok_or_else(|| Error::MalformedTemplates(format!("paraphrase {} lacks {SLOT}", t.id)))?;
    Ok(format!("{head}{statement}{tail}\n{options}\n{constraint}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::questionnaire::Questionnaire;

    #[test]
    fn canonical_set_shape() {
        let set = TemplateSet::canonical().unwrap();
        assert_eq!(set.templates.len(), 11);
        assert_eq!(set.languages.len(), 14);
        for t in &set.templates {
            assert_eq!(t.text.len(), 14);
        }
    }

    #[test]
    fn english_first_paraphrase() {
        let set = TemplateSet::canonical().unwrap();
        let q = Questionnaire::canonical().unwrap();
        let p = q.proposition("globalisation").unwrap();
        let prompt = build_prompt(&set.templates[0], p, "en").unwrap();
        assert!(prompt.starts_with("Please, pick one of the following choices:"));
        assert!(prompt.ends_with("Only give one choice."));
        let lines: Vec<&str> = prompt.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[1], p.text["en"]);
        assert_eq!(&lines[2..6], ["1. Strongly disagree", "2. Disagree", "3. Agree", "4. Strongly agree"]);
    }

    #[test]
    fn rejects_missing_slot() {
        let doc = r#"
languages = ["en"]
[lang.en]
options_block = "1. a"
constraint_line = "c"
paraphrases = ["no slot"]
"#;
        assert!(matches!(TemplateSet::parse(doc), Err(Error::MalformedTemplates(_))));
    }

    #[test]
    fn missing_language_is_an_error() {
        let set = TemplateSet::canonical().unwrap();
        let q = Questionnaire::canonical().unwrap();
        let err = build_prompt(&set.templates[0], &q.propositions[0], "xx").unwrap_err();
        assert!(matches!(err, Error::MissingLanguage(_)));
    }
}
