use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use compass_core::scoring::CompassPoint;
use compass_core::stats::{analyze_axis, Axis, AxisAnalysis};

use crate::error::{write, write_json, CliError, Result};
use crate::score::ResultsFile;
use crate::svg::{CompassPlotSpec, PlotPoint};

pub const ANALYSIS_FORMAT: &str = "compass-analysis/1";
pub const REPORT: &str = "report.txt";
pub const ANALYSIS: &str = "analysis.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisFile {
    pub format: String,
    pub significance_level: f64,
    pub questionnaire_sha256: String,
    pub languages: Vec<String>,
    pub models: Vec<ModelAnalysis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAnalysis {
    pub backend_id: String,
    /// Languages with no scoreable paraphrase; left out of the tests.
    pub excluded_languages: Vec<String>,
    pub social: AxisAnalysis,
    pub economic: AxisAnalysis,
    pub plot: String,
}

#[derive(Debug, Clone)]
pub struct AnalyzeOutput {
    pub report: String,
    pub analysis: AnalysisFile,
    pub plots: Vec<PathBuf>,
}

/// File-name-safe rendering of a backend id.
pub fn plot_name(backend_id: &str) -> String {
    let safe: String = backend_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    format!("{safe}.svg")
}

/// Shortest round-trip decimal, switching to exponent form like Python's `repr`.
pub fn float_repr(v: f64) -> String {
    if v == 0.0 {
        return "0.0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let a = v.abs();
    if (1e-4..1e16).contains(&a) {
        let s = format!("{v}");
        if s.contains('.') { s } else { format!("{s}.0") }
    } else {
        let s = format!("{v:e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent form");
        let (sign, digits) = match exp.strip_prefix('-') {
            Some(d) => ('-', d),
            None => ('+', exp),
        };
        format!("{mantissa}e{sign}{digits:0>2}")
    }
}

fn axis_values(results: &[&ResultsFile], backend: &str, lang: &str, axis: Axis) -> Vec<f64> {
    results
        .iter()
        .flat_map(|r| r.models.iter())
        .filter(|m| m.backend_id == backend)
        .filter_map(|m| m.language(lang))
        .flat_map(|l| l.paraphrases.iter())
        .map(|p| match axis {
            Axis::Economic => p.point.economic,
            Axis::Social => p.point.social,
        })
        .collect()
}

fn check_compatible(results: &[ResultsFile]) -> Result<()> {
    let first = results.first().ok_or_else(|| CliError::Usage("analyze needs at least one results file".into()))?;
    let langs: BTreeSet<&String> = first.languages.iter().collect();
    let mut ids = BTreeSet::new();
    for r in results {
        if r.format != crate::score::RESULTS_FORMAT {
            return Err(CliError::Mismatch(format!("unsupported results format `{}`", r.format)));
        }
        if r.questionnaire_sha256 != first.questionnaire_sha256 {
            return Err(CliError::Mismatch(format!(
                "results were scored on different questionnaires ({} vs {}); axes are not comparable",
                first.questionnaire_sha256, r.questionnaire_sha256
            )));
        }
        if r.languages.iter().collect::<BTreeSet<_>>() != langs {
            return Err(CliError::Mismatch(format!(
                "language sets differ: [{}] vs [{}]",
                first.languages.join(", "),
                r.languages.join(", ")
            )));
        }
        for m in &r.models {
            if !ids.insert(m.backend_id.clone()) {
                return Err(CliError::Mismatch(format!("model `{}` appears in more than one input", m.backend_id)));
            }
        }
    }
    Ok(())
}

/// KW and pairwise tests per model and axis, the text report and one plot per model.
pub fn cmd_analyze(results: &[ResultsFile], out: &Path, significance: f64) -> Result<AnalyzeOutput> {
    check_compatible(results)?;
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    let languages = results[0].languages.clone();
    let all: Vec<&ResultsFile> = results.iter().collect();
    let mut report = String::new();
    let mut models = Vec::new();
    let mut plots = Vec::new();
    for m in results.iter().flat_map(|r| r.models.iter()) {
        let mut excluded = Vec::new();
        let mut groups: BTreeMap<Axis, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
        for lang in &languages {
            let econ = axis_values(&all, &m.backend_id, lang, Axis::Economic);
            if econ.is_empty() {
                excluded.push(lang.clone());
                continue;
            }
            let soc = axis_values(&all, &m.backend_id, lang, Axis::Social);
            groups.entry(Axis::Economic).or_default().insert(lang.clone(), econ);
            groups.entry(Axis::Social).or_default().insert(lang.clone(), soc);
        }
        let social = analyze_axis(Axis::Social, &groups.remove(&Axis::Social).unwrap_or_default(), significance)?;
        let economic = analyze_axis(Axis::Economic, &groups.remove(&Axis::Economic).unwrap_or_default(), significance)?;
        write_model_block(&mut report, &m.backend_id, &[&social, &economic], &languages, &excluded, significance);

        let points = languages
            .iter()
            .filter_map(|lang| m.language(lang))
            .filter_map(|l| {
                l.aggregate.map(|a| PlotPoint {
                    label: l.language.to_uppercase(),
                    point: a.mean,
                    error: Some(CompassPoint::new(a.std.economic, a.std.social)),
                })
            })
            .collect();
        let name = plot_name(&m.backend_id);
        let spec = CompassPlotSpec::new(format!("Political compass: {}", m.backend_id), points, out.join(&name));
        spec.write()?;
        plots.push(spec.output.clone());
        models.push(ModelAnalysis { backend_id: m.backend_id.clone(), excluded_languages: excluded, social, economic, plot: name });
    }
    let analysis = AnalysisFile {
        format: ANALYSIS_FORMAT.to_string(),
        significance_level: significance,
        questionnaire_sha256: results[0].questionnaire_sha256.clone(),
        languages,
        models,
    };
    write(&out.join(REPORT), &report)?;
    write_json(&out.join(ANALYSIS), &analysis)?;
    Ok(AnalyzeOutput { report, analysis, plots })
}

fn title_case(s: &str) -> String {
    s.char_indices().map(|(i, c)| if i == 0 { c.to_ascii_uppercase() } else { c }).collect()
}

fn write_model_block(
    s: &mut String,
    model: &str,
    axes: &[&AxisAnalysis],
    languages: &[String],
    excluded: &[String],
    significance: f64,
) {
    let rule = "=".repeat(60);
    let _ = writeln!(s, "{rule}\nDETAILED RESULTS FOR {}\n{rule}", model.to_uppercase());
    if !excluded.is_empty() {
        let codes: Vec<String> = excluded.iter().map(|l| l.to_uppercase()).collect();
        let _ = writeln!(s, "Excluded (no scoreable paraphrases): {}", codes.join(", "));
    }
    let position = |lang: &str| languages.iter().position(|l| l == lang).unwrap_or(usize::MAX);
    for a in axes {
        let dash = "-".repeat(40);
        let _ = writeln!(s, "\n{dash}\n{} DIMENSION ANALYSIS\n{dash}", a.axis.name().to_uppercase());
        let (Some(kw), Some(pairs)) = (&a.kruskal_wallis, &a.pairwise) else {
            let _ = writeln!(s, "Overall Kruskal-Wallis Test: not applicable (<2 groups)");
            continue;
        };
        let _ = writeln!(s, "Overall Kruskal-Wallis Test:");
        let _ = writeln!(s, "  H-statistic: {:.4}", kw.h);
        let _ = writeln!(s, "  P-value: {}", float_repr(kw.p));
        let _ = writeln!(s, "  Significant differences: {}", title_case(&(kw.p < significance).to_string()));
        let _ = writeln!(s, "\nSignificant Language Pairs (after correction):");
        let mut sig: Vec<(usize, usize, &str, &str, f64)> = pairs
            .pairs
            .iter()
            .filter(|p| p.significant)
            .map(|p| {
                let (ia, ib) = (position(&p.a), position(&p.b));
                if ia <= ib { (ia, ib, &*p.a, &*p.b, p.p_adjusted) } else { (ib, ia, &*p.b, &*p.a, p.p_adjusted) }
            })
            .collect();
        sig.sort_by_key(|&(ia, ib, ..)| (ia, ib));
        if sig.is_empty() {
            let _ = writeln!(s, "  None");
        }
        for (_, _, a, b, p) in sig {
            let _ = writeln!(s, "  {} vs {}: (P-adjusted: {p:.4})", a.to_uppercase(), b.to_uppercase());
        }
    }
    s.push('\n');
}
