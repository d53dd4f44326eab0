//! Offline evaluation of a labeled response corpus: run every response
//! through verification and the preference oracle, compare with the hand
//! labels, and tabulate categories.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::llm::CorpusRecord;
use crate::memory::Lexicon;
use crate::oversight::{oracle_decide, OversightError, PreferenceModel, Proposal};
use crate::verify::{categorize, verify, ResponseCategory, ResponseKind};
use crate::world::{Embodiment, ObjId, WorldState};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("record {index}: no hand labels")]
    Unlabeled { index: usize },
    #[error("record {index}: {labels} labels for {responses} responses")]
    LabelCount {
        index: usize,
        labels: usize,
        responses: usize,
    },
    #[error("record {index}: object `{object}` is not in the scenario")]
    UnknownObject { index: usize, object: String },
    #[error("record {index}: unknown response kind `{kind}`")]
    UnknownKind { index: usize, kind: String },
    #[error("record {index}: {source}")]
    Oversight {
        index: usize,
        #[source]
        source: OversightError,
    },
    #[error("unknown report format `{0}` (expected text, csv or json)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub v: u32,
    pub records: usize,
    pub responses: usize,
    /// Pipeline verdicts per category, in [`ResponseCategory::ALL`] order.
    pub counts: [usize; 4],
    pub label_counts: [usize; 4],
    /// Verdict shares, one decimal, summing to exactly 100.0 when non-empty.
    pub percentages: [f64; 4],
    /// `confusion[label][verdict]`.
    pub confusion: [[usize; 4]; 4],
    pub viability_agreement: usize,
    pub exact_agreement: usize,
    pub unviable_share: f64,
}

/// Integer counts to one-decimal percentages by largest remainder.
pub fn percentages(counts: &[usize; 4]) -> [f64; 4] {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return [0.0; 4];
    }
    let mut tenths = [0usize; 4];
    let mut rema = [(0usize, 0usize); 4];
    for (i, &c) in counts.iter().enumerate() {
        tenths[i] = c * 1000 / total;
        rema[i] = (c * 1000 % total, i);
    }
    let short = 1000 - tenths.iter().sum::<usize>();
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rema.iter().take(short) {
        tenths[i] += 1;
    }
    tenths.map(|t| t as f64 / 10.0)
}

fn kind_of(index: usize, r: &CorpusRecord) -> Result<ResponseKind, EvalError> {
    match r.kind.as_deref() {
        None | Some("goal") | Some("repair") => Ok(ResponseKind::Goal),
        Some("action") => Ok(ResponseKind::Action),
        Some(other) => Err(EvalError::UnknownKind {
            index,
            kind: other.to_string(),
        }),
    }
}

/// Categorize every labeled response against the scenario's initial state.
pub fn run_corpus(
    corpus: &[CorpusRecord],
    world: &WorldState,
    emb: &Embodiment,
    lexicon: &Lexicon,
    prefs: &PreferenceModel,
    depth_cap: usize,
) -> Result<CategoryReport, EvalError> {
    let mut counts = [0usize; 4];
    let mut label_counts = [0usize; 4];
    let mut confusion = [[0usize; 4]; 4];
    let mut responses = 0;
    let task = prefs.document().task.clone();
    for (index, rec) in corpus.iter().enumerate() {
        let labels = rec.labels.as_ref().ok_or(EvalError::Unlabeled { index })?;
        if labels.len() != rec.responses.len() {
            return Err(EvalError::LabelCount {
                index,
                labels: labels.len(),
                responses: rec.responses.len(),
            });
        }
        let kind = kind_of(index, rec)?;
        let object_name = rec.object.clone().unwrap_or_default();
        let object = world
            .object(&ObjId::new(object_name.as_str()))
            .ok_or(EvalError::UnknownObject {
                index,
                object: object_name,
            })?;
        let task = rec.task.as_deref().unwrap_or(&task);
        for (text, label) in rec.responses.iter().zip(labels) {
            let report = verify(text, kind, world, emb, lexicon, depth_cap);
            let decision = if report.viable {
                let p = Proposal::review(task, object.id.clone(), &object.noun, &rec.prompt, &report)
                    .map_err(|source| EvalError::Oversight { index, source })?;
                Some(oracle_decide(&p, prefs).map_err(|source| EvalError::Oversight { index, source })?)
            } else {
                None
            };
            let verdict = categorize(&report, decision.as_ref()).expect("decision present when viable");
            counts[verdict.index()] += 1;
            label_counts[label.index()] += 1;
            confusion[label.index()][verdict.index()] += 1;
            responses += 1;
        }
    }
    let u = ResponseCategory::Unviable.index();
    let viability_agreement = (0..4)
        .flat_map(|l| (0..4).map(move |v| (l, v)))
        .filter(|&(l, v)| (l == u) == (v == u))
        .map(|(l, v)| confusion[l][v])
        .sum();
    let exact_agreement = (0..4).map(|i| confusion[i][i]).sum();
    let pct = percentages(&counts);
    Ok(CategoryReport {
        v: 1,
        records: corpus.len(),
        responses,
        counts,
        label_counts,
        percentages: pct,
        confusion,
        viability_agreement,
        exact_agreement,
        unviable_share: pct[u],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(EvalError::UnknownFormat(other.to_string())),
        }
    }
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        (n as f64 * 1000.0 / d as f64).round() / 10.0
    }
}

pub fn emit_report(report: &CategoryReport, format: ReportFormat) -> String {
    let total = report.responses;
    match format {
        ReportFormat::Text => {
            let mut out = String::new();
            writeln!(out, "{:<24}{:>7}{:>9}", "category", "count", "percent").unwrap();
            for c in ResponseCategory::ALL {
                writeln!(
                    out,
                    "{:<24}{:>7}{:>9.1}",
                    c.label(),
                    report.counts[c.index()],
                    report.percentages[c.index()]
                )
                .unwrap();
            }
            let sum: f64 = report.percentages.iter().sum();
            writeln!(out, "{:<24}{:>7}{:>9.1}", "total", total, sum).unwrap();
            writeln!(out).unwrap();
            writeln!(
                out,
                "viability agreement: {}/{} ({:.1}%)",
                report.viability_agreement,
                total,
                ratio(report.viability_agreement, total)
            )
            .unwrap();
            writeln!(out, "label agreement: {}/{}", report.exact_agreement, total).unwrap();
            writeln!(out, "unviable share: {:.1}%", report.unviable_share).unwrap();
            out
        }
        ReportFormat::Csv => {
            let mut out = String::from("category,count,percent\n");
            for c in ResponseCategory::ALL {
                writeln!(
                    out,
                    "{},{},{:.1}",
                    c.label(),
                    report.counts[c.index()],
                    report.percentages[c.index()]
                )
                .unwrap();
            }
            let sum: f64 = report.percentages.iter().sum();
            writeln!(out, "total,{total},{sum:.1}").unwrap();
            out
        }
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    fn pantry() -> (WorldState, Embodiment, Lexicon, PreferenceModel) {
        let s = bundled::pantry_scenario();
        let lex = Lexicon::from_scenario(&s).unwrap();
        let prefs = PreferenceModel::parse(bundled::PANTRY_PREFS, &s.world, &lex).unwrap();
        (s.world, s.embodiment, lex, prefs)
    }

    fn record(responses: &[&str], labels: &[ResponseCategory]) -> CorpusRecord {
        let mut r = CorpusRecord::new("p", responses.iter().map(|s| s.to_string()).collect());
        r.labels = Some(labels.to_vec());
        r.object = Some("beans".into());
        r
    }

    #[test]
    fn largest_remainder_sums_to_hundred() {
        assert_eq!(percentages(&[1, 1, 1, 0]), [33.4, 33.3, 33.3, 0.0]);
        assert_eq!(percentages(&[0, 0, 0, 0]), [0.0; 4]);
        assert_eq!(percentages(&[2, 0, 0, 0]), [100.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn beans_triple_report() {
        use ResponseCategory::*;
        let (w, emb, lex, prefs) = pantry();
        let corpus = vec![record(
            &[
                "The goal is that the beans is in the pantry.",
                "The goal is that the beans is in the cupboard.",
                "The goal is that the beans is in the sink.",
                "The goal is that the beans is in the attic.",
            ],
            &[SituationallyRelevant, Reasonable, ViableNotReasonable, Unviable],
        )];
        let r = run_corpus(&corpus, &w, &emb, &lex, &prefs, 12).unwrap();
        assert_eq!(r.counts, [1, 1, 1, 1]);
        assert_eq!(r.exact_agreement, 4);
        assert_eq!(r.viability_agreement, 4);
        let csv = emit_report(&r, ReportFormat::Csv);
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.ends_with("total,4,100.0\n"));
    }

    #[test]
    fn empty_corpus_is_empty_report() {
        let (w, emb, lex, prefs) = pantry();
        let r = run_corpus(&[], &w, &emb, &lex, &prefs, 12).unwrap();
        assert_eq!(r.responses, 0);
        assert_eq!(r.unviable_share, 0.0);
        assert!(emit_report(&r, ReportFormat::Text).contains("viability agreement: 0/0 (0.0%)"));
    }

    #[test]
    fn mismatched_corpus_is_refused() {
        let (w, emb, lex, prefs) = pantry();
        let mut r = record(&["x"], &[ResponseCategory::Unviable]);
        r.object = Some("lamp".into());
        assert!(matches!(
            run_corpus(&[r], &w, &emb, &lex, &prefs, 12),
            Err(EvalError::UnknownObject { .. })
        ));
        let r = record(&["x", "y"], &[ResponseCategory::Unviable]);
        assert!(matches!(
            run_corpus(&[r], &w, &emb, &lex, &prefs, 12),
            Err(EvalError::LabelCount { .. })
        ));
        assert_eq!(
            "xml".parse::<ReportFormat>(),
            Err(EvalError::UnknownFormat("xml".into()))
        );
    }

    #[test]
    fn json_is_deterministic_and_roundtrips() {
        let (w, emb, lex, prefs) = pantry();
        let corpus = vec![record(
            &["The goal is that the beans is in the pantry."],
            &[ResponseCategory::SituationallyRelevant],
        )];
        let a = emit_report(&run_corpus(&corpus, &w, &emb, &lex, &prefs, 12).unwrap(), ReportFormat::Json);
        let b = emit_report(&run_corpus(&corpus, &w, &emb, &lex, &prefs, 12).unwrap(), ReportFormat::Json);
        assert_eq!(a, b);
        let back: CategoryReport = serde_json::from_str(&a).unwrap();
        assert_eq!(back.counts, [0, 0, 0, 1]);
    }
}
