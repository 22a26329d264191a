//! Task metrics and per-language report tables.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taskconv::{TaggedSpan, TaskInstance, TaskPrediction};

/// Lowercases, removes punctuation and symbols, drops English articles when
/// `english`, and collapses whitespace.
pub fn normalize_answer(s: &str, english: bool) -> String {
    let lowered: String = s
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect();
    lowered
        .split_whitespace()
        .filter(|w| !(english && matches!(*w, "a" | "an" | "the")))
        .collect::<Vec<_>>()
        .join(" ")
}

fn overlap_f1(pred: &[&str], gold: &[&str]) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return (pred == gold) as u8 as f64;
    }
    let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
    for t in gold {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0;
    for t in pred {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let p = common as f64 / pred.len() as f64;
    let r = common as f64 / gold.len() as f64;
    2.0 * p * r / (p + r)
}

/// Token-overlap F1 and exact match against the best-matching gold answer.
/// Article removal applies only when `lang` is `"en"`. No gold answers
/// counts as a single empty answer.
pub fn squad_f1_em(prediction: &str, golds: &[String], lang: &str) -> (f64, f64) {
    let english = lang == "en";
    let pred = normalize_answer(prediction, english);
    let pred_tokens: Vec<&str> = pred.split_whitespace().collect();
    let empty = [String::new()];
    let golds = if golds.is_empty() { &empty[..] } else { golds };
    let mut best = (0.0f64, 0.0f64);
    for g in golds {
        let gold = normalize_answer(g, english);
        let gold_tokens: Vec<&str> = gold.split_whitespace().collect();
        best.0 = best.0.max(overlap_f1(&pred_tokens, &gold_tokens));
        best.1 = best.1.max((pred == gold) as u8 as f64);
    }
    best
}

/// Exact-tuple precision, recall and F1. Both empty gives (1, 1, 1); an
/// empty side otherwise gives (0, 0, 0).
pub fn span_set_f1<T: Eq + Hash>(pred: &[T], gold: &[T]) -> (f64, f64, f64) {
    let p: HashSet<&T> = pred.iter().collect();
    let g: HashSet<&T> = gold.iter().collect();
    SpanCounts::of(&p, &g).prf()
}

/// Running counts for micro-averaged span F1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanCounts {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl SpanCounts {
    fn of<T: Eq + Hash>(p: &HashSet<T>, g: &HashSet<T>) -> Self {
        Self {
            matched: p.intersection(g).count(),
            predicted: p.len(),
            gold: g.len(),
        }
    }

    pub fn add(&mut self, other: SpanCounts) {
        self.matched += other.matched;
        self.predicted += other.predicted;
        self.gold += other.gold;
    }

    pub fn prf(&self) -> (f64, f64, f64) {
        if self.predicted == 0 && self.gold == 0 {
            return (1.0, 1.0, 1.0);
        }
        if self.predicted == 0 || self.gold == 0 || self.matched == 0 {
            return (0.0, 0.0, 0.0);
        }
        let p = self.matched as f64 / self.predicted as f64;
        let r = self.matched as f64 / self.gold as f64;
        (p, r, 2.0 * p * r / (p + r))
    }
}

pub fn accuracy<S: AsRef<str>>(pred: &[S], gold: &[S]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::Empty("label lists"));
    }
    let hits = pred.iter().zip(gold).filter(|(p, g)| p.as_ref() == g.as_ref()).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Score of one instance, in a form that aggregates per language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InstanceScore {
    Eqa { f1: f64, em: f64 },
    Spans(SpanCounts),
    Label { correct: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub dataset: String,
    pub lang: String,
    pub score: InstanceScore,
}

/// Compares a prediction with its gold instance.
pub fn score_instance(pred: &TaskPrediction, gold: &TaskInstance) -> Result<InstanceScore> {
    if pred.id() != gold.id() {
        return Err(Error::Config(format!(
            "prediction {} paired with gold {}",
            pred.id(),
            gold.id()
        )));
    }
    match (pred, gold) {
        (TaskPrediction::Eqa { answer, .. }, TaskInstance::Eqa(g)) => {
            let (f1, em) = squad_f1_em(answer, &g.answers, &g.lang);
            Ok(InstanceScore::Eqa { f1, em })
        }
        (TaskPrediction::Tagging { spans, .. }, TaskInstance::Tagging(g)) => {
            let gold: HashSet<TaggedSpan> = g
                .spans
                .iter()
                .map(|(label, start, end)| TaggedSpan {
                    label: label.clone(),
                    start: *start,
                    end: *end,
                })
                .collect();
            let pred: HashSet<TaggedSpan> = spans.iter().cloned().collect();
            Ok(InstanceScore::Spans(SpanCounts::of(&pred, &gold)))
        }
        (TaskPrediction::Pair { label, .. }, TaskInstance::Pair(g)) => {
            let gold = g
                .label
                .as_ref()
                .ok_or_else(|| Error::Config(format!("gold pair {} has no label", g.id)))?;
            Ok(InstanceScore::Label { correct: label == gold })
        }
        _ => Err(Error::Config(format!("prediction {} has the wrong task kind", pred.id()))),
    }
}

/// Metric values per language for one dataset, on a 0–100 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub dataset: String,
    pub metrics: Vec<String>,
    /// Language → one value per metric.
    pub languages: BTreeMap<String, Vec<f64>>,
    /// Unweighted mean over languages, per metric.
    pub average: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub dataset: String,
    pub lang: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub datasets: Vec<DatasetReport>,
    /// Mean over datasets of each dataset's first metric.
    pub overall: f64,
}

/// Sum that does not depend on input order.
fn mean(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

fn cell(scores: &[&InstanceScore]) -> Result<(Vec<&'static str>, Vec<f64>)> {
    match scores[0] {
        InstanceScore::Eqa { .. } => {
            let mut f1 = Vec::new();
            let mut em = Vec::new();
            for s in scores {
                let InstanceScore::Eqa { f1: a, em: b } = s else {
                    return Err(Error::Config("mixed score kinds in one dataset".into()));
                };
                f1.push(*a);
                em.push(*b);
            }
            Ok((vec!["F1", "EM"], vec![100.0 * mean(f1), 100.0 * mean(em)]))
        }
        InstanceScore::Spans(_) => {
            let mut total = SpanCounts::default();
            for s in scores {
                let InstanceScore::Spans(c) = s else {
                    return Err(Error::Config("mixed score kinds in one dataset".into()));
                };
                total.add(*c);
            }
            Ok((vec!["F1"], vec![100.0 * total.prf().2]))
        }
        InstanceScore::Label { .. } => {
            let mut hits = 0usize;
            for s in scores {
                let InstanceScore::Label { correct } = s else {
                    return Err(Error::Config("mixed score kinds in one dataset".into()));
                };
                hits += *correct as usize;
            }
            Ok((vec!["Acc."], vec![100.0 * hits as f64 / scores.len() as f64]))
        }
    }
}

/// Groups results by dataset and language. Datasets and languages are
/// listed in sorted order.
pub fn build_report(results: &[InstanceResult]) -> Result<EvalReport> {
    let mut grouped: BTreeMap<&str, BTreeMap<&str, Vec<&InstanceScore>>> = BTreeMap::new();
    for r in results {
        grouped.entry(&r.dataset).or_default().entry(&r.lang).or_default().push(&r.score);
    }
    let mut datasets = Vec::new();
    for (dataset, langs) in grouped {
        let mut metrics: Option<Vec<&str>> = None;
        let mut languages = BTreeMap::new();
        for (lang, scores) in langs {
            let (names, values) = cell(&scores)?;
            if metrics.as_ref().is_some_and(|m| *m != names) {
                return Err(Error::Config(format!("dataset {dataset} mixes task kinds")));
            }
            metrics = Some(names);
            languages.insert(lang.to_string(), values);
        }
        let metrics: Vec<String> = metrics.unwrap_or_default().into_iter().map(String::from).collect();
        let average = (0..metrics.len())
            .map(|k| mean(languages.values().map(|v: &Vec<f64>| v[k]).collect()))
            .collect();
        datasets.push(DatasetReport {
            dataset: dataset.to_string(),
            metrics,
            languages,
            average,
        });
    }
    let overall = mean(datasets.iter().map(|d| d.average[0]).collect());
    Ok(EvalReport { datasets, overall })
}

impl EvalReport {
    /// One row per (dataset, language, metric), then the `Avg.` rows, then a
    /// final overall row.
    pub fn rows(&self) -> Vec<MetricRow> {
        let mut rows = Vec::new();
        for d in &self.datasets {
            let langs = d.languages.iter().map(|(l, v)| (l.as_str(), v)).chain([("Avg.", &d.average)]);
            for (lang, values) in langs {
                for (metric, &value) in d.metrics.iter().zip(values) {
                    rows.push(MetricRow {
                        dataset: d.dataset.clone(),
                        lang: lang.to_string(),
                        metric: metric.clone(),
                        value,
                    });
                }
            }
        }
        rows.push(MetricRow {
            dataset: "all".into(),
            lang: "Avg.".into(),
            metric: "score".into(),
            value: self.overall,
        });
        rows
    }

    /// One block per dataset: languages across, then `Avg.`; cells hold the
    /// metrics joined by " / ".
    pub fn render(&self) -> String {
        let mut out = String::new();
        for d in &self.datasets {
            let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join(" / ");
            let mut header = vec!["Dataset".to_string()];
            let mut values = vec![format!("{} ({})", d.dataset, d.metrics.join(" / "))];
            for (lang, v) in &d.languages {
                header.push(lang.clone());
                values.push(fmt(v));
            }
            header.push("Avg.".into());
            values.push(fmt(&d.average));
            let widths: Vec<usize> = header.iter().zip(&values).map(|(h, v)| h.len().max(v.len())).collect();
            let line = |cells: &[String]| {
                cells
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            let _ = writeln!(out, "{}", line(&header));
            let _ = writeln!(out, "{}", line(&values));
            let _ = writeln!(out);
        }
        let _ = writeln!(out, "Overall average: {:.1}", self.overall);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn squad_examples() {
        assert_eq!(squad_f1_em("Pittsburgh Steelers", &s(&["Pittsburgh Steelers"]), "en"), (1.0, 1.0));
        let (f1, em) = squad_f1_em("the Pittsburgh Steelers", &s(&["Pittsburgh Steelers"]), "de");
        assert!((f1 - 0.8).abs() < 1e-9);
        assert_eq!(em, 0.0);
        assert_eq!(squad_f1_em("the Pittsburgh Steelers", &s(&["Pittsburgh Steelers"]), "en"), (1.0, 1.0));
        assert_eq!(squad_f1_em("", &s(&["x"]), "en"), (0.0, 0.0));
        assert_eq!(squad_f1_em("b", &s(&["a", "B."]), "en"), (1.0, 1.0));
    }

    #[test]
    fn span_examples() {
        let gold = vec![("LOC", 1, 1), ("LOC", 5, 5), ("MISC", 2, 3)];
        assert_eq!(span_set_f1(&gold, &gold), (1.0, 1.0, 1.0));
        let mut pred = gold.clone();
        pred.push(("PER", 7, 7));
        let (p, r, f) = span_set_f1(&pred, &gold);
        assert!((p - 0.75).abs() < 1e-9 && (r - 1.0).abs() < 1e-9 && (f - 6.0 / 7.0).abs() < 1e-9);
        assert_eq!(span_set_f1(&[("X", 0, 0)], &gold), (0.0, 0.0, 0.0));
        assert_eq!(span_set_f1::<(u8, u8)>(&[], &[]), (1.0, 1.0, 1.0));
        assert_eq!(span_set_f1(&[], &gold), (0.0, 0.0, 0.0));
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&["a", "b"], &["a", "b"]).unwrap(), 1.0);
        assert_eq!(accuracy(&["a", "b", "c", "d"], &["a", "b", "c", "x"]).unwrap(), 0.75);
        assert!(accuracy::<&str>(&[], &[]).is_err());
        assert!(accuracy(&["a"], &["a", "b"]).is_err());
    }

    fn eqa(lang: &str, f1: f64) -> InstanceResult {
        InstanceResult {
            dataset: "MLQA".into(),
            lang: lang.into(),
            score: InstanceScore::Eqa { f1, em: 0.0 },
        }
    }

    #[test]
    fn report_single_cell_and_mean() {
        let r = build_report(&[eqa("en", 0.5)]).unwrap();
        assert_eq!(r.datasets[0].average, r.datasets[0].languages["en"]);
        let r = build_report(&[eqa("en", 0.8), eqa("de", 0.6)]).unwrap();
        assert!((r.datasets[0].average[0] - 70.0).abs() < 1e-9);
        assert!((r.overall - 70.0).abs() < 1e-9);
    }

    #[test]
    fn report_layout_languages_then_avg() {
        let r = build_report(&[eqa("en", 0.8), eqa("de", 0.6), eqa("ar", 0.4)]).unwrap();
        let text = r.render();
        let header = text.lines().next().unwrap();
        let cols: Vec<&str> = header.split_whitespace().collect();
        assert_eq!(cols, ["Dataset", "ar", "de", "en", "Avg."]);
        assert!(text.lines().nth(1).unwrap().contains("MLQA (F1 / EM)"));
        let rows = r.rows();
        assert_eq!(rows.len(), 4 * 2 + 1);
        assert_eq!(rows[6].lang, "Avg.");
    }

    #[test]
    fn mixed_kinds_rejected() {
        let mut b = eqa("en", 1.0);
        b.score = InstanceScore::Label { correct: true };
        assert!(build_report(&[eqa("en", 1.0), b]).is_err());
    }
}
