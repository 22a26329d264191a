use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::MrcExample;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub lang: String,
    pub entities: usize,
    pub examples: usize,
}

/// Entity and example counts per language plus a total.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub rows: Vec<StatsRow>,
    pub total: StatsRow,
}

impl Default for StatsRow {
    fn default() -> Self {
        Self {
            lang: "Total".into(),
            entities: 0,
            examples: 0,
        }
    }
}

pub fn corpus_stats<'a>(examples: impl IntoIterator<Item = &'a MrcExample>) -> CorpusStats {
    let mut entities: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for ex in examples {
        entities.entry(&ex.lang).or_default().insert(&ex.entity);
        *counts.entry(&ex.lang).or_default() += 1;
    }
    let rows: Vec<StatsRow> = counts
        .iter()
        .map(|(lang, &n)| StatsRow {
            lang: lang.to_string(),
            entities: entities[lang].len(),
            examples: n,
        })
        .collect();
    let total = StatsRow {
        lang: "Total".into(),
        entities: rows.iter().map(|r| r.entities).sum(),
        examples: rows.iter().map(|r| r.examples).sum(),
    };
    CorpusStats { rows, total }
}

fn grouped(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

impl CorpusStats {
    /// Aligned text table: one row per language, then the total.
    pub fn render(&self) -> String {
        let header = ("Language", "# Entities", "# MRC examples");
        let cells: Vec<(String, String, String)> = self
            .rows
            .iter()
            .chain(std::iter::once(&self.total))
            .map(|r| (r.lang.clone(), grouped(r.entities), grouped(r.examples)))
            .collect();
        let w0 = cells.iter().map(|c| c.0.len()).max().unwrap_or(0).max(header.0.len());
        let w1 = cells.iter().map(|c| c.1.len()).max().unwrap_or(0).max(header.1.len());
        let w2 = cells.iter().map(|c| c.2.len()).max().unwrap_or(0).max(header.2.len());
        let mut out = String::new();
        let rule = "-".repeat(w0 + w1 + w2 + 6);
        let _ = writeln!(out, "{:<w0$}   {:>w1$}   {:>w2$}", header.0, header.1, header.2);
        let _ = writeln!(out, "{rule}");
        for (i, c) in cells.iter().enumerate() {
            if i + 1 == cells.len() {
                let _ = writeln!(out, "{rule}");
            }
            let _ = writeln!(out, "{:<w0$}   {:>w1$}   {:>w2$}", c.0, c.1, c.2);
        }
        out
    }

    /// Rows followed by the total, for JSON lines output.
    pub fn machine_rows(&self) -> Vec<StatsRow> {
        let mut rows = self.rows.clone();
        rows.push(self.total.clone());
        rows
    }
}
