//! Combined evaluation report and aligned-column text tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::alignment::AlignmentReport;
use super::realism::RealismReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub fold: usize,
    pub seed: u64,
    pub unseen_classes: Vec<String>,
    pub samples: usize,
    pub accuracy: f64,
    pub per_class_accuracy: BTreeMap<String, f64>,
    pub alignment: AlignmentReport,
    pub realism: RealismReport,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable") + "\n"
    }

    /// All scalar fields finite (undefined percentages are allowed).
    pub fn all_finite(&self) -> bool {
        let a = &self.alignment;
        let opt = |v: Option<f64>| v.is_none_or(f64::is_finite);
        self.accuracy.is_finite()
            && self.per_class_accuracy.values().all(|v| v.is_finite())
            && opt(a.tsa)
            && opt(a.psa)
            && opt(a.oa)
            && a.add.is_finite()
            && a.records.iter().all(|r| r.distance.is_finite())
            && self.realism.dfd_mean.is_finite()
            && self.realism.dfd_std.is_finite()
            && self.realism.values.iter().all(|v| v.is_finite())
    }

    pub fn to_text(&self) -> String {
        let name = format!("{} (fold {})", self.dataset, self.fold);
        let mut out = String::new();
        out.push_str(&table(
            &["Dataset", "Accuracy"],
            &[vec![name.clone(), format!("{:.2}", 100.0 * self.accuracy)]],
        ));
        out.push('\n');
        out.push_str(&alignment_table(&[(name.as_str(), &self.alignment)]));
        out.push('\n');
        out.push_str(&realism_table(&[(name.as_str(), &self.realism)]));
        out
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.1}"))
}

/// One row per dataset: TSA, PSA, OA, ADD.
pub fn alignment_table(rows: &[(&str, &AlignmentReport)]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, r)| vec![name.to_string(), pct(r.tsa), pct(r.psa), pct(r.oa), format!("{:.2}", r.add)])
        .collect();
    table(&["Dataset", "TSA", "PSA", "OA", "ADD"], &body)
}

/// One column per dataset, rows DFD-Mean and DFD-std.
pub fn realism_table(columns: &[(&str, &RealismReport)]) -> String {
    let mut header = vec!["Metrics"];
    header.extend(columns.iter().map(|(n, _)| *n));
    let mean = std::iter::once("DFD-Mean".to_string())
        .chain(columns.iter().map(|(_, r)| format!("{:.3}", r.dfd_mean)))
        .collect();
    let std = std::iter::once("DFD-std".to_string())
        .chain(columns.iter().map(|(_, r)| format!("{:.3}", r.dfd_std)))
        .collect();
    table(&header, &[mean, std])
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)) + "\n";
    let mut out = rule.clone();
    out.push_str(&line(header.to_vec()));
    out.push_str(&rule);
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out.push_str(&rule);
    out
}
