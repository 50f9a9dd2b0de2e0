//! Macro-averaged accuracy over the true classes present.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Per-class recall: class → (correct, total).
pub fn per_class_counts<S: AsRef<str>>(pairs: &[(S, S)]) -> BTreeMap<String, (usize, usize)> {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (truth, pred) in pairs {
        let entry = counts.entry(truth.as_ref().to_string()).or_default();
        entry.1 += 1;
        if truth.as_ref() == pred.as_ref() {
            entry.0 += 1;
        }
    }
    counts
}

/// `(1/|C|) Σ_c correct_c / total_c` over `(true, predicted)` pairs.
pub fn avg_accuracy_per_class<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Data("no predictions to score".into()));
    }
    let counts = per_class_counts(pairs);
    let sum: f64 = counts.values().map(|&(c, t)| c as f64 / t as f64).sum();
    Ok(sum / counts.len() as f64)
}
