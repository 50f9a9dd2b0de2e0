//! Super-class alignment of explanations with their matching seen class.

use serde::{Deserialize, Serialize};

use crate::data::SuperClassMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub sample_id: String,
    pub true_class: String,
    pub predicted_class: String,
    pub correct: bool,
    pub matching_class: String,
    pub distance: f64,
}

impl AlignmentRecord {
    pub fn new(
        sample_id: impl Into<String>,
        true_class: impl Into<String>,
        predicted_class: impl Into<String>,
        matching_class: impl Into<String>,
        distance: f64,
    ) -> Self {
        let true_class = true_class.into();
        let predicted_class = predicted_class.into();
        Self {
            sample_id: sample_id.into(),
            correct: true_class == predicted_class,
            true_class,
            predicted_class,
            matching_class: matching_class.into(),
            distance,
        }
    }
}

/// Percentages in `[0, 100]`; `None` when the denominator is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub tsa: Option<f64>,
    pub psa: Option<f64>,
    pub oa: Option<f64>,
    pub add: f64,
    pub tsa_samples: usize,
    pub psa_samples: usize,
    pub oa_samples: usize,
    pub records: Vec<AlignmentRecord>,
}

fn percent(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| 100.0 * hits as f64 / total as f64)
}

pub fn alignment_metrics(records: Vec<AlignmentRecord>, map: &SuperClassMap) -> Result<AlignmentReport> {
    if records.is_empty() {
        return Err(Error::Data("no explanation records to score".into()));
    }
    let (mut tsa_hits, mut tsa_n, mut psa_hits, mut psa_n, mut oa_hits) = (0, 0, 0, 0, 0);
    let mut total_distance = 0.0;
    for r in &records {
        let matched = map.require(&r.matching_class)?;
        let predicted = map.require(&r.predicted_class)?;
        let target = map.require(&r.true_class)?;
        let aligned_with_prediction = matched == predicted;
        if r.correct {
            tsa_n += 1;
            tsa_hits += usize::from(matched == target);
        } else {
            psa_n += 1;
            psa_hits += usize::from(aligned_with_prediction);
        }
        oa_hits += usize::from(aligned_with_prediction);
        total_distance += r.distance;
    }
    let n = records.len();
    Ok(AlignmentReport {
        tsa: percent(tsa_hits, tsa_n),
        psa: percent(psa_hits, psa_n),
        oa: percent(oa_hits, n),
        add: total_distance / n as f64,
        tsa_samples: tsa_n,
        psa_samples: psa_n,
        oa_samples: n,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn map() -> SuperClassMap {
        let m: BTreeMap<String, String> = [("walk", "loco"), ("run", "loco"), ("sit", "static"), ("lie", "static")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        SuperClassMap::new(m).unwrap()
    }

    #[test]
    fn all_correct_and_aligned() {
        let recs = vec![
            AlignmentRecord::new("s1", "walk", "walk", "run", 1.0),
            AlignmentRecord::new("s2", "sit", "sit", "lie", 3.0),
        ];
        let r = alignment_metrics(recs, &map()).unwrap();
        assert_eq!((r.tsa, r.psa, r.oa), (Some(100.0), None, Some(100.0)));
        assert_eq!(r.add, 2.0);
    }

    #[test]
    fn mixed_case_counts() {
        let recs = vec![
            AlignmentRecord::new("s1", "walk", "walk", "run", 1.0),
            AlignmentRecord::new("s2", "sit", "walk", "lie", 1.0),
        ];
        let r = alignment_metrics(recs, &map()).unwrap();
        assert_eq!((r.tsa, r.psa, r.oa), (Some(100.0), Some(0.0), Some(50.0)));
        assert_eq!(r.oa_samples, r.tsa_samples + r.psa_samples);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["psa"], serde_json::json!(0.0));
    }

    #[test]
    fn undefined_is_null_and_unknown_errors() {
        let recs = vec![AlignmentRecord::new("s", "walk", "sit", "lie", 0.5)];
        let r = alignment_metrics(recs, &map()).unwrap();
        assert_eq!(serde_json::to_value(&r).unwrap()["tsa"], serde_json::Value::Null);
        let bad = vec![AlignmentRecord::new("s", "walk", "walk", "swim", 0.5)];
        assert!(alignment_metrics(bad, &map()).is_err());
        assert!(alignment_metrics(vec![], &map()).is_err());
    }
}
