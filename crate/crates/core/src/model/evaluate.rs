//! Fold evaluation: unseen accuracy, explanation alignment and realism.

use std::collections::BTreeSet;

use super::infer::{build_explanation, Model, Prediction};
use crate::data::{Dataset, FoldSpec, ImuWindow, SkeletonSequence};
use crate::error::{Error, Result};
use crate::metrics::{
    alignment_metrics, avg_accuracy_per_class, estimate_cost_model_default, per_class_counts, realism_report,
    AlignmentRecord, CostModel, EvalReport,
};

/// Seen-class reference skeletons in dataset order, and the cost model
/// estimated from all of their frames.
pub fn seen_references<'a>(
    dataset: &'a Dataset,
    seen: &BTreeSet<String>,
) -> Result<(Vec<(&'a str, &'a SkeletonSequence)>, CostModel)> {
    let refs: Vec<(&str, &SkeletonSequence)> = dataset
        .skeletons
        .iter()
        .filter(|e| seen.contains(&e.sequence.class))
        .map(|e| (e.sequence.class.as_str(), &e.sequence))
        .collect();
    if refs.is_empty() {
        return Err(Error::Data("no seen-class reference skeletons".into()));
    }
    let seqs: Vec<&SkeletonSequence> = refs.iter().map(|(_, s)| *s).collect();
    let cost = estimate_cost_model_default(&seqs)?;
    Ok((refs, cost))
}

pub fn evaluate(model: &Model, dataset: &Dataset, fold: &FoldSpec) -> Result<EvalReport> {
    let trained: BTreeSet<String> = model.seen_classes.iter().cloned().collect();
    if trained != fold.seen {
        return Err(Error::Config(format!(
            "checkpoint was trained on seen classes {:?}, fold {} has {:?}",
            model.seen_classes, fold.index, fold.seen
        )));
    }
    let unseen = dataset.semantics.subset(fold.unseen.iter().map(String::as_str))?;
    let windows: Vec<&ImuWindow> = dataset.windows_in(&fold.unseen).collect();
    if windows.is_empty() {
        return Err(Error::Data(format!("fold {} has no labelled samples of unseen classes", fold.index)));
    }
    let (refs, cost) = seen_references(dataset, &fold.seen)?;

    let features = model.features(&windows)?;
    let predictions = (0..windows.len())
        .map(|r| Prediction::from_features(features.row(r), &unseen))
        .collect::<Result<Vec<_>>>()?;
    let classes: Vec<&str> = predictions.iter().map(|p| p.predicted_class.as_str()).collect();
    let generated = model.decode_rows(&features, &classes)?;

    let mut pairs = Vec::with_capacity(windows.len());
    let mut records = Vec::with_capacity(windows.len());
    let mut realism_pairs = Vec::with_capacity(windows.len());
    for ((w, p), g) in windows.iter().zip(predictions).zip(generated) {
        let truth = w.label.as_deref().expect("labelled");
        pairs.push((truth, p.predicted_class.clone()));
        let e = build_explanation(&w.id, p, g, &refs, &cost)?;
        records.push(AlignmentRecord::new(
            &w.id,
            truth,
            &e.predicted_class,
            &e.matching_seen_class,
            e.dtw_to_match,
        ));
        realism_pairs.push((e.generated, e.reference_index));
    }

    let pair_refs: Vec<(&str, &str)> = pairs.iter().map(|(t, p)| (*t, p.as_str())).collect();
    let accuracy = avg_accuracy_per_class(&pair_refs)?;
    let per_class_accuracy = per_class_counts(&pair_refs)
        .into_iter()
        .map(|(c, (ok, n))| (c, ok as f64 / n as f64))
        .collect();
    let alignment = alignment_metrics(records, &dataset.superclasses)?;
    let dfd_pairs: Vec<(&SkeletonSequence, &SkeletonSequence)> =
        realism_pairs.iter().map(|(g, i)| (g, refs[*i].1)).collect();
    let realism = realism_report(&dfd_pairs)?;

    Ok(EvalReport {
        dataset: dataset.manifest.name.clone(),
        fold: fold.index,
        seed: model.config.seed,
        unseen_classes: fold.unseen.iter().cloned().collect(),
        samples: windows.len(),
        accuracy,
        per_class_accuracy,
        alignment,
        realism,
    })
}
