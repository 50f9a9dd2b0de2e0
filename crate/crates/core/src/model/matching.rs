//! Matching unit and loss terms.

use std::collections::BTreeMap;

use crate::data::semantics::norm;
use crate::data::{ClassSemanticSet, SkeletonSequence};
use crate::error::{Error, Result};
use crate::nn::Tensor2;

/// `β_k = f · v_k / ‖v_k‖` for every class.
pub fn similarity_scores(f: &[f64], semantics: &ClassSemanticSet) -> Result<BTreeMap<String, f64>> {
    if f.len() != semantics.embedding_dim() {
        return Err(Error::dims(
            "similarity scores",
            format!("feature length {}", f.len()),
            format!("embedding_dim {}", semantics.embedding_dim()),
        ));
    }
    semantics
        .vectors()
        .iter()
        .map(|(class, v)| {
            let n = norm(v);
            if !(n > 0.0) {
                return Err(Error::Data(format!("semantic vector of `{class}` has zero norm")));
            }
            Ok((class.clone(), dot(f, v) / n))
        })
        .collect()
}

/// Softmax with max subtraction.
pub fn class_probabilities(scores: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    let lse = log_sum_exp(scores.values().copied())?;
    Ok(scores.iter().map(|(c, b)| (c.clone(), (b - lse).exp())).collect())
}

/// `‖f − v‖₂`.
pub fn matching_loss(f: &[f64], v: &[f64]) -> Result<f64> {
    if f.len() != v.len() {
        return Err(Error::dims("matching loss", format!("f length {}", f.len()), format!("v length {}", v.len())));
    }
    Ok(f.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// `−log P(true_class)` via log-sum-exp over the raw scores.
pub fn classification_loss(scores: &BTreeMap<String, f64>, true_class: &str) -> Result<f64> {
    let b = scores
        .get(true_class)
        .ok_or_else(|| Error::Data(format!("class `{true_class}` not among the scored classes")))?;
    Ok(log_sum_exp(scores.values().copied())? - b)
}

/// `‖h̄_f − h_c‖ + ‖h̄_v − h_c‖` over flattened coordinates.
pub fn reconstruction_loss(
    from_feature: &SkeletonSequence,
    from_semantic: &SkeletonSequence,
    target: &SkeletonSequence,
) -> Result<f64> {
    let shape = (target.frames(), target.joints(), target.dims());
    for s in [from_feature, from_semantic] {
        if (s.frames(), s.joints(), s.dims()) != shape {
            return Err(Error::dims(
                "reconstruction loss",
                format!("{}x{}x{}", s.frames(), s.joints(), s.dims()),
                format!("{}x{}x{}", shape.0, shape.1, shape.2),
            ));
        }
    }
    let dist = |a: &SkeletonSequence| {
        a.coords()
            .data()
            .iter()
            .zip(target.coords().data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    Ok(dist(from_feature) + dist(from_semantic))
}

/// `L_M + λ·L_C + α·L_R`.
pub fn total_loss(l_m: f64, l_c: f64, l_r: f64, lambda: f64, alpha: f64) -> f64 {
    l_m + lambda * l_c + alpha * l_r
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> Result<f64> {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Data("no class scores".into()));
    }
    Ok(max + values.map(|v| (v - max).exp()).sum::<f64>().ln())
}

/// Class vectors laid out for batched scoring; rows follow sorted class names.
#[derive(Debug, Clone)]
pub(crate) struct SemanticTable {
    pub classes: Vec<String>,
    /// Raw vectors, one per row.
    pub vectors: Tensor2,
    /// Unit vectors, one per row.
    pub units: Tensor2,
}

impl SemanticTable {
    pub fn new(semantics: &ClassSemanticSet) -> Result<Self> {
        let dim = semantics.embedding_dim();
        let mut classes = Vec::with_capacity(semantics.len());
        let mut vectors = Vec::with_capacity(semantics.len() * dim);
        let mut units = Vec::with_capacity(semantics.len() * dim);
        for (class, v) in semantics.vectors() {
            let n = norm(v);
            if !(n > 0.0) {
                return Err(Error::Data(format!("semantic vector of `{class}` has zero norm")));
            }
            classes.push(class.clone());
            vectors.extend_from_slice(v);
            units.extend(v.iter().map(|x| x / n));
        }
        if classes.is_empty() {
            return Err(Error::Data("empty class set".into()));
        }
        let k = classes.len();
        Ok(Self {
            classes,
            vectors: Tensor2::from_vec(k, dim, vectors)?,
            units: Tensor2::from_vec(k, dim, units)?,
        })
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(class)).ok()
    }

    /// `batch × classes` scores.
    pub fn scores(&self, features: &Tensor2) -> Result<Tensor2> {
        features.matmul_nt(&self.units)
    }
}

/// Row-wise log-softmax.
pub(crate) fn log_softmax_rows(scores: &Tensor2) -> Tensor2 {
    let mut out = scores.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.iter_mut().for_each(|v| *v -= lse);
    }
    out
}

/// Index of the largest entry; the first (smallest class name) wins ties.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
