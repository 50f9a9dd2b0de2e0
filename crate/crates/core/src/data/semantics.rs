//! Class semantic vectors: the per-class mean of video embeddings.
//!
//! File format: a JSON object with a numeric `embedding_dim` key, an
//! optional free-form `metadata` key, and one key per class. A class value is
//! either a single vector (already averaged) or a list of per-video vectors
//! that is averaged on load.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const EMBEDDING_DIM_KEY: &str = "embedding_dim";
pub const METADATA_KEY: &str = "metadata";

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSemanticSet {
    embedding_dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
    /// Number of source videos behind each vector.
    provenance: BTreeMap<String, usize>,
}

impl ClassSemanticSet {
    pub fn new(
        embedding_dim: usize,
        vectors: BTreeMap<String, Vec<f64>>,
        provenance: BTreeMap<String, usize>,
    ) -> Result<Self> {
        if embedding_dim == 0 {
            return Err(Error::Data("embedding_dim must be positive".into()));
        }
        for (class, v) in &vectors {
            if v.len() != embedding_dim {
                return Err(Error::dims(
                    format!("semantic vector of class `{class}`"),
                    format!("embedding_dim {embedding_dim}"),
                    format!("length {}", v.len()),
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Data(format!("semantic vector of class `{class}` is not finite")));
            }
            if norm(v) == 0.0 {
                return Err(Error::Data(format!("semantic vector of class `{class}` has zero norm")));
            }
        }
        Ok(Self {
            embedding_dim,
            vectors,
            provenance,
        })
    }

    /// Convenience constructor with a provenance of one video per class.
    pub fn from_vectors(embedding_dim: usize, vectors: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let provenance = vectors.keys().map(|k| (k.clone(), 1)).collect();
        Self::new(embedding_dim, vectors, provenance)
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Class names in lexicographic order.
    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    pub fn get(&self, class: &str) -> Option<&[f64]> {
        self.vectors.get(class).map(Vec::as_slice)
    }

    pub fn vectors(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.vectors
    }

    pub fn provenance(&self, class: &str) -> Option<usize> {
        self.provenance.get(class).copied()
    }

    /// Restriction to `classes`; fails on unknown names.
    pub fn subset<'a>(&self, classes: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut vectors = BTreeMap::new();
        let mut provenance = BTreeMap::new();
        for c in classes {
            let v = self
                .vectors
                .get(c)
                .ok_or_else(|| Error::Data(format!("no semantic vector for class `{c}`")))?;
            vectors.insert(c.to_string(), v.clone());
            provenance.insert(c.to_string(), self.provenance.get(c).copied().unwrap_or(1));
        }
        Ok(Self {
            embedding_dim: self.embedding_dim,
            vectors,
            provenance,
        })
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Averages each class's video embeddings into its class semantic vector.
pub fn build_semantic_set(per_class: &BTreeMap<String, Vec<Vec<f64>>>) -> Result<ClassSemanticSet> {
    let embedding_dim = per_class
        .values()
        .find_map(|list| list.first().map(Vec::len))
        .ok_or_else(|| Error::Data("no embeddings supplied".into()))?;
    let mut vectors = BTreeMap::new();
    let mut provenance = BTreeMap::new();
    for (class, list) in per_class {
        if list.is_empty() {
            return Err(Error::Data(format!("class `{class}` has no embeddings")));
        }
        let mut mean = vec![0.0; embedding_dim];
        for (i, e) in list.iter().enumerate() {
            if e.len() != embedding_dim {
                return Err(Error::dims(
                    format!("embedding {i} of class `{class}`"),
                    format!("length {embedding_dim}"),
                    format!("length {}", e.len()),
                ));
            }
            for (m, x) in mean.iter_mut().zip(e) {
                *m += x;
            }
        }
        let count = list.len() as f64;
        mean.iter_mut().for_each(|m| *m /= count);
        vectors.insert(class.clone(), mean);
        provenance.insert(class.clone(), list.len());
    }
    ClassSemanticSet::new(embedding_dim, vectors, provenance)
}

fn as_vector(value: &Value) -> Option<Vec<f64>> {
    value.as_array()?.iter().map(Value::as_f64).collect()
}

pub fn parse_semantics(text: &str, path: &Path) -> Result<ClassSemanticSet> {
    let root: Map<String, Value> =
        serde_json::from_str(text).map_err(|e| Error::file(path, format!("invalid JSON: {e}")))?;
    let embedding_dim = root
        .get(EMBEDDING_DIM_KEY)
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::file(path, "missing or non-integer `embedding_dim`"))? as usize;

    let mut per_class: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (class, value) in &root {
        if class == EMBEDDING_DIM_KEY || class == METADATA_KEY {
            continue;
        }
        let list = if let Some(v) = as_vector(value) {
            vec![v]
        } else if let Some(items) = value.as_array() {
            items
                .iter()
                .map(as_vector)
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::file(path, format!("class `{class}`: expected numbers")))?
        } else {
            return Err(Error::file(path, format!("class `{class}`: expected an array")));
        };
        if list.is_empty() {
            return Err(Error::file(path, format!("class `{class}` has no embeddings")));
        }
        for v in &list {
            if v.len() != embedding_dim {
                return Err(Error::file(
                    path,
                    format!(
                        "dimension mismatch for class `{class}`: embedding_dim {embedding_dim}, vector length {}",
                        v.len()
                    ),
                ));
            }
        }
        per_class.insert(class.clone(), list);
    }
    if per_class.is_empty() {
        return Err(Error::file(path, "no class vectors"));
    }
    build_semantic_set(&per_class).map_err(|e| Error::file(path, e.to_string()))
}

/// Serialises per-video embeddings (sorted keys, so output is deterministic).
pub fn format_semantics(embedding_dim: usize, per_class: &BTreeMap<String, Vec<Vec<f64>>>) -> String {
    let mut root = Map::new();
    root.insert(EMBEDDING_DIM_KEY.into(), Value::from(embedding_dim));
    for (class, list) in per_class {
        root.insert(class.clone(), serde_json::to_value(list).expect("finite vectors"));
    }
    serde_json::to_string_pretty(&Value::Object(root)).expect("serialisable") + "\n"
}

pub fn read_semantics(path: &Path) -> Result<ClassSemanticSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_semantics(&text, path)
}
