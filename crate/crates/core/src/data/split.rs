//! Seen/unseen class folds stratified by super-class, and the stratified
//! train/validation split of seen samples.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::SeededRng;

/// Class name → super-class name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SuperClassMap(BTreeMap<String, String>);

impl SuperClassMap {
    pub fn new(map: BTreeMap<String, String>) -> Result<Self> {
        if let Some((c, s)) = map.iter().find(|(c, s)| c.is_empty() || s.is_empty()) {
            return Err(Error::Data(format!("empty name in super-class entry `{c}` → `{s}`")));
        }
        Ok(Self(map))
    }

    pub fn super_class(&self, class: &str) -> Option<&str> {
        self.0.get(class).map(String::as_str)
    }

    pub fn require(&self, class: &str) -> Result<&str> {
        self.super_class(class)
            .ok_or_else(|| Error::Data(format!("class `{class}` has no super-class")))
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Super-class → sorted member classes.
    pub fn groups(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (c, s) in &self.0 {
            groups.entry(s.as_str()).or_default().push(c.as_str());
        }
        groups
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.0
    }
}

pub fn read_superclass_map(path: &Path) -> Result<SuperClassMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let map: BTreeMap<String, String> =
        serde_json::from_str(&text).map_err(|e| Error::file(path, format!("invalid JSON: {e}")))?;
    SuperClassMap::new(map).map_err(|e| Error::file(path, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub index: usize,
    pub seen: BTreeSet<String>,
    pub unseen: BTreeSet<String>,
}

impl FoldSpec {
    /// Checks disjointness, coverage of `classes`, and that every super-class
    /// appears on both sides.
    pub fn check(&self, classes: &BTreeSet<String>, map: &SuperClassMap) -> Result<()> {
        if let Some(c) = self.seen.intersection(&self.unseen).next() {
            return Err(Error::Split(format!("fold {}: `{c}` is both seen and unseen", self.index)));
        }
        let union: BTreeSet<String> = self.seen.union(&self.unseen).cloned().collect();
        if &union != classes {
            return Err(Error::Split(format!("fold {}: seen ∪ unseen does not cover all classes", self.index)));
        }
        for (group, members) in map.groups() {
            for (side, set) in [("seen", &self.seen), ("unseen", &self.unseen)] {
                if !members.iter().any(|m| set.contains(*m)) {
                    return Err(Error::Split(format!(
                        "fold {}: super-class `{group}` missing from {side} set",
                        self.index
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Persisted fold assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldsFile {
    pub seed: u64,
    pub unseen_per_fold: usize,
    pub folds: Vec<FoldSpec>,
}

impl FoldsFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::file(path, format!("invalid folds file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable") + "\n"
    }

    pub fn fold(&self, index: usize) -> Result<&FoldSpec> {
        self.folds.get(index).ok_or_else(|| {
            Error::Config(format!("fold {index} out of range (have {})", self.folds.len()))
        })
    }
}

/// Seeded k-fold partition of classes into seen/unseen sets.
///
/// Each fold draws at least one unseen class from every super-class and
/// leaves at least one seen class in every super-class. Within a super-class
/// the unseen picks walk a seeded permutation, so consecutive folds rotate
/// through its members.
pub fn kfold_split(
    classes: &[String],
    map: &SuperClassMap,
    folds: usize,
    unseen_per_fold: usize,
    seed: u64,
) -> Result<Vec<FoldSpec>> {
    if folds == 0 {
        return Err(Error::Config("need at least one fold".into()));
    }
    let class_set: BTreeSet<String> = classes.iter().cloned().collect();
    if class_set.len() != classes.len() {
        return Err(Error::Data("duplicate class names".into()));
    }
    for c in &class_set {
        map.require(c)?;
    }
    let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for c in &class_set {
        groups.entry(map.require(c)?).or_default().push(c.as_str());
    }
    if let Some((g, _)) = groups.iter().find(|(_, m)| m.len() < 2) {
        return Err(Error::Split(format!(
            "super-class `{g}` has a single class; it cannot appear in both seen and unseen sets"
        )));
    }
    let n_groups = groups.len();
    let max_unseen = class_set.len() - n_groups;
    if unseen_per_fold < n_groups || unseen_per_fold > max_unseen {
        return Err(Error::Split(format!(
            "{unseen_per_fold} unseen classes per fold cannot cover {n_groups} super-classes \
             on both sides (feasible range {n_groups}..={max_unseen})"
        )));
    }

    let mut rng = SeededRng::seed_from_u64(seed);
    let mut perms: Vec<Vec<&str>> = groups.values().cloned().collect();
    for p in &mut perms {
        p.shuffle(&mut rng);
    }
    let mut group_order: Vec<usize> = (0..n_groups).collect();
    group_order.shuffle(&mut rng);

    let mut cursors = vec![0usize; n_groups];
    let mut out = Vec::with_capacity(folds);
    for f in 0..folds {
        let mut quota = vec![1usize; n_groups];
        let mut extras = unseen_per_fold - n_groups;
        let mut k = f;
        while extras > 0 {
            let g = group_order[k % n_groups];
            if quota[g] < perms[g].len() - 1 {
                quota[g] += 1;
                extras -= 1;
            }
            k += 1;
        }
        let mut unseen = BTreeSet::new();
        for (g, perm) in perms.iter().enumerate() {
            for i in 0..quota[g] {
                unseen.insert(perm[(cursors[g] + i) % perm.len()].to_string());
            }
            cursors[g] += quota[g];
        }
        let seen = class_set.difference(&unseen).cloned().collect();
        let fold = FoldSpec { index: f, seen, unseen };
        fold.check(&class_set, map)?;
        out.push(fold);
    }
    Ok(out)
}

/// Stratified split of sample indices into `(train, validation)`.
///
/// The validation total is `⌊N·(1 − fraction)⌋` (at least one), shared out
/// per class by largest remainder with seeded tie-breaking; a class never
/// gives up its last training sample.
pub fn train_val_split(
    labels: &[&str],
    classes: &[&str],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "training fraction {fraction} must lie in (0, 1); a validation set is required"
        )));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = classes.iter().map(|&c| (c, Vec::new())).collect();
    for (i, l) in labels.iter().enumerate() {
        by_class
            .get_mut(l)
            .ok_or_else(|| Error::Data(format!("sample {i} has unexpected class `{l}`")))?
            .push(i);
    }
    if let Some((c, _)) = by_class.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::Data(format!("class `{c}` has no samples")));
    }

    let val_fraction = 1.0 - fraction;
    let total = labels.len();
    let target = (((total as f64) * val_fraction + 1e-9).floor() as usize).max(1);

    let mut rng = SeededRng::seed_from_u64(seed);
    let mut order: Vec<&str> = by_class.keys().copied().collect();
    order.shuffle(&mut rng);

    let cap = |n: usize| n.saturating_sub(1);
    let mut val_counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut remainders = Vec::new();
    for (rank, &c) in order.iter().enumerate() {
        let n = by_class[c].len();
        let ideal = n as f64 * val_fraction + 1e-9;
        let base = (ideal.floor() as usize).min(cap(n));
        val_counts.insert(c, base);
        remainders.push((ideal - ideal.floor(), rank, c));
    }
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut assigned: usize = val_counts.values().sum();
    for &(_, _, c) in remainders.iter().cycle().take(remainders.len() * 2) {
        if assigned >= target {
            break;
        }
        let n = by_class[c].len();
        let v = val_counts.get_mut(c).expect("known class");
        if *v < cap(n) {
            *v += 1;
            assigned += 1;
        }
    }

    let mut train = Vec::new();
    let mut val = Vec::new();
    for c in order {
        let mut idx = by_class[c].clone();
        idx.shuffle(&mut rng);
        let k = val_counts[c];
        val.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}
