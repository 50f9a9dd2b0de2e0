//! Skeleton movement sequences: `T` frames of `J` joints with `K` coordinates.
//!
//! On disk a sequence is a header-less CSV with `T` rows of `J·K` values
//! (joint-major: `j0x, j0y, j1x, j1y, ...`), named `<class>__<idx>.csv`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::nn::Tensor2;

pub const DEFAULT_JOINTS: usize = 12;
pub const DEFAULT_DIMS: usize = 2;
pub const RAW_KEYPOINTS: usize = 25;

/// Normalised coordinates may overshoot `[-1, 1]` by this margin.
pub const COORD_LIMIT: f64 = 1.5;

/// Limb-defining joints in a 25-point body layout, in the order
/// left/right shoulder, elbow, wrist, hip, knee, ankle.
pub const DEFAULT_KEYPOINTS: [usize; DEFAULT_JOINTS] = [5, 2, 6, 3, 7, 4, 12, 9, 13, 10, 14, 11];

/// Stick-figure edges over the default 12 joints (a tree: 11 edges).
pub const BONES: [(usize, usize); 11] = [
    (0, 1),
    (0, 2),
    (2, 4),
    (1, 3),
    (3, 5),
    (0, 6),
    (1, 7),
    (6, 8),
    (8, 10),
    (7, 9),
    (9, 11),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    joints: usize,
    dims: usize,
    /// `T × (J·K)`
    coords: Tensor2,
    pub class: String,
}

impl SkeletonSequence {
    pub fn new(coords: Tensor2, joints: usize, dims: usize, class: impl Into<String>) -> Result<Self> {
        let s = Self {
            joints,
            dims,
            coords,
            class: class.into(),
        };
        s.validate()?;
        Ok(s)
    }

    /// Builds a sequence without the range/length invariants; used for raw
    /// network outputs before validation and for metric inputs.
    pub fn unchecked(coords: Tensor2, joints: usize, dims: usize, class: impl Into<String>) -> Self {
        Self {
            joints,
            dims,
            coords,
            class: class.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = || format!("skeleton sequence of class `{}`", self.class);
        if self.joints == 0 || self.dims == 0 || self.coords.cols() != self.joints * self.dims {
            return Err(Error::dims(
                ctx(),
                format!("{} joints × {} dims", self.joints, self.dims),
                format!("{} columns", self.coords.cols()),
            ));
        }
        if self.frames() < 2 {
            return Err(Error::Data(format!("{} has {} frames, need ≥ 2", ctx(), self.frames())));
        }
        if let Some(v) = self
            .coords
            .data()
            .iter()
            .find(|v| !v.is_finite() || v.abs() > COORD_LIMIT)
        {
            return Err(Error::Data(format!("{} has out-of-range coordinate {v}", ctx())));
        }
        Ok(())
    }

    pub fn frames(&self) -> usize {
        self.coords.rows()
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Flattened frame width `J·K`.
    pub fn frame_width(&self) -> usize {
        self.joints * self.dims
    }

    pub fn coords(&self) -> &Tensor2 {
        &self.coords
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        self.coords.row(t)
    }

    pub fn point(&self, t: usize, joint: usize) -> &[f64] {
        &self.coords.row(t)[joint * self.dims..(joint + 1) * self.dims]
    }

    pub fn into_coords(self) -> Tensor2 {
        self.coords
    }
}

/// Linear interpolation of every coordinate onto `target_frames` evenly
/// spaced points of the normalised time axis. Endpoints are kept exactly.
pub fn resample_skeleton(seq: &SkeletonSequence, target_frames: usize) -> Result<SkeletonSequence> {
    if target_frames < 2 || seq.frames() < 2 {
        return Err(Error::Config(format!(
            "resampling needs ≥ 2 frames on both sides (have {}, want {target_frames})",
            seq.frames()
        )));
    }
    if target_frames == seq.frames() {
        return Ok(seq.clone());
    }
    let src = seq.frames();
    let width = seq.frame_width();
    let mut out = Tensor2::zeros(target_frames, width);
    for t in 0..target_frames {
        if t == target_frames - 1 {
            out.row_mut(t).copy_from_slice(seq.frame(src - 1));
            continue;
        }
        let pos = t as f64 * (src - 1) as f64 / (target_frames - 1) as f64;
        let lo = (pos.floor() as usize).min(src - 1);
        let hi = (lo + 1).min(src - 1);
        let w = pos - lo as f64;
        let (a, b) = (seq.frame(lo), seq.frame(hi));
        for (o, (x, y)) in out.row_mut(t).iter_mut().zip(a.iter().zip(b)) {
            *o = if w == 0.0 { *x } else { (1.0 - w) * x + w * y };
        }
    }
    Ok(SkeletonSequence::unchecked(out, seq.joints, seq.dims, seq.class.clone()))
}

/// Projects raw frames (each `RAW_KEYPOINTS × dims`, flattened keypoint-major)
/// onto the configured joint indices, preserving their order.
pub fn select_keypoints(
    raw: &[Vec<f64>],
    dims: usize,
    indices: &[usize],
    class: &str,
) -> Result<SkeletonSequence> {
    check_keypoint_indices(indices)?;
    let mut rows = Vec::with_capacity(raw.len());
    for (t, frame) in raw.iter().enumerate() {
        if frame.len() != RAW_KEYPOINTS * dims {
            return Err(Error::dims(
                format!("raw frame {t}"),
                format!("{RAW_KEYPOINTS} keypoints × {dims} dims"),
                format!("{} values", frame.len()),
            ));
        }
        let mut row = Vec::with_capacity(indices.len() * dims);
        for &k in indices {
            row.extend_from_slice(&frame[k * dims..(k + 1) * dims]);
        }
        rows.push(row);
    }
    let coords = Tensor2::from_rows(&rows)?;
    let coords = if rows.is_empty() {
        Tensor2::zeros(0, indices.len() * dims)
    } else {
        coords
    };
    SkeletonSequence::new(coords, indices.len(), dims, class)
}

pub fn check_keypoint_indices(indices: &[usize]) -> Result<()> {
    if indices.len() != DEFAULT_JOINTS {
        return Err(Error::Config(format!(
            "expected {DEFAULT_JOINTS} keypoint indices, got {}",
            indices.len()
        )));
    }
    let mut seen = [false; RAW_KEYPOINTS];
    for &k in indices {
        if k >= RAW_KEYPOINTS {
            return Err(Error::Config(format!("keypoint index {k} outside [0, {RAW_KEYPOINTS})")));
        }
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::Config(format!("duplicate keypoint index {k}")));
        }
    }
    Ok(())
}

pub fn format_skeleton_csv(seq: &SkeletonSequence) -> String {
    let mut out = String::new();
    for t in 0..seq.frames() {
        let row: Vec<String> = seq.frame(t).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn parse_skeleton_csv(
    text: &str,
    joints: usize,
    dims: usize,
    class: &str,
    path: &Path,
) -> Result<SkeletonSequence> {
    let mut data = Vec::new();
    let mut frames = 0;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for v in line.split(',') {
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::file(path, format!("line {}: bad value `{v}`", lineno + 1)))?;
            data.push(v);
        }
        if data.len() - before != joints * dims {
            return Err(Error::file(
                path,
                format!(
                    "line {}: dimension mismatch, expected {} values ({joints} joints × {dims} dims), got {}",
                    lineno + 1,
                    joints * dims,
                    data.len() - before
                ),
            ));
        }
        frames += 1;
    }
    let coords = Tensor2::from_vec(frames, joints * dims, data)?;
    SkeletonSequence::new(coords, joints, dims, class).map_err(|e| Error::file(path, e.to_string()))
}

pub fn read_skeleton_csv(path: &Path, joints: usize, dims: usize, class: &str) -> Result<SkeletonSequence> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_skeleton_csv(&text, joints, dims, class, path)
}

pub fn write_skeleton_csv(path: &Path, seq: &SkeletonSequence) -> Result<()> {
    std::fs::write(path, format_skeleton_csv(seq)).map_err(|e| Error::io(path, e))
}

/// Splits `<class>__<idx>.csv` into its class name and index.
pub fn parse_skeleton_filename(name: &str) -> Option<(String, usize)> {
    let stem = name.strip_suffix(".csv")?;
    let (class, idx) = stem.rsplit_once("__")?;
    if class.is_empty() {
        return None;
    }
    Some((class.to_string(), idx.parse().ok()?))
}

pub fn skeleton_filename(class: &str, idx: usize) -> String {
    format!("{class}__{idx:02}.csv")
}

/// A skeleton file on disk together with its parsed identity.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonEntry {
    pub index: usize,
    pub path: PathBuf,
    pub sequence: SkeletonSequence,
}

/// Reads every `<class>__<idx>.csv` under `dir`, ordered by class then index.
pub fn read_skeleton_dir(dir: &Path, joints: usize, dims: usize) -> Result<Vec<SkeletonEntry>> {
    let listing = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in listing {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if !name.ends_with(".csv") {
            continue;
        }
        let (class, index) = parse_skeleton_filename(&name)
            .ok_or_else(|| Error::file(entry.path(), "expected file name `<class>__<idx>.csv`"))?;
        found.push((class, index, entry.path()));
    }
    found.sort();
    found
        .into_iter()
        .map(|(class, index, path)| {
            let sequence = read_skeleton_csv(&path, joints, dims, &class)?;
            Ok(SkeletonEntry { index, path, sequence })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(rows: &[Vec<f64>], joints: usize, dims: usize) -> SkeletonSequence {
        SkeletonSequence::new(Tensor2::from_rows(rows).unwrap(), joints, dims, "c").unwrap()
    }

    #[test]
    fn resample_identity_and_midpoint() {
        let s = seq(&[vec![0.0, 1.0], vec![0.5, -1.0]], 1, 2);
        assert_eq!(resample_skeleton(&s, 2).unwrap(), s);
        let r = resample_skeleton(&s, 3).unwrap();
        assert_eq!(r.frame(0), s.frame(0));
        assert_eq!(r.frame(1), &[0.25, 0.0]);
        assert_eq!(r.frame(2), s.frame(1));
    }

    #[test]
    fn downsampled_sine_tracks_analytic_curve() {
        let src = 100;
        let rows: Vec<Vec<f64>> = (0..src)
            .map(|t| {
                let u = t as f64 / (src - 1) as f64;
                vec![(2.0 * std::f64::consts::PI * u).sin()]
            })
            .collect();
        let s = seq(&rows, 1, 1);
        let r = resample_skeleton(&s, 50).unwrap();
        for t in 0..50 {
            let u = t as f64 / 49.0;
            let exact = (2.0 * std::f64::consts::PI * u).sin();
            assert!((r.frame(t)[0] - exact).abs() < 0.01);
        }
        assert_eq!(r.frame(49), s.frame(99));
    }

    #[test]
    fn keypoint_selection() {
        let frame: Vec<f64> = (0..RAW_KEYPOINTS * 2).map(|v| v as f64 / 100.0).collect();
        let raw = vec![frame.clone(), frame.clone()];
        let first: Vec<usize> = (0..12).collect();
        let s = select_keypoints(&raw, 2, &first, "x").unwrap();
        assert_eq!(s.frame(0), &frame[..24]);

        let s = select_keypoints(&raw, 2, &DEFAULT_KEYPOINTS, "x").unwrap();
        let manual: Vec<f64> = DEFAULT_KEYPOINTS
            .iter()
            .flat_map(|&k| [frame[2 * k], frame[2 * k + 1]])
            .collect();
        assert_eq!(s.frame(1), manual.as_slice());

        let mut dup = first.clone();
        dup[3] = 0;
        assert!(matches!(select_keypoints(&raw, 2, &dup, "x"), Err(Error::Config(_))));
        let mut out_of_range = first;
        out_of_range[0] = 25;
        assert!(select_keypoints(&raw, 2, &out_of_range, "x").is_err());
    }

    #[test]
    fn invariants_enforced() {
        assert!(SkeletonSequence::new(Tensor2::zeros(1, 2), 1, 2, "c").is_err());
        assert!(SkeletonSequence::new(Tensor2::filled(2, 2, 1.6), 1, 2, "c").is_err());
        assert!(SkeletonSequence::new(Tensor2::zeros(2, 3), 1, 2, "c").is_err());
    }

    #[test]
    fn csv_roundtrip_and_names() {
        let s = seq(&[vec![0.1, -0.2], vec![1.0 / 3.0, 0.0]], 1, 2);
        let back = parse_skeleton_csv(&format_skeleton_csv(&s), 1, 2, "c", Path::new("c__0.csv")).unwrap();
        assert_eq!(back, s);
        assert_eq!(parse_skeleton_filename("nordic__walk__07.csv"), Some(("nordic__walk".into(), 7)));
        assert_eq!(parse_skeleton_filename("walk.csv"), None);
        assert_eq!(skeleton_filename("walk", 3), "walk__03.csv");
    }
}
