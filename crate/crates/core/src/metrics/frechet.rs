//! Discrete Fréchet distance between skeleton sequences.

use crate::data::SkeletonSequence;
use crate::error::{Error, Result};

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Coupling DP `F(i,j) = max(‖p_i − q_j‖, min(F(i−1,j), F(i,j−1), F(i−1,j−1)))`
/// over flattened frames.
pub fn dfd(p: &SkeletonSequence, q: &SkeletonSequence) -> Result<f64> {
    if p.frames() == 0 || q.frames() == 0 {
        return Err(Error::Data("Fréchet distance needs two nonempty sequences".into()));
    }
    if p.frame_width() != q.frame_width() {
        return Err(Error::dims(
            "Fréchet frames",
            format!("width {}", p.frame_width()),
            format!("width {}", q.frame_width()),
        ));
    }
    let m = q.frames();
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![f64::INFINITY; m];
    for i in 0..p.frames() {
        let a = p.frame(i);
        for j in 0..m {
            let link = euclidean(a, q.frame(j));
            let reach = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j].min(cur[j - 1]).min(prev[j - 1]),
            };
            cur[j] = link.max(reach);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}
