//! Dynamic time warping with a covariance-weighted frame cost, and the
//! nearest-reference search built on it.

use super::cost::{mahalanobis_unchecked, CostModel};
use crate::data::SkeletonSequence;
use crate::error::{Error, Result};

fn check_pair(x: &SkeletonSequence, y: &SkeletonSequence, model: &CostModel) -> Result<()> {
    if x.frames() == 0 || y.frames() == 0 {
        return Err(Error::Data("DTW needs two nonempty sequences".into()));
    }
    if x.frame_width() != y.frame_width() || x.frame_width() != model.dim() {
        return Err(Error::dims(
            "DTW frames",
            format!("widths {} and {}", x.frame_width(), y.frame_width()),
            format!("cost model dimension {}", model.dim()),
        ));
    }
    Ok(())
}

/// Cumulative DTW cost at `(n, m)` with `D(0,0) = 0` and infinite borders.
pub fn dtw_distance(x: &SkeletonSequence, y: &SkeletonSequence, model: &CostModel) -> Result<f64> {
    check_pair(x, y, model)?;
    // Keep the shorter sequence along the row to bound memory by min(n, m).
    let (outer, inner) = if x.frames() >= y.frames() { (x, y) } else { (y, x) };
    let m = inner.frames();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=outer.frames() {
        cur[0] = f64::INFINITY;
        let a = outer.frame(i - 1);
        for j in 1..=m {
            let c = mahalanobis_unchecked(a, inner.frame(j - 1), model);
            let best = prev[j].min(cur[j - 1]).min(prev[j - 1]);
            cur[j] = c + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Index and distance of the reference with minimum DTW distance. Ties go to
/// the lexicographically smaller class, then the earlier reference.
pub fn nearest_reference<S: AsRef<str>>(
    generated: &SkeletonSequence,
    references: &[(S, &SkeletonSequence)],
    model: &CostModel,
) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (class, seq)) in references.iter().enumerate() {
        let d = dtw_distance(generated, seq, model)?;
        let better = match best {
            None => true,
            Some((bi, bd)) => d < bd || (d == bd && class.as_ref() < references[bi].0.as_ref()),
        };
        if better {
            best = Some((i, d));
        }
    }
    best.ok_or_else(|| Error::Data("no reference skeletons to match against".into()))
}

/// Class and distance of the nearest reference (see [`nearest_reference`]).
pub fn matching_seen_class<'a, S: AsRef<str>>(
    generated: &SkeletonSequence,
    references: &'a [(S, &SkeletonSequence)],
    model: &CostModel,
) -> Result<(&'a str, f64)> {
    let (i, d) = nearest_reference(generated, references, model)?;
    Ok((references[i].0.as_ref(), d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{SeededRng, Tensor2};
    use rand::{Rng, SeedableRng};

    fn seq1d(values: &[f64], class: &str) -> SkeletonSequence {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        SkeletonSequence::unchecked(Tensor2::from_rows(&rows).unwrap(), 1, 1, class)
    }

    fn random_seq(rng: &mut SeededRng, frames: usize, joints: usize, dims: usize) -> SkeletonSequence {
        let rows: Vec<Vec<f64>> = (0..frames)
            .map(|_| (0..joints * dims).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        SkeletonSequence::unchecked(Tensor2::from_rows(&rows).unwrap(), joints, dims, "r")
    }

    /// Minimum total cost over every monotone path from (0,0) to (n-1,m-1).
    fn brute_force(x: &SkeletonSequence, y: &SkeletonSequence, model: &CostModel) -> f64 {
        fn walk(i: usize, j: usize, acc: f64, x: &SkeletonSequence, y: &SkeletonSequence, model: &CostModel) -> f64 {
            let acc = acc + mahalanobis_cost_ref(x.frame(i), y.frame(j), model);
            if i + 1 == x.frames() && j + 1 == y.frames() {
                return acc;
            }
            let mut best = f64::INFINITY;
            if i + 1 < x.frames() {
                best = best.min(walk(i + 1, j, acc, x, y, model));
            }
            if j + 1 < y.frames() {
                best = best.min(walk(i, j + 1, acc, x, y, model));
            }
            if i + 1 < x.frames() && j + 1 < y.frames() {
                best = best.min(walk(i + 1, j + 1, acc, x, y, model));
            }
            best
        }
        walk(0, 0, 0.0, x, y, model)
    }

    fn mahalanobis_cost_ref(a: &[f64], b: &[f64], model: &CostModel) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let inv = model.inverse();
        let mut q = 0.0;
        for i in 0..d.len() {
            for j in 0..d.len() {
                q += d[i] * inv.get(i, j) * d[j];
            }
        }
        q.max(0.0).sqrt()
    }

    #[test]
    fn worked_one_dimensional_example() {
        let model = CostModel::identity(1, 1e-15).unwrap();
        let d = dtw_distance(&seq1d(&[0.0, 1.0, 2.0], "a"), &seq1d(&[0.0, 2.0], "b"), &model).unwrap();
        assert!((d - 1.0).abs() < 1e-9, "{d}");
    }

    #[test]
    fn identical_sequences_cost_zero() {
        let mut rng = SeededRng::seed_from_u64(2);
        let x = random_seq(&mut rng, 7, 2, 2);
        let model = CostModel::identity(4, 1e-6).unwrap();
        assert_eq!(dtw_distance(&x, &x, &model).unwrap(), 0.0);
    }

    #[test]
    fn matches_path_enumeration_and_is_symmetric() {
        let mut rng = SeededRng::seed_from_u64(9);
        for _ in 0..60 {
            let (joints, dims) = [(1, 1), (2, 1), (1, 2), (2, 2)][rng.random_range(0..4)];
            let nx = rng.random_range(1..=6);
            let x = random_seq(&mut rng, nx, joints, dims);
            let ny = rng.random_range(1..=6);
            let y = random_seq(&mut rng, ny, joints, dims);
            let refs = [&x, &y];
            let model = crate::metrics::estimate_cost_model(&refs, 0.1).unwrap();
            let fast = dtw_distance(&x, &y, &model).unwrap();
            assert!((fast - brute_force(&x, &y, &model)).abs() < 1e-9);
            assert!((fast - dtw_distance(&y, &x, &model).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        let model = CostModel::identity(1, 1e-6).unwrap();
        let empty = SkeletonSequence::unchecked(Tensor2::zeros(0, 1), 1, 1, "e");
        assert!(dtw_distance(&empty, &seq1d(&[1.0], "a"), &model).is_err());
        let wide = SkeletonSequence::unchecked(Tensor2::zeros(2, 2), 1, 2, "w");
        assert!(dtw_distance(&wide, &seq1d(&[1.0, 2.0], "a"), &model).is_err());
    }

    #[test]
    fn matching_picks_nearest_then_smallest_class() {
        let model = CostModel::identity(1, 1e-15).unwrap();
        let g = seq1d(&[0.0, 0.0], "g");
        let near = seq1d(&[0.5, 0.5], "x");
        let far = seq1d(&[1.0, 1.0], "x");
        let refs = [("far", &far), ("near", &near)];
        let (class, d) = matching_seen_class(&g, &refs, &model).unwrap();
        assert_eq!(class, "near");
        assert!((d - 1.0).abs() < 1e-9);

        let refs = [("zeta", &g), ("alpha", &g), ("mid", &near)];
        assert_eq!(matching_seen_class(&g, &refs, &model).unwrap(), ("alpha", 0.0));

        let none: [(&str, &SkeletonSequence); 0] = [];
        assert!(matching_seen_class(&g, &none, &model).is_err());
    }
}
