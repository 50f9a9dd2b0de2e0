//! Covariance-weighted (Mahalanobis) frame distance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::SkeletonSequence;
use crate::error::{Error, Result};
use crate::nn::Tensor2;

/// Frame covariance `S` over flattened `J·K` features with its regularised
/// inverse `(S + εI)⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    covariance: Tensor2,
    epsilon: f64,
    inverse: Tensor2,
}

impl CostModel {
    /// Builds the model from a symmetric covariance and a positive ridge.
    pub fn from_covariance(covariance: Tensor2, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("regularisation ε must be positive, got {epsilon}")));
        }
        let (rows, cols) = covariance.shape();
        if rows != cols || rows == 0 {
            return Err(Error::dims("covariance", "square matrix", covariance.shape_str()));
        }
        if !covariance.is_finite() {
            return Err(Error::Data("covariance has non-finite entries".into()));
        }
        for i in 0..rows {
            for j in 0..i {
                if (covariance.get(i, j) - covariance.get(j, i)).abs() > 1e-10 {
                    return Err(Error::Data(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        let mut reg = DMatrix::from_row_slice(rows, cols, covariance.data());
        for i in 0..rows {
            reg[(i, i)] += epsilon;
        }
        let chol = reg.cholesky().ok_or_else(|| {
            Error::Numeric("regularised covariance is not positive definite".into())
        })?;
        let inv = chol.inverse();
        let mut inverse = Tensor2::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                // Symmetrise to remove rounding asymmetry.
                inverse.set(i, j, 0.5 * (inv[(i, j)] + inv[(j, i)]));
            }
        }
        Ok(Self {
            covariance,
            epsilon,
            inverse,
        })
    }

    /// `S = I`, i.e. Euclidean distance up to the ridge.
    pub fn identity(dim: usize, epsilon: f64) -> Result<Self> {
        let mut s = Tensor2::zeros(dim, dim);
        for i in 0..dim {
            s.set(i, i, 1.0);
        }
        Self::from_covariance(s, epsilon)
    }

    pub fn dim(&self) -> usize {
        self.covariance.rows()
    }

    pub fn covariance(&self) -> &Tensor2 {
        &self.covariance
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn inverse(&self) -> &Tensor2 {
        &self.inverse
    }
}

/// Sample covariance (divisor `N − 1`, or `N` for a single frame) of all
/// frames of all `references`, regularised by `epsilon`.
pub fn estimate_cost_model(references: &[&SkeletonSequence], epsilon: f64) -> Result<CostModel> {
    let covariance = frame_covariance(references)?;
    CostModel::from_covariance(covariance, epsilon)
}

/// Like [`estimate_cost_model`] with `ε = 1e-6 · trace(S) / dim`, falling
/// back to `1e-6` for a zero trace.
pub fn estimate_cost_model_default(references: &[&SkeletonSequence]) -> Result<CostModel> {
    let covariance = frame_covariance(references)?;
    let dim = covariance.rows();
    let trace: f64 = (0..dim).map(|i| covariance.get(i, i)).sum();
    let epsilon = if trace > 0.0 { 1e-6 * trace / dim as f64 } else { 1e-6 };
    CostModel::from_covariance(covariance, epsilon)
}

fn frame_covariance(references: &[&SkeletonSequence]) -> Result<Tensor2> {
    let first = references
        .first()
        .ok_or_else(|| Error::Data("no reference skeletons to estimate covariance".into()))?;
    let dim = first.frame_width();
    // Shifting by the first frame keeps repeated frames at exactly zero.
    let shift = if first.frames() > 0 { first.frame(0).to_vec() } else { vec![0.0; dim] };
    let mut sum = vec![0.0; dim];
    let mut cov = Tensor2::zeros(dim, dim);
    let mut centred = vec![0.0; dim];
    let mut count = 0usize;
    for r in references {
        if r.frame_width() != dim {
            return Err(Error::dims("reference frames", format!("width {dim}"), format!("width {}", r.frame_width())));
        }
        if !r.coords().is_finite() {
            return Err(Error::Data(format!("reference of class `{}` has non-finite values", r.class)));
        }
        for t in 0..r.frames() {
            centred.iter_mut().zip(r.frame(t).iter().zip(&shift)).for_each(|(c, (v, k))| *c = v - k);
            sum.iter_mut().zip(&centred).for_each(|(s, c)| *s += c);
            for i in 0..dim {
                let ci = centred[i];
                let row = cov.row_mut(i);
                for j in 0..dim {
                    row[j] += ci * centred[j];
                }
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Data("reference skeletons contain no frames".into()));
    }
    let n = count as f64;
    for i in 0..dim {
        for j in 0..dim {
            cov.set(i, j, cov.get(i, j) - sum[i] * sum[j] / n);
        }
    }
    let divisor = if count > 1 { (count - 1) as f64 } else { 1.0 };
    cov.scale_in_place(1.0 / divisor);
    Ok(cov)
}

/// `√((a − b)ᵀ (S + εI)⁻¹ (a − b))`.
pub fn mahalanobis_cost(a: &[f64], b: &[f64], model: &CostModel) -> Result<f64> {
    let dim = model.dim();
    if a.len() != dim || b.len() != dim {
        return Err(Error::dims(
            "mahalanobis cost",
            format!("frames of length {} and {}", a.len(), b.len()),
            format!("model dimension {dim}"),
        ));
    }
    Ok(mahalanobis_unchecked(a, b, model))
}

pub(crate) fn mahalanobis_unchecked(a: &[f64], b: &[f64], model: &CostModel) -> f64 {
    let dim = model.dim();
    let mut diff = [0.0f64; 64];
    let mut heap;
    let diff: &mut [f64] = if dim <= diff.len() {
        &mut diff[..dim]
    } else {
        heap = vec![0.0; dim];
        &mut heap
    };
    diff.iter_mut().zip(a.iter().zip(b)).for_each(|(d, (x, y))| *d = x - y);
    let mut total = 0.0;
    for i in 0..dim {
        let row = model.inverse.row(i);
        let s: f64 = row.iter().zip(diff.iter()).map(|(w, d)| w * d).sum();
        total += diff[i] * s;
    }
    total.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    #[test]
    fn closed_form_cases() {
        let model = CostModel::identity(2, 1e-12).unwrap();
        assert_eq!(mahalanobis_cost(&[0.3, 0.4], &[0.3, 0.4], &model).unwrap(), 0.0);
        assert!((mahalanobis_cost(&[1.0, 0.0], &[0.0, 0.0], &model).unwrap() - 1.0).abs() < 1e-10);

        let s = Tensor2::from_rows(&[vec![4.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let model = CostModel::from_covariance(s, 1e-14).unwrap();
        assert!((mahalanobis_cost(&[2.0, 0.0], &[0.0, 0.0], &model).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_epsilon_and_lengths() {
        assert!(matches!(CostModel::identity(2, 0.0), Err(Error::Config(_))));
        let model = CostModel::identity(2, 1e-6).unwrap();
        assert!(mahalanobis_cost(&[1.0], &[0.0, 0.0], &model).is_err());
    }

    #[test]
    fn degenerate_references_fall_back_to_ridge() {
        let frame = Tensor2::from_rows(&[vec![0.2, -0.1], vec![0.2, -0.1], vec![0.2, -0.1]]).unwrap();
        let seq = SkeletonSequence::new(frame, 1, 2, "c").unwrap();
        let model = estimate_cost_model(&[&seq], 0.5).unwrap();
        assert!(model.covariance().data().iter().all(|&v| v == 0.0));
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 2.0 } else { 0.0 };
                assert!((model.inverse().get(i, j) - expected).abs() < 1e-12);
            }
        }
        assert!(matches!(estimate_cost_model(&[&seq], 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn identity_covariance_is_recovered() {
        let mut rng = crate::nn::SeededRng::seed_from_u64(17);
        let rows: Vec<Vec<f64>> = (0..10_000)
            .map(|_| (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        // Metric inputs need not respect the normalised coordinate range.
        let seq = SkeletonSequence::unchecked(Tensor2::from_rows(&rows).unwrap(), 3, 1, "c");
        let model = estimate_cost_model(&[&seq], 1e-9).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((model.covariance().get(i, j) - expected).abs() < 0.1);
            }
        }
    }

    #[test]
    fn inverse_times_regularised_is_identity() {
        let s = Tensor2::from_rows(&[
            vec![2.0, 0.3, 0.1],
            vec![0.3, 1.0, -0.2],
            vec![0.1, -0.2, 0.5],
        ])
        .unwrap();
        let eps = 1e-3;
        let model = CostModel::from_covariance(s.clone(), eps).unwrap();
        let mut reg = s;
        for i in 0..3 {
            reg.set(i, i, reg.get(i, i) + eps);
        }
        let prod = model.inverse().matmul(&reg).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - expected).abs() < 1e-8);
            }
        }
    }
}
