//! Fréchet-distance realism summary of generated skeletons.

use serde::{Deserialize, Serialize};

use super::frechet::dfd;
use crate::data::SkeletonSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealismReport {
    pub dfd_mean: f64,
    /// Population standard deviation.
    pub dfd_std: f64,
    pub values: Vec<f64>,
}

impl RealismReport {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data("no skeleton pairs for the realism report".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(Self {
            dfd_mean: mean,
            dfd_std: var.sqrt(),
            values,
        })
    }
}

/// DFD over `(generated, matching reference)` pairs.
pub fn realism_report(pairs: &[(&SkeletonSequence, &SkeletonSequence)]) -> Result<RealismReport> {
    let values = pairs.iter().map(|(g, r)| dfd(g, r)).collect::<Result<Vec<_>>>()?;
    RealismReport::from_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor2;

    #[test]
    fn mean_and_population_std() {
        let r = RealismReport::from_values(vec![1.0, 3.0]).unwrap();
        assert_eq!((r.dfd_mean, r.dfd_std), (2.0, 1.0));
        assert!(RealismReport::from_values(vec![]).is_err());
    }

    #[test]
    fn identical_pairs_are_zero() {
        let s = SkeletonSequence::unchecked(
            Tensor2::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap(),
            1,
            2,
            "a",
        );
        let r = realism_report(&[(&s, &s), (&s, &s)]).unwrap();
        assert_eq!((r.dfd_mean, r.dfd_std), (0.0, 0.0));
    }
}
