use serde::{Deserialize, Serialize};

use crate::data::skeleton::{DEFAULT_DIMS, DEFAULT_JOINTS};
use crate::error::{Error, Result};
use crate::nn::{layers::check_dropout_rate, Pooling};

/// Hyperparameters for training. Every field has a default, so partial JSON
/// objects are valid overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the classification loss.
    pub lambda: f64,
    /// Weight of the reconstruction loss.
    pub alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub stacks: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Decoder output length.
    pub frames: usize,
    pub joints: usize,
    pub dims: usize,
    pub decoder_hidden: usize,
    pub pooling: Pooling,
    /// Length-normalise `f` before scoring (ablation switch; off by default).
    pub normalize_features: bool,
    pub clip_norm: f64,
    pub train_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-2,
            alpha: 0.6,
            learning_rate: 1e-3,
            epochs: 20,
            batch_size: 64,
            hidden: 128,
            stacks: 2,
            dropout: 0.1,
            seed: 1,
            frames: 32,
            joints: DEFAULT_JOINTS,
            dims: DEFAULT_DIMS,
            decoder_hidden: 128,
            pooling: Pooling::LastConcat,
            normalize_features: false,
            clip_norm: 5.0,
            train_fraction: 0.9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be a finite value ≥ 0, got {}", self.lambda));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be a finite value ≥ 0, got {}", self.alpha));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        check_dropout_rate(self.dropout)?;
        for (name, v) in [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("hidden", self.hidden),
            ("stacks", self.stacks),
            ("joints", self.joints),
            ("dims", self.dims),
            ("decoder_hidden", self.decoder_hidden),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.frames < 2 {
            return bad(format!("frames must be at least 2, got {}", self.frames));
        }
        if !(self.clip_norm > 0.0) {
            return bad(format!("clip_norm must be positive, got {}", self.clip_norm));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_partial_overrides() {
        let c: TrainConfig = serde_json::from_str(r#"{"lambda": 0, "alpha": 0}"#).unwrap();
        assert_eq!((c.lambda, c.alpha, c.epochs, c.batch_size), (0.0, 0.0, 20, 64));
        assert_eq!((c.hidden, c.stacks, c.dropout), (128, 2, 0.1));
        c.validate().unwrap();
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lamda": 0}"#).is_err());
    }

    #[test]
    fn rejects_invalid_values() {
        for patch in [
            TrainConfig { lambda: -1.0, ..Default::default() },
            TrainConfig { dropout: 1.0, ..Default::default() },
            TrainConfig { frames: 1, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
        ] {
            assert!(matches!(patch.validate(), Err(Error::Config(_))));
        }
    }
}
