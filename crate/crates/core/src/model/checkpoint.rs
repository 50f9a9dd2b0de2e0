//! Versioned JSON checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::infer::Model;
use crate::error::{Error, Result};
use crate::nn::Parameters;

pub const CHECKPOINT_FORMAT: &str = "zshar-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize)]
struct Header<'a> {
    format: &'a str,
    version: u32,
    model: &'a Model,
}

#[derive(Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    model: serde_json::Value,
}

pub fn checkpoint_json(model: &Model) -> String {
    let header = Header {
        format: CHECKPOINT_FORMAT,
        version: CHECKPOINT_VERSION,
        model,
    };
    serde_json::to_string(&header).expect("serialisable") + "\n"
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_json(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |message: String| Error::CorruptCheckpoint {
        path: path.to_path_buf(),
        message,
    };
    let envelope: Envelope = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    if envelope.format != CHECKPOINT_FORMAT {
        return Err(corrupt(format!("unexpected format tag `{}`", envelope.format)));
    }
    if envelope.version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            path: path.to_path_buf(),
            found: envelope.version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let model: Model = serde_json::from_value(envelope.model).map_err(|e| corrupt(e.to_string()))?;
    if !model.params.all_finite() {
        return Err(corrupt("non-finite parameter values".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, Normalizer, TrainConfig};
    use crate::nn::SeededRng;
    use rand::SeedableRng;

    fn model() -> Model {
        let config = TrainConfig {
            hidden: 3,
            decoder_hidden: 4,
            ..Default::default()
        };
        let mut rng = SeededRng::seed_from_u64(11);
        Model {
            params: ModelParams::init(6, 5, &config, &mut rng),
            config,
            seen_classes: vec!["a".into()],
            unseen_classes: vec!["b".into()],
            normalizer: Normalizer {
                mean: vec![0.1; 6],
                std: vec![1.0 / 3.0; 6],
            },
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        let m = model();
        save_checkpoint(&m, &a).unwrap();
        let loaded = load_checkpoint(&a).unwrap();
        assert_eq!(loaded, m);
        save_checkpoint(&loaded, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn truncated_and_mismatched_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let text = checkpoint_json(&model());
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::CorruptCheckpoint { .. })));

        let bumped = text.replacen("\"version\":1", "\"version\":2", 1);
        std::fs::write(&path, bumped).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::CheckpointVersion { found: 2, expected: 1, .. })
        ));
    }
}
