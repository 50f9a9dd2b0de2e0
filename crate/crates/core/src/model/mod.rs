//! The zero-shot network: IMU encoder, matching unit, skeleton decoder,
//! training loop, inference and explanations.

mod checkpoint;
mod config;
mod evaluate;
mod infer;
mod matching;
mod network;
mod params;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::TrainConfig;
pub use evaluate::{evaluate, seen_references};
pub use infer::{decode_skeleton, encode_imu, explain, predict_unseen, Explanation, Model, Prediction};
pub use network::{batch_objective, LossParts};
pub use matching::{
    class_probabilities, classification_loss, matching_loss, reconstruction_loss, similarity_scores, total_loss,
};
pub use params::{DecoderParams, ModelParams, Normalizer};
pub use train::{train, EpochLog, TrainOutcome};
