//! Dataset ingestion, fold construction and synthetic fixtures.

pub mod imu;
pub mod manifest;
pub mod semantics;
pub mod skeleton;
pub mod split;
pub mod synth;

pub use imu::ImuWindow;
pub use manifest::{load_manifest, Dataset, DatasetManifest};
pub use semantics::{build_semantic_set, ClassSemanticSet};
pub use skeleton::{resample_skeleton, select_keypoints, SkeletonSequence};
pub use split::{kfold_split, train_val_split, FoldSpec, FoldsFile, SuperClassMap};
pub use synth::{synth_generate, SynthConfig};
