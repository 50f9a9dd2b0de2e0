//! Evaluation: per-class accuracy, DTW explanation alignment and Fréchet
//! realism.

mod accuracy;
mod alignment;
mod cost;
mod dtw;
mod frechet;
mod realism;
mod report;

pub use accuracy::{avg_accuracy_per_class, per_class_counts};
pub use alignment::{alignment_metrics, AlignmentRecord, AlignmentReport};
pub use cost::{estimate_cost_model, estimate_cost_model_default, mahalanobis_cost, CostModel};
pub use dtw::{dtw_distance, matching_seen_class, nearest_reference};
pub use frechet::dfd;
pub use realism::{realism_report, RealismReport};
pub use report::{alignment_table, realism_table, EvalReport};
