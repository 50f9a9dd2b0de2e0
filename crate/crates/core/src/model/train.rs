//! Training loop.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::infer::Model;
use super::matching::{argmax, SemanticTable};
use super::network::{batch_loss, sample_mask, Batch};
use super::params::{ModelParams, Normalizer};
use crate::data::{resample_skeleton, train_val_split, Dataset, FoldSpec, ImuWindow};
use crate::error::{Error, Result};
use crate::metrics::avg_accuracy_per_class;
use crate::nn::params::clip_global_norm;
use crate::nn::{AdamConfig, AdamState, Mode, Parameters, SeededRng, Tensor2};

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub l_m: f64,
    pub l_c: f64,
    pub l_r: f64,
    pub l: f64,
    pub val_accuracy: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub model: Model,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
}

// Independent streams derived from the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_SKELETON: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

fn stream(seed: u64, id: u64) -> SeededRng {
    let mut rng = SeededRng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Trains on the seen classes of `fold`. `on_epoch` sees each log line as it
/// is produced.
pub fn train(
    dataset: &Dataset,
    fold: &FoldSpec,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    let all: std::collections::BTreeSet<String> = dataset.classes.iter().cloned().collect();
    fold.check(&all, &dataset.superclasses)?;
    if (config.joints, config.dims) != (dataset.manifest.joints, dataset.manifest.dims) {
        return Err(Error::Config(format!(
            "decoder shape {}x{} differs from dataset skeletons {}x{}",
            config.joints, config.dims, dataset.manifest.joints, dataset.manifest.dims
        )));
    }

    let seen: Vec<String> = fold.seen.iter().cloned().collect();
    let semantics = dataset.semantics.subset(seen.iter().map(String::as_str))?;
    let table = SemanticTable::new(&semantics)?;

    let mut targets: Vec<Vec<Tensor2>> = Vec::with_capacity(seen.len());
    for class in &seen {
        let list = dataset
            .skeletons_of(class)
            .map(|s| resample_skeleton(s, config.frames).map(|r| r.into_coords()))
            .collect::<Result<Vec<_>>>()?;
        if list.is_empty() {
            return Err(Error::Data(format!("seen class `{class}` has no skeleton sequences")));
        }
        targets.push(list);
    }

    let windows: Vec<&ImuWindow> = dataset.windows_in(&fold.seen).collect();
    let labels: Vec<&str> = windows.iter().map(|w| w.label.as_deref().expect("labelled")).collect();
    let class_refs: Vec<&str> = seen.iter().map(String::as_str).collect();
    let (train_idx, val_idx) = train_val_split(&labels, &class_refs, config.train_fraction, config.seed)?;
    let label_idx: Vec<usize> = labels
        .iter()
        .map(|l| table.index_of(l).expect("seen class in table"))
        .collect();

    let train_windows: Vec<&ImuWindow> = train_idx.iter().map(|&i| windows[i]).collect();
    let normalizer = Normalizer::fit(&train_windows)?;
    let mut init_rng = stream(config.seed, STREAM_INIT);
    let mut params = ModelParams::init(dataset.manifest.d, semantics.embedding_dim(), config, &mut init_rng);
    init_output_bias(&mut params, &targets);
    let mut model = Model {
        config: config.clone(),
        seen_classes: seen.clone(),
        unseen_classes: fold.unseen.iter().cloned().collect(),
        normalizer,
        params,
    };

    let mut adam = AdamState::new(
        &model.params,
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut shuffle_rng = stream(config.seed, STREAM_SHUFFLE);
    let mut skeleton_rng = stream(config.seed, STREAM_SKELETON);
    let mut dropout_rng = stream(config.seed, STREAM_DROPOUT);
    let mut grads = model.params.zeros_like();

    let val_windows: Vec<&ImuWindow> = val_idx.iter().map(|&i| windows[i]).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 1..=config.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut shuffle_rng);
        let picks: Vec<usize> = order
            .iter()
            .map(|&i| skeleton_rng.random_range(0..targets[label_idx[i]].len()))
            .collect();

        let (mut sum_m, mut sum_c, mut sum_r) = (0.0, 0.0, 0.0);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let start = b * config.batch_size;
            let chunk_windows: Vec<&ImuWindow> = chunk.iter().map(|&i| windows[i]).collect();
            let batch = Batch {
                inputs: model.prepare(&chunk_windows)?,
                labels: chunk.iter().map(|&i| label_idx[i]).collect(),
                targets: chunk
                    .iter()
                    .zip(&picks[start..])
                    .map(|(&i, &p)| &targets[label_idx[i]][p])
                    .collect(),
            };
            let mask = sample_mask(chunk.len(), 2 * config.hidden, config.dropout, Mode::Train, &mut dropout_rng)?;
            grads.zero();
            let parts = batch_loss(&model.params, config, &table, &batch, &mask, Some(&mut grads))?;
            if !parts.total(config).is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss at epoch {epoch}, batch {} (L_M={}, L_C={}, L_R={})",
                    b + 1,
                    parts.l_m,
                    parts.l_c,
                    parts.l_r
                )));
            }
            clip_global_norm(&mut grads, config.clip_norm);
            adam.step(&mut model.params, &grads)
                .map_err(|e| Error::Numeric(format!("epoch {epoch}, batch {}: {e}", b + 1)))?;
            let n = chunk.len() as f64;
            sum_m += parts.l_m * n;
            sum_c += parts.l_c * n;
            sum_r += parts.l_r * n;
        }

        let count = train_idx.len() as f64;
        let (l_m, l_c, l_r) = (sum_m / count, sum_c / count, sum_r / count);
        let val_accuracy = validation_accuracy(&model, &table, &val_windows)?;
        let entry = EpochLog {
            epoch,
            l_m,
            l_c,
            l_r,
            l: super::matching::total_loss(l_m, l_c, l_r, config.lambda, config.alpha),
            val_accuracy,
            seed: config.seed,
        };
        on_epoch(&entry);
        log.push(entry);
        // Later epochs win ties.
        if best.as_ref().is_none_or(|(acc, _, _)| val_accuracy >= *acc) {
            best = Some((val_accuracy, epoch, model.params.clone()));
        }
    }

    let (_, best_epoch, params) = best.expect("at least one epoch");
    model.params = params;
    Ok(TrainOutcome { model, log, best_epoch })
}

/// Starts the decoder's output head at the mean training frame so early
/// updates go to class-specific motion rather than the shared pose.
fn init_output_bias(params: &mut ModelParams, targets: &[Vec<Tensor2>]) {
    let bias = params.decoder.output.bias.data_mut();
    let mut sum = vec![0.0; bias.len()];
    let mut frames = 0usize;
    for t in targets.iter().flatten() {
        t.col_sum_acc(&mut sum);
        frames += t.rows();
    }
    if frames == 0 {
        return;
    }
    for (b, s) in bias.iter_mut().zip(sum) {
        *b = (s / frames as f64).clamp(-0.999, 0.999).atanh();
    }
}

/// Macro-averaged seen-class accuracy of eval-mode predictions.
fn validation_accuracy(model: &Model, table: &SemanticTable, windows: &[&ImuWindow]) -> Result<f64> {
    let features = model.features(windows)?;
    let scores = table.scores(&features)?;
    let pairs: Vec<(&str, &str)> = windows
        .iter()
        .enumerate()
        .map(|(r, w)| (w.label.as_deref().expect("labelled"), table.classes[argmax(scores.row(r))].as_str()))
        .collect();
    avg_accuracy_per_class(&pairs)
}
