//! Batched forward and backward passes of the full network.

use super::config::TrainConfig;
use super::matching::{log_softmax_rows, SemanticTable};
use super::params::{DecoderParams, ModelParams};
use crate::error::{Error, Result};
use crate::data::ClassSemanticSet;
use crate::nn::bilstm::{bilstm_backward, bilstm_forward, to_time_major, BiLstmCache};
use crate::nn::layers::{dropout_forward, relu_backward, relu_forward, DropoutMask};
use crate::nn::lstm::{run_sequence, run_sequence_backward, LstmRun};
use crate::nn::{Mode, Pooling, SeededRng, Tensor2};

pub(crate) struct EncoderCache {
    bilstm: BiLstmCache,
    mask: DropoutMask,
    dropped: Tensor2,
    activated: Tensor2,
}

/// Draws a dropout mask for a `batch × width` representation.
pub(crate) fn sample_mask(batch: usize, width: usize, rate: f64, mode: Mode, rng: &mut SeededRng) -> Result<DropoutMask> {
    let (_, mask) = dropout_forward(&Tensor2::zeros(batch, width), rate, mode, rng)?;
    Ok(mask)
}

/// `f = head(ReLU(dropout(bilstm(x))))` for time-major `inputs`.
pub(crate) fn encoder_forward(
    params: &ModelParams,
    inputs: &[Tensor2],
    pooling: Pooling,
    mask: &DropoutMask,
) -> Result<(Tensor2, EncoderCache)> {
    if let Some(x) = inputs.first() {
        if x.cols() != params.input_size() {
            return Err(Error::dims(
                "encoder input",
                format!("{} features", params.input_size()),
                x.shape_str(),
            ));
        }
    }
    let (rep, bilstm) = bilstm_forward(&params.encoder, inputs, pooling)?;
    let dropped = mask.apply(&rep)?;
    let activated = relu_forward(&dropped);
    let features = params.head.forward(&activated)?;
    Ok((
        features,
        EncoderCache {
            bilstm,
            mask: mask.clone(),
            dropped,
            activated,
        },
    ))
}

pub(crate) fn encoder_backward(
    params: &ModelParams,
    cache: &EncoderCache,
    d_features: &Tensor2,
    grads: &mut ModelParams,
) -> Result<()> {
    let d_activated = params.head.backward(&cache.activated, d_features, &mut grads.head)?;
    let d_dropped = relu_backward(&cache.dropped, &d_activated)?;
    let d_rep = cache.mask.apply(&d_dropped)?;
    bilstm_backward(&params.encoder, &cache.bilstm, &d_rep, &mut grads.encoder)?;
    Ok(())
}

/// Eval-mode features for a batch.
pub(crate) fn encode_batch(params: &ModelParams, inputs: &[Tensor2], pooling: Pooling) -> Result<Tensor2> {
    encoder_forward(params, inputs, pooling, &DropoutMask::identity()).map(|(f, _)| f)
}

pub(crate) struct DecoderCache {
    condition: Tensor2,
    run: LstmRun,
    frames: Vec<Tensor2>,
}

/// Unrolls the decoder for `steps` frames; returns one `batch × width`
/// tensor per frame.
pub(crate) fn decoder_forward(
    params: &DecoderParams,
    condition: &Tensor2,
    steps: usize,
) -> Result<(Vec<Tensor2>, DecoderCache)> {
    if condition.cols() != params.condition_size() {
        return Err(Error::dims(
            "decoder condition",
            format!("length {}", params.condition_size()),
            condition.shape_str(),
        ));
    }
    if steps == 0 {
        return Err(Error::Config("decoder needs at least one frame".into()));
    }
    let batch = condition.rows();
    let h0 = params.init_h.forward(condition)?;
    let c0 = params.init_c.forward(condition)?;
    let mut start = Tensor2::zeros(batch, params.frame_width());
    start.add_row_broadcast(params.start.data())?;
    let inputs = vec![start; steps];
    let run = run_sequence(&params.lstm, &inputs, &h0, &c0, false)?;
    let frames = run
        .outputs
        .iter()
        .map(|h| params.output.forward(h).map(|y| y.map(f64::tanh)))
        .collect::<Result<Vec<_>>>()?;
    let cache = DecoderCache {
        condition: condition.clone(),
        run,
        frames: frames.clone(),
    };
    Ok((frames, cache))
}

/// Returns `∂L/∂condition`.
pub(crate) fn decoder_backward(
    params: &DecoderParams,
    cache: &DecoderCache,
    d_frames: &[Tensor2],
    grads: &mut DecoderParams,
) -> Result<Tensor2> {
    let mut d_outputs = Vec::with_capacity(d_frames.len());
    for ((y, dy), h) in cache.frames.iter().zip(d_frames).zip(&cache.run.outputs) {
        let d_pre = y.zip_map(dy, |y, g| g * (1.0 - y * y))?;
        d_outputs.push(Some(params.output.backward(h, &d_pre, &mut grads.output)?));
    }
    let seq = run_sequence_backward(&params.lstm, &cache.run, &d_outputs, &mut grads.lstm)?;
    for dx in &seq.inputs {
        dx.col_sum_acc(grads.start.data_mut());
    }
    let mut d_condition = params.init_h.backward(&cache.condition, &seq.h0, &mut grads.init_h)?;
    d_condition.add_assign(&params.init_c.backward(&cache.condition, &seq.c0, &mut grads.init_c)?)?;
    Ok(d_condition)
}

/// Inputs for one optimisation step.
pub(crate) struct Batch<'a> {
    /// Time-major, normalised.
    pub inputs: Vec<Tensor2>,
    /// Row indices into the semantic table.
    pub labels: Vec<usize>,
    /// One `frames × width` target per sample.
    pub targets: Vec<&'a Tensor2>,
}

/// Batch means of the three loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub l_m: f64,
    pub l_c: f64,
    pub l_r: f64,
}

impl LossParts {
    pub fn total(&self, config: &TrainConfig) -> f64 {
        super::matching::total_loss(self.l_m, self.l_c, self.l_r, config.lambda, config.alpha)
    }
}

fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Mean loss over the batch; when `grads` is given, accumulates the gradient
/// of the mean total loss.
pub(crate) fn batch_loss(
    params: &ModelParams,
    config: &TrainConfig,
    table: &SemanticTable,
    batch: &Batch,
    mask: &DropoutMask,
    grads: Option<&mut ModelParams>,
) -> Result<LossParts> {
    let b = batch.labels.len();
    let dim = params.embedding_dim();
    if table.vectors.cols() != dim {
        return Err(Error::dims("semantic table", format!("embedding_dim {dim}"), table.vectors.shape_str()));
    }
    let (features, enc_cache) = encoder_forward(params, &batch.inputs, config.pooling, mask)?;

    let mut targets_v = Tensor2::zeros(b, dim);
    for (r, &k) in batch.labels.iter().enumerate() {
        targets_v.row_mut(r).copy_from_slice(table.vectors.row(k));
    }

    // Matching loss.
    let mut l_m = 0.0;
    let mut d_features = Tensor2::zeros(b, dim);
    for r in 0..b {
        let diff: Vec<f64> = features.row(r).iter().zip(targets_v.row(r)).map(|(f, v)| f - v).collect();
        let n = row_norm(&diff);
        l_m += n;
        if n > 0.0 {
            d_features.row_mut(r).iter_mut().zip(&diff).for_each(|(g, d)| *g = d / n);
        }
    }

    // Classification loss over the table's classes.
    let (scored, norms) = if config.normalize_features {
        let mut unit = features.clone();
        let mut norms = vec![0.0; b];
        for (r, n) in norms.iter_mut().enumerate() {
            *n = row_norm(features.row(r));
            if *n > 0.0 {
                unit.row_mut(r).iter_mut().for_each(|v| *v /= *n);
            }
        }
        (unit, Some(norms))
    } else {
        (features.clone(), None)
    };
    let log_p = log_softmax_rows(&table.scores(&scored)?);
    let mut l_c = 0.0;
    let mut d_scores = log_p.map(f64::exp);
    for (r, &k) in batch.labels.iter().enumerate() {
        l_c -= log_p.get(r, k);
        d_scores.set(r, k, d_scores.get(r, k) - 1.0);
    }
    let mut d_scored = d_scores.matmul(&table.units)?;
    if let Some(norms) = &norms {
        for (r, &n) in norms.iter().enumerate() {
            let u = scored.row(r).to_vec();
            let row = d_scored.row_mut(r);
            if n > 0.0 {
                let proj: f64 = u.iter().zip(row.iter()).map(|(a, g)| a * g).sum();
                row.iter_mut().zip(&u).for_each(|(g, a)| *g = (*g - a * proj) / n);
            } else {
                row.fill(0.0);
            }
        }
    }

    // Reconstruction loss, decoding from f and from v_y in one pass.
    let steps = batch.targets.first().map_or(0, |t| t.rows());
    let condition = Tensor2::vstack(&[&features, &targets_v])?;
    let (frames, dec_cache) = decoder_forward(&params.decoder, &condition, steps)?;
    let width = params.decoder.frame_width();
    let mut d_frames = vec![Tensor2::zeros(2 * b, width); steps];
    let mut l_r = 0.0;
    for r in 0..2 * b {
        let target = batch.targets[r % b];
        if target.shape() != (steps, width) {
            return Err(Error::dims("skeleton target", format!("{steps}x{width}"), target.shape_str()));
        }
        let mut sq = 0.0;
        for (t, frame) in frames.iter().enumerate() {
            sq += frame.row(r).iter().zip(target.row(t)).map(|(y, h)| (y - h) * (y - h)).sum::<f64>();
        }
        let n = sq.sqrt();
        l_r += n;
        if n > 0.0 {
            for (t, frame) in frames.iter().enumerate() {
                let scale = config.alpha / (n * b as f64);
                d_frames[t]
                    .row_mut(r)
                    .iter_mut()
                    .zip(frame.row(r).iter().zip(target.row(t)))
                    .for_each(|(g, (y, h))| *g = (y - h) * scale);
            }
        }
    }

    let parts = LossParts {
        l_m: l_m / b as f64,
        l_c: l_c / b as f64,
        l_r: l_r / b as f64,
    };

    if let Some(grads) = grads {
        let d_condition = decoder_backward(&params.decoder, &dec_cache, &d_frames, &mut grads.decoder)?;
        let inv_b = 1.0 / b as f64;
        for r in 0..b {
            let dc = d_condition.row(r);
            let ds = d_scored.row(r);
            for ((g, c), s) in d_features.row_mut(r).iter_mut().zip(dc).zip(ds) {
                *g = (*g + config.lambda * s) * inv_b + c;
            }
        }
        encoder_backward(params, &enc_cache, &d_features, grads)?;
    }
    Ok(parts)
}

/// Batch-mean loss terms for raw `n × d` windows with seen-class `labels`
/// and `frames × J·K` targets. With `grads`, also accumulates the gradient
/// of the mean total loss. The dropout mask is drawn from `dropout_seed`,
/// so repeated calls with the same seed see the same mask.
#[allow(clippy::too_many_arguments)]
pub fn batch_objective(
    params: &ModelParams,
    config: &TrainConfig,
    semantics: &ClassSemanticSet,
    windows: &[&Tensor2],
    labels: &[&str],
    targets: &[&Tensor2],
    dropout_seed: u64,
    grads: Option<&mut ModelParams>,
) -> Result<LossParts> {
    if labels.len() != windows.len() || targets.len() != windows.len() {
        return Err(Error::dims(
            "batch objective",
            format!("{} windows", windows.len()),
            format!("{} labels, {} targets", labels.len(), targets.len()),
        ));
    }
    let table = SemanticTable::new(semantics)?;
    let labels = labels
        .iter()
        .map(|l| {
            table
                .index_of(l)
                .ok_or_else(|| Error::Data(format!("label `{l}` has no semantic vector")))
        })
        .collect::<Result<Vec<_>>>()?;
    let batch = Batch {
        inputs: to_time_major(windows)?,
        labels,
        targets: targets.to_vec(),
    };
    let mut rng = <SeededRng as rand::SeedableRng>::seed_from_u64(dropout_seed);
    let mask = sample_mask(windows.len(), 2 * config.hidden, config.dropout, Mode::Train, &mut rng)?;
    batch_loss(params, config, &table, &batch, &mask, grads)
}
