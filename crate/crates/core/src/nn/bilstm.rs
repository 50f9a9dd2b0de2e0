//! Stacked bidirectional LSTM over time-major batches.
//!
//! Layer `l > 0` consumes `[fwd_t | bwd_t]` from layer `l - 1`. The sequence
//! representation is built from the top layer only.

use serde::{Deserialize, Serialize};

use super::lstm::{run_sequence, run_sequence_backward, LstmParams, LstmRun};
use super::params::{prefixed, Parameters};
use super::tensor::Tensor2;
use super::SeededRng;
use crate::error::{Error, Result};

/// How the top layer's outputs become a fixed-length representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// `[h_fwd(n-1) | h_bwd(0)]`: the final state of each direction.
    #[default]
    LastConcat,
    /// Mean over time of `[h_fwd(t) | h_bwd(t)]`.
    MeanPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLayer {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmParams {
    pub layers: Vec<BiLayer>,
}

impl BiLstmParams {
    pub fn init(input: usize, hidden: usize, stacks: usize, rng: &mut SeededRng) -> Self {
        let layers = (0..stacks)
            .map(|l| {
                let inp = if l == 0 { input } else { 2 * hidden };
                BiLayer {
                    forward: LstmParams::init(inp, hidden, rng),
                    backward: LstmParams::init(inp, hidden, rng),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(input: usize, hidden: usize, stacks: usize) -> Self {
        let layers = (0..stacks)
            .map(|l| {
                let inp = if l == 0 { input } else { 2 * hidden };
                BiLayer {
                    forward: LstmParams::zeros(inp, hidden),
                    backward: LstmParams::zeros(inp, hidden),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn input_size(&self) -> usize {
        self.layers.first().map_or(0, |l| l.forward.input_size())
    }

    pub fn hidden_size(&self) -> usize {
        self.layers.first().map_or(0, |l| l.forward.hidden_size())
    }

    pub fn stacks(&self) -> usize {
        self.layers.len()
    }

    /// Width of the pooled representation.
    pub fn output_size(&self) -> usize {
        2 * self.hidden_size()
    }
}

impl Parameters for BiLstmParams {
    fn named_tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.extend(prefixed(&format!("layer{l}.fwd"), layer.forward.named_tensors()));
            out.extend(prefixed(&format!("layer{l}.bwd"), layer.backward.named_tensors()));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.extend(layer.forward.tensors_mut());
            out.extend(layer.backward.tensors_mut());
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    runs: Vec<(LstmRun, LstmRun)>,
    pooling: Pooling,
}

/// Converts per-sample `n × d` windows into `n` time-major `batch × d` slices.
pub fn to_time_major(samples: &[&Tensor2]) -> Result<Vec<Tensor2>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Data("empty batch".into()))?;
    let (n, d) = first.shape();
    if n == 0 {
        return Err(Error::Data("empty input sequence".into()));
    }
    if let Some(bad) = samples.iter().find(|s| s.shape() != (n, d)) {
        return Err(Error::dims("batch assembly", first.shape_str(), bad.shape_str()));
    }
    let batch = samples.len();
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let mut step = Tensor2::zeros(batch, d);
        for (b, s) in samples.iter().enumerate() {
            step.row_mut(b).copy_from_slice(s.row(t));
        }
        out.push(step);
    }
    Ok(out)
}

/// Runs every stack in both directions and pools the top layer into a
/// `batch × 2·hidden` representation.
pub fn bilstm_forward(
    params: &BiLstmParams,
    inputs: &[Tensor2],
    pooling: Pooling,
) -> Result<(Tensor2, BiLstmCache)> {
    if params.layers.is_empty() {
        return Err(Error::Config("bidirectional LSTM needs at least one stack".into()));
    }
    let first = inputs
        .first()
        .ok_or_else(|| Error::Data("empty input sequence".into()))?;
    let batch = first.rows();
    let hidden = params.hidden_size();
    let zeros = Tensor2::zeros(batch, hidden);

    let mut runs = Vec::with_capacity(params.layers.len());
    let mut layer_input: Vec<Tensor2> = inputs.to_vec();
    for layer in &params.layers {
        let fwd = run_sequence(&layer.forward, &layer_input, &zeros, &zeros, false)?;
        let bwd = run_sequence(&layer.backward, &layer_input, &zeros, &zeros, true)?;
        layer_input = fwd
            .outputs
            .iter()
            .zip(&bwd.outputs)
            .map(|(f, b)| f.hcat(b))
            .collect::<Result<_>>()?;
        runs.push((fwd, bwd));
    }

    let rep = match pooling {
        Pooling::LastConcat => {
            let (fwd, bwd) = runs.last().expect("at least one layer");
            fwd.h_last.hcat(&bwd.h_last)?
        }
        Pooling::MeanPool => {
            let n = layer_input.len() as f64;
            let mut acc = Tensor2::zeros(batch, 2 * hidden);
            for out in &layer_input {
                acc.add_assign(out)?;
            }
            acc.scale_in_place(1.0 / n);
            acc
        }
    };
    Ok((rep, BiLstmCache { runs, pooling }))
}

/// Backward from `∂L/∂rep`; accumulates into `grads` and returns the input
/// gradients (time-major).
pub fn bilstm_backward(
    params: &BiLstmParams,
    cache: &BiLstmCache,
    d_rep: &Tensor2,
    grads: &mut BiLstmParams,
) -> Result<Vec<Tensor2>> {
    let hidden = params.hidden_size();
    let (top_fwd, _) = cache.runs.last().expect("at least one layer");
    let n = top_fwd.len();
    let (d_fwd_rep, d_bwd_rep) = d_rep.split_cols(hidden);

    let mut d_fwd: Vec<Option<Tensor2>> = vec![None; n];
    let mut d_bwd: Vec<Option<Tensor2>> = vec![None; n];
    match cache.pooling {
        Pooling::LastConcat => {
            d_fwd[n - 1] = Some(d_fwd_rep);
            d_bwd[0] = Some(d_bwd_rep);
        }
        Pooling::MeanPool => {
            let inv = 1.0 / n as f64;
            let mut f = d_fwd_rep;
            let mut b = d_bwd_rep;
            f.scale_in_place(inv);
            b.scale_in_place(inv);
            d_fwd = vec![Some(f); n];
            d_bwd = vec![Some(b); n];
        }
    }

    let mut d_inputs = Vec::new();
    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let (fwd_run, bwd_run) = &cache.runs[l];
        let layer_grads = &mut grads.layers[l];
        let gf = run_sequence_backward(&layer.forward, fwd_run, &d_fwd, &mut layer_grads.forward)?;
        let gb = run_sequence_backward(&layer.backward, bwd_run, &d_bwd, &mut layer_grads.backward)?;
        d_inputs = gf.inputs;
        for (acc, g) in d_inputs.iter_mut().zip(&gb.inputs) {
            acc.add_assign(g)?;
        }
        if l > 0 {
            for t in 0..n {
                let (f, b) = d_inputs[t].split_cols(hidden);
                d_fwd[t] = Some(f);
                d_bwd[t] = Some(b);
            }
        }
    }
    Ok(d_inputs)
}

/// Final hidden state of each direction of the top stack for a single
/// `n × d` sequence.
pub fn bilstm_last_states(params: &BiLstmParams, x: &Tensor2) -> Result<(Vec<f64>, Vec<f64>)> {
    let inputs = to_time_major(&[x])?;
    let (rep, _) = bilstm_forward(params, &inputs, Pooling::LastConcat)?;
    let (f, b) = rep.split_cols(params.hidden_size());
    Ok((f.into_vec(), b.into_vec()))
}
