//! LSTM cell with hand-derived backward pass, plus a sequence unroller.
//!
//! Gate pre-activations are laid out as `[input | forget | candidate | output]`
//! blocks of `hidden` columns each:
//!
//! ```text
//! z = x·Wx + h_prev·Wh + b
//! i = σ(z_i)   f = σ(z_f)   g = tanh(z_g)   o = σ(z_o)
//! c = f ⊙ c_prev + i ⊙ g
//! h = o ⊙ tanh(c)
//! ```

use serde::{Deserialize, Serialize};

use super::params::Parameters;
use super::tensor::Tensor2;
use super::SeededRng;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// `input × 4·hidden`
    pub w_input: Tensor2,
    /// `hidden × 4·hidden`
    pub w_hidden: Tensor2,
    /// `1 × 4·hidden`
    pub bias: Tensor2,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_input: Tensor2::zeros(input, 4 * hidden),
            w_hidden: Tensor2::zeros(hidden, 4 * hidden),
            bias: Tensor2::zeros(1, 4 * hidden),
        }
    }

    /// Uniform init in `±1/√hidden` for every tensor.
    pub fn init(input: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (hidden.max(1) as f64).sqrt();
        Self {
            w_input: super::uniform(input, 4 * hidden, bound, rng),
            w_hidden: super::uniform(hidden, 4 * hidden, bound, rng),
            bias: super::uniform(1, 4 * hidden, bound, rng),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_input.rows()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hidden.rows()
    }
}

impl Parameters for LstmParams {
    fn named_tensors(&self) -> Vec<(String, &Tensor2)> {
        vec![
            ("w_input".into(), &self.w_input),
            ("w_hidden".into(), &self.w_hidden),
            ("bias".into(), &self.bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        vec![&mut self.w_input, &mut self.w_hidden, &mut self.bias]
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    x: Tensor2,
    h_prev: Tensor2,
    c_prev: Tensor2,
    /// Post-activation gates `[i | f | g | o]`, `batch × 4·hidden`.
    gates: Tensor2,
    tanh_c: Tensor2,
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// One batched step. `x` is `batch × input`; states are `batch × hidden`.
pub fn lstm_step(
    params: &LstmParams,
    x: &Tensor2,
    h_prev: &Tensor2,
    c_prev: &Tensor2,
) -> Result<(Tensor2, Tensor2, LstmStepCache)> {
    let hidden = params.hidden_size();
    let batch = x.rows();
    if x.cols() != params.input_size()
        || h_prev.shape() != (batch, hidden)
        || c_prev.shape() != (batch, hidden)
    {
        return Err(Error::dims(
            "lstm step",
            format!(
                "x {} h {} c {}",
                x.shape_str(),
                h_prev.shape_str(),
                c_prev.shape_str()
            ),
            format!("input {} hidden {}", params.input_size(), hidden),
        ));
    }

    let mut gates = x.matmul(&params.w_input)?;
    let recurrent = h_prev.matmul(&params.w_hidden)?;
    gates.add_assign(&recurrent)?;
    gates.add_row_broadcast(params.bias.data())?;

    let mut c = Tensor2::zeros(batch, hidden);
    let mut h = Tensor2::zeros(batch, hidden);
    let mut tanh_c = Tensor2::zeros(batch, hidden);
    for b in 0..batch {
        let z = gates.row_mut(b);
        for j in 0..hidden {
            z[j] = sigmoid(z[j]);
            z[hidden + j] = sigmoid(z[hidden + j]);
            z[2 * hidden + j] = z[2 * hidden + j].tanh();
            z[3 * hidden + j] = sigmoid(z[3 * hidden + j]);
        }
        let z = gates.row(b);
        let cp = c_prev.row(b);
        let c_row = c.row_mut(b);
        for j in 0..hidden {
            c_row[j] = z[hidden + j] * cp[j] + z[j] * z[2 * hidden + j];
        }
        let tc = tanh_c.row_mut(b);
        for j in 0..hidden {
            tc[j] = c.get(b, j).tanh();
        }
        let h_row = h.row_mut(b);
        for j in 0..hidden {
            h_row[j] = z[3 * hidden + j] * tanh_c.get(b, j);
        }
    }

    let cache = LstmStepCache {
        x: x.clone(),
        h_prev: h_prev.clone(),
        c_prev: c_prev.clone(),
        gates,
        tanh_c,
    };
    Ok((h, c, cache))
}

/// Backward through one step. `dh` and `dc` are the gradients flowing into
/// this step's outputs. Accumulates parameter gradients into `grads` and
/// returns `(∂x, ∂h_prev, ∂c_prev)`.
pub fn lstm_step_backward(
    params: &LstmParams,
    cache: &LstmStepCache,
    dh: &Tensor2,
    dc: &Tensor2,
    grads: &mut LstmParams,
) -> Result<(Tensor2, Tensor2, Tensor2)> {
    let hidden = params.hidden_size();
    let batch = cache.x.rows();
    if dh.shape() != (batch, hidden) || dc.shape() != (batch, hidden) {
        return Err(Error::dims(
            "lstm step backward",
            format!("dh {} dc {}", dh.shape_str(), dc.shape_str()),
            format!("{batch}x{hidden}"),
        ));
    }

    let mut dz = Tensor2::zeros(batch, 4 * hidden);
    let mut dc_prev = Tensor2::zeros(batch, hidden);
    for b in 0..batch {
        let z = cache.gates.row(b);
        let tc = cache.tanh_c.row(b);
        let cp = cache.c_prev.row(b);
        let dh_row = dh.row(b);
        let dc_row = dc.row(b);
        let dz_row = dz.row_mut(b);
        let mut dcp = vec![0.0; hidden];
        for j in 0..hidden {
            let (i, f, g, o) = (z[j], z[hidden + j], z[2 * hidden + j], z[3 * hidden + j]);
            let dct = dc_row[j] + dh_row[j] * o * (1.0 - tc[j] * tc[j]);
            let d_o = dh_row[j] * tc[j];
            let d_i = dct * g;
            let d_g = dct * i;
            let d_f = dct * cp[j];
            dcp[j] = dct * f;
            dz_row[j] = d_i * i * (1.0 - i);
            dz_row[hidden + j] = d_f * f * (1.0 - f);
            dz_row[2 * hidden + j] = d_g * (1.0 - g * g);
            dz_row[3 * hidden + j] = d_o * o * (1.0 - o);
        }
        dc_prev.row_mut(b).copy_from_slice(&dcp);
    }

    cache.x.matmul_tn_acc(&dz, &mut grads.w_input)?;
    cache.h_prev.matmul_tn_acc(&dz, &mut grads.w_hidden)?;
    dz.col_sum_acc(grads.bias.data_mut());
    let dx = dz.matmul_nt(&params.w_input)?;
    let dh_prev = dz.matmul_nt(&params.w_hidden)?;
    Ok((dx, dh_prev, dc_prev))
}

/// Single-sample convenience wrapper around [`lstm_step`].
pub fn lstm_cell_forward(
    x_t: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmParams,
) -> Result<(Vec<f64>, Vec<f64>, LstmStepCache)> {
    let (h, c, cache) = lstm_step(
        params,
        &Tensor2::row_vector(x_t),
        &Tensor2::row_vector(h_prev),
        &Tensor2::row_vector(c_prev),
    )?;
    Ok((h.into_vec(), c.into_vec(), cache))
}

/// A completed unroll over a sequence.
#[derive(Debug, Clone)]
pub struct LstmRun {
    /// Hidden outputs indexed by original time step.
    pub outputs: Vec<Tensor2>,
    /// Final hidden state (last processed step).
    pub h_last: Tensor2,
    pub c_last: Tensor2,
    /// Caches in processing order.
    caches: Vec<LstmStepCache>,
    reverse: bool,
}

impl LstmRun {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn is_reverse(&self) -> bool {
        self.reverse
    }
}

/// Unrolls the cell over `inputs` (time-major, each `batch × input`).
/// With `reverse`, steps are processed from the last time index to the first.
pub fn run_sequence(
    params: &LstmParams,
    inputs: &[Tensor2],
    h0: &Tensor2,
    c0: &Tensor2,
    reverse: bool,
) -> Result<LstmRun> {
    if inputs.is_empty() {
        return Err(Error::Data("empty input sequence".into()));
    }
    let n = inputs.len();
    let mut outputs = vec![Tensor2::zeros(0, 0); n];
    let mut caches = Vec::with_capacity(n);
    let mut h = h0.clone();
    let mut c = c0.clone();
    for step in 0..n {
        let t = if reverse { n - 1 - step } else { step };
        let (h_next, c_next, cache) = lstm_step(params, &inputs[t], &h, &c)?;
        outputs[t] = h_next.clone();
        caches.push(cache);
        h = h_next;
        c = c_next;
    }
    Ok(LstmRun {
        outputs,
        h_last: h,
        c_last: c,
        caches,
        reverse,
    })
}

/// Gradients of a sequence unroll with respect to its inputs and initial state.
#[derive(Debug, Clone)]
pub struct SequenceGrads {
    /// Indexed by original time step.
    pub inputs: Vec<Tensor2>,
    pub h0: Tensor2,
    pub c0: Tensor2,
}

/// Backpropagation through time. `d_outputs` is indexed by original time step
/// (entries may be `None` when no gradient reaches that output).
pub fn run_sequence_backward(
    params: &LstmParams,
    run: &LstmRun,
    d_outputs: &[Option<Tensor2>],
    grads: &mut LstmParams,
) -> Result<SequenceGrads> {
    let n = run.len();
    if d_outputs.len() != n {
        return Err(Error::dims(
            "sequence backward",
            format!("{n} steps"),
            format!("{} output gradients", d_outputs.len()),
        ));
    }
    let (batch, hidden) = run.h_last.shape();
    let mut dh = Tensor2::zeros(batch, hidden);
    let mut dc = Tensor2::zeros(batch, hidden);
    let mut d_inputs = vec![Tensor2::zeros(0, 0); n];
    for step in (0..n).rev() {
        let t = if run.reverse { n - 1 - step } else { step };
        if let Some(g) = &d_outputs[t] {
            dh.add_assign(g)?;
        }
        let (dx, dh_prev, dc_prev) = lstm_step_backward(params, &run.caches[step], &dh, &dc, grads)?;
        d_inputs[t] = dx;
        dh = dh_prev;
        dc = dc_prev;
    }
    Ok(SequenceGrads {
        inputs: d_inputs,
        h0: dh,
        c0: dc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{assert_grads_match, numeric_grad};
    use rand::SeedableRng;

    #[test]
    fn zero_params_give_zero_state() {
        let p = LstmParams::zeros(3, 4);
        let (h, c, _) = lstm_cell_forward(&[1.0, -2.0, 0.5], &[0.0; 4], &[0.0; 4], &p).unwrap();
        assert!(h.iter().chain(&c).all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_preserves_cell() {
        let hidden = 3;
        let mut rng = SeededRng::seed_from_u64(5);
        let mut p = LstmParams::init(2, hidden, &mut rng);
        for j in 0..hidden {
            p.bias.set(0, j, -50.0);
            p.bias.set(0, hidden + j, 50.0);
        }
        let c_prev = [0.3, -0.8, 0.55];
        let (_, c, _) = lstm_cell_forward(&[0.1, 0.2], &[0.05, -0.1, 0.2], &c_prev, &p).unwrap();
        for (a, b) in c.iter().zip(&c_prev) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = LstmParams::zeros(3, 4);
        assert!(lstm_cell_forward(&[1.0, 2.0], &[0.0; 4], &[0.0; 4], &p).is_err());
        assert!(lstm_cell_forward(&[1.0, 2.0, 3.0], &[0.0; 3], &[0.0; 4], &p).is_err());
    }

    #[test]
    fn step_gradients_match_finite_differences() {
        for seed in 0..20u64 {
            let mut rng = SeededRng::seed_from_u64(seed);
            let params = LstmParams::init(3, 4, &mut rng);
            let x = crate::nn::uniform(2, 3, 1.0, &mut rng);
            let h0 = crate::nn::uniform(2, 4, 0.5, &mut rng);
            let c0 = crate::nn::uniform(2, 4, 0.5, &mut rng);
            let wh = crate::nn::uniform(2, 4, 1.0, &mut rng);
            let wc = crate::nn::uniform(2, 4, 1.0, &mut rng);
            // L = Σ wh⊙h + Σ wc⊙c
            let loss = |p: &LstmParams| {
                let (h, c, _) = lstm_step(p, &x, &h0, &c0).unwrap();
                dot(&h, &wh) + dot(&c, &wc)
            };
            let mut grads = params.zeros_like();
            let (_, _, cache) = lstm_step(&params, &x, &h0, &c0).unwrap();
            lstm_step_backward(&params, &cache, &wh, &wc, &mut grads).unwrap();
            assert_grads_match(&params, &grads, loss, 1e-4);
        }
    }

    #[test]
    fn sequence_bptt_matches_finite_differences() {
        for seed in 0..20u64 {
            let mut rng = SeededRng::seed_from_u64(100 + seed);
            let params = LstmParams::init(2, 3, &mut rng);
            let xs: Vec<Tensor2> = (0..5).map(|_| crate::nn::uniform(2, 2, 1.0, &mut rng)).collect();
            let h0 = crate::nn::uniform(2, 3, 0.5, &mut rng);
            let c0 = crate::nn::uniform(2, 3, 0.5, &mut rng);
            let ws: Vec<Tensor2> = (0..5).map(|_| crate::nn::uniform(2, 3, 1.0, &mut rng)).collect();
            let reverse = seed % 2 == 1;
            let loss_of = |p: &LstmParams, xs: &[Tensor2], h0: &Tensor2, c0: &Tensor2| {
                let run = run_sequence(p, xs, h0, c0, reverse).unwrap();
                run.outputs.iter().zip(&ws).map(|(o, w)| dot(o, w)).sum::<f64>()
            };
            let run = run_sequence(&params, &xs, &h0, &c0, reverse).unwrap();
            let mut grads = params.zeros_like();
            let d_out: Vec<Option<Tensor2>> = ws.iter().cloned().map(Some).collect();
            let sg = run_sequence_backward(&params, &run, &d_out, &mut grads).unwrap();
            assert_grads_match(&params, &grads, |p| loss_of(p, &xs, &h0, &c0), 1e-4);

            let num_h0 = numeric_grad(&h0, |h| loss_of(&params, &xs, h, &c0));
            crate::nn::gradcheck::assert_close(&sg.h0, &num_h0, 1e-4, "h0");
            let num_c0 = numeric_grad(&c0, |c| loss_of(&params, &xs, &h0, c));
            crate::nn::gradcheck::assert_close(&sg.c0, &num_c0, 1e-4, "c0");
            for t in 0..xs.len() {
                let num = numeric_grad(&xs[t], |x| {
                    let mut xs2 = xs.clone();
                    xs2[t] = x.clone();
                    loss_of(&params, &xs2, &h0, &c0)
                });
                crate::nn::gradcheck::assert_close(&sg.inputs[t], &num, 1e-4, "input");
            }
        }
    }

    fn dot(a: &Tensor2, b: &Tensor2) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
    }
}
