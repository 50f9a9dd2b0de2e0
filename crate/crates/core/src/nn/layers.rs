//! Stateless dense layers and their backward passes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::Parameters;
use super::tensor::Tensor2;
use super::SeededRng;
use crate::error::{Error, Result};

/// Whether stochastic layers are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// `y = x·W + b`, with `b` broadcast over rows.
pub fn linear_forward(x: &Tensor2, weight: &Tensor2, bias: &[f64]) -> Result<Tensor2> {
    if x.cols() != weight.rows() || bias.len() != weight.cols() {
        return Err(Error::dims(
            "linear layer",
            format!("input {}", x.shape_str()),
            format!("weight {} with bias of length {}", weight.shape_str(), bias.len()),
        ));
    }
    let mut y = x.matmul(weight)?;
    y.add_row_broadcast(bias)?;
    Ok(y)
}

/// Fully connected layer; `weight` is `in × out`, `bias` is `1 × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Tensor2,
    pub bias: Tensor2,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Tensor2::zeros(input, output),
            bias: Tensor2::zeros(1, output),
        }
    }

    /// Uniform init in `±1/√input`.
    pub fn init(input: usize, output: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        Self {
            weight: super::uniform(input, output, bound, rng),
            bias: super::uniform(1, output, bound, rng),
        }
    }

    pub fn input_size(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_size(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Tensor2) -> Result<Tensor2> {
        linear_forward(x, &self.weight, self.bias.data())
    }

    /// Accumulates parameter gradients into `grads` and returns `∂L/∂x`.
    pub fn backward(&self, x: &Tensor2, dy: &Tensor2, grads: &mut Linear) -> Result<Tensor2> {
        x.matmul_tn_acc(dy, &mut grads.weight)?;
        dy.col_sum_acc(grads.bias.data_mut());
        dy.matmul_nt(&self.weight)
    }
}

impl Parameters for Linear {
    fn named_tensors(&self) -> Vec<(String, &Tensor2)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        vec![&mut self.weight, &mut self.bias]
    }
}

pub fn relu_forward(x: &Tensor2) -> Tensor2 {
    x.map(|v| v.max(0.0))
}

/// Passes `dy` where the forward input was strictly positive.
pub fn relu_backward(x: &Tensor2, dy: &Tensor2) -> Result<Tensor2> {
    x.zip_map(dy, |v, g| if v > 0.0 { g } else { 0.0 })
}

/// Per-element multipliers applied by inverted dropout: `0` for dropped
/// elements, `1/(1-rate)` for survivors. `None` means identity.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(Option<Tensor2>);

impl DropoutMask {
    pub fn identity() -> Self {
        Self(None)
    }

    pub fn multipliers(&self) -> Option<&Tensor2> {
        self.0.as_ref()
    }

    /// Re-applies the recorded mask to a tensor of the same shape.
    pub fn apply(&self, x: &Tensor2) -> Result<Tensor2> {
        dropout_backward(self, x)
    }
}

pub fn check_dropout_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")))
    }
}

pub fn dropout_forward(
    x: &Tensor2,
    rate: f64,
    mode: Mode,
    rng: &mut SeededRng,
) -> Result<(Tensor2, DropoutMask)> {
    check_dropout_rate(rate)?;
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((x.clone(), DropoutMask::identity()));
    }
    let scale = 1.0 / (1.0 - rate);
    let mut mask = Tensor2::zeros(x.rows(), x.cols());
    for m in mask.data_mut() {
        *m = if rng.random::<f64>() < rate { 0.0 } else { scale };
    }
    let y = x.zip_map(&mask, |v, m| v * m)?;
    Ok((y, DropoutMask(Some(mask))))
}

pub fn dropout_backward(mask: &DropoutMask, dy: &Tensor2) -> Result<Tensor2> {
    match &mask.0 {
        None => Ok(dy.clone()),
        Some(m) => dy.zip_map(m, |g, k| g * k),
    }
}
