use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::data::ImuWindow;
use crate::error::{Error, Result};
use crate::nn::params::prefixed;
use crate::nn::{uniform, BiLstmParams, Linear, LstmParams, Parameters, SeededRng, Tensor2};

/// Recurrent skeleton decoder: the condition sets the initial state, a
/// learned start token feeds every step, and a linear head emits one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderParams {
    pub init_h: Linear,
    pub init_c: Linear,
    /// `1 × frame_width` constant step input.
    pub start: Tensor2,
    pub lstm: LstmParams,
    pub output: Linear,
}

/// Chrono initialisation: forget biases `ln U[1, span − 1]`, input biases
/// their negation, so the initial state survives about `span` steps.
fn chrono_gate_bias(lstm: &mut LstmParams, span: usize, rng: &mut SeededRng) {
    let hidden = lstm.hidden_size();
    let upper = (span as f64 - 1.0).max(1.0);
    let bias = lstm.bias.data_mut();
    for k in 0..hidden {
        let f = if upper > 1.0 { rng.random_range(1.0..upper).ln() } else { 0.0 };
        bias[hidden + k] = f;
        bias[k] = -f;
    }
}

impl DecoderParams {
    /// `frames` is the unroll length the forget gates are tuned for.
    pub fn init(condition: usize, hidden: usize, frame_width: usize, frames: usize, rng: &mut SeededRng) -> Self {
        let init_h = Linear::init(condition, hidden, rng);
        let init_c = Linear::init(condition, hidden, rng);
        let start = uniform(1, frame_width, 1.0 / (frame_width as f64).sqrt(), rng);
        let mut lstm = LstmParams::init(frame_width, hidden, rng);
        chrono_gate_bias(&mut lstm, frames, rng);
        Self {
            init_h,
            init_c,
            start,
            lstm,
            output: Linear::init(hidden, frame_width, rng),
        }
    }

    pub fn zeros(condition: usize, hidden: usize, frame_width: usize) -> Self {
        Self {
            init_h: Linear::zeros(condition, hidden),
            init_c: Linear::zeros(condition, hidden),
            start: Tensor2::zeros(1, frame_width),
            lstm: LstmParams::zeros(frame_width, hidden),
            output: Linear::zeros(hidden, frame_width),
        }
    }

    pub fn condition_size(&self) -> usize {
        self.init_h.input_size()
    }

    pub fn frame_width(&self) -> usize {
        self.output.output_size()
    }
}

impl Parameters for DecoderParams {
    fn named_tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out = prefixed("init_h", self.init_h.named_tensors());
        out.extend(prefixed("init_c", self.init_c.named_tensors()));
        out.push(("start".into(), &self.start));
        out.extend(prefixed("lstm", self.lstm.named_tensors()));
        out.extend(prefixed("output", self.output.named_tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out = self.init_h.tensors_mut();
        out.extend(self.init_c.tensors_mut());
        out.push(&mut self.start);
        out.extend(self.lstm.tensors_mut());
        out.extend(self.output.tensors_mut());
        out
    }
}

/// Every trainable tensor of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub encoder: BiLstmParams,
    /// `2·hidden → embedding_dim`.
    pub head: Linear,
    pub decoder: DecoderParams,
}

impl ModelParams {
    pub fn init(input: usize, embedding_dim: usize, config: &TrainConfig, rng: &mut SeededRng) -> Self {
        let frame_width = config.joints * config.dims;
        Self {
            encoder: BiLstmParams::init(input, config.hidden, config.stacks, rng),
            head: Linear::init(2 * config.hidden, embedding_dim, rng),
            decoder: DecoderParams::init(embedding_dim, config.decoder_hidden, frame_width, config.frames, rng),
        }
    }

    pub fn zeros(input: usize, embedding_dim: usize, config: &TrainConfig) -> Self {
        let frame_width = config.joints * config.dims;
        Self {
            encoder: BiLstmParams::zeros(input, config.hidden, config.stacks),
            head: Linear::zeros(2 * config.hidden, embedding_dim),
            decoder: DecoderParams::zeros(embedding_dim, config.decoder_hidden, frame_width),
        }
    }

    pub fn input_size(&self) -> usize {
        self.encoder.input_size()
    }

    pub fn embedding_dim(&self) -> usize {
        self.head.output_size()
    }
}

impl Parameters for ModelParams {
    fn named_tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out = prefixed("encoder", self.encoder.named_tensors());
        out.extend(prefixed("head", self.head.named_tensors()));
        out.extend(prefixed("decoder", self.decoder.named_tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out = self.encoder.tensors_mut();
        out.extend(self.head.tensors_mut());
        out.extend(self.decoder.tensors_mut());
        out
    }
}

/// Per-feature z-normalisation fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(features: usize) -> Self {
        Self {
            mean: vec![0.0; features],
            std: vec![1.0; features],
        }
    }

    /// Statistics over every time step of every window; near-constant
    /// features keep unit scale.
    pub fn fit(windows: &[&ImuWindow]) -> Result<Self> {
        let first = windows
            .first()
            .ok_or_else(|| Error::Data("no training windows to fit normalisation".into()))?;
        let d = first.features();
        let mut sum = vec![0.0; d];
        let mut count = 0usize;
        for w in windows {
            if w.features() != d {
                return Err(Error::dims("normalisation", format!("{d} features"), w.values.shape_str()));
            }
            for t in 0..w.steps() {
                sum.iter_mut().zip(w.values.row(t)).for_each(|(s, v)| *s += v);
                count += 1;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = vec![0.0; d];
        for w in windows {
            for t in 0..w.steps() {
                sq.iter_mut()
                    .zip(w.values.row(t).iter().zip(&mean))
                    .for_each(|(s, (v, m))| *s += (v - m) * (v - m));
            }
        }
        let std = sq
            .iter()
            .map(|s| {
                let sd = (s / count as f64).sqrt();
                if sd > 1e-8 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn features(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &Tensor2) -> Result<Tensor2> {
        if x.cols() != self.features() {
            return Err(Error::dims("normalisation", format!("{} features", self.features()), x.shape_str()));
        }
        let mut out = x.clone();
        for t in 0..out.rows() {
            for ((v, m), s) in out.row_mut(t).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_names_are_unique_and_aligned() {
        let config = TrainConfig {
            hidden: 3,
            stacks: 2,
            decoder_hidden: 5,
            joints: 2,
            dims: 2,
            ..Default::default()
        };
        let mut p = ModelParams::zeros(4, 6, &config);
        let names: Vec<String> = p.named_tensors().into_iter().map(|(n, _)| n).collect();
        let unique: std::collections::BTreeSet<&String> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
        assert_eq!(p.tensors_mut().len(), names.len());
        assert!(names.contains(&"decoder.start".to_string()));
        assert_eq!(p.embedding_dim(), 6);
    }

    #[test]
    fn normalizer_standardises_and_guards_constant_features() {
        let a = ImuWindow::new("a", Tensor2::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap(), None).unwrap();
        let n = Normalizer::fit(&[&a]).unwrap();
        assert_eq!(n.mean, vec![2.0, 5.0]);
        assert_eq!(n.std, vec![1.0, 1.0]);
        let z = n.apply(&a.values).unwrap();
        assert_eq!(z.data(), &[-1.0, 0.0, 1.0, 0.0]);
    }
}
