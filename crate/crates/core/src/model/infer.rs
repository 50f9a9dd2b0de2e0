//! Trained model, unseen-class prediction and skeleton explanations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::matching::{class_probabilities, similarity_scores};
use super::network::{decoder_forward, encoder_forward, sample_mask};
use super::params::{ModelParams, Normalizer};
use crate::data::{ClassSemanticSet, ImuWindow, SkeletonSequence};
use crate::error::{Error, Result};
use crate::metrics::{nearest_reference, CostModel};
use crate::nn::bilstm::to_time_major;
use crate::nn::{Mode, SeededRng, Tensor2};

/// Everything needed to run inference, as stored in a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: TrainConfig,
    pub seen_classes: Vec<String>,
    pub unseen_classes: Vec<String>,
    pub normalizer: Normalizer,
    pub params: ModelParams,
}

impl Model {
    /// Normalised, time-major batch of windows.
    pub(crate) fn prepare(&self, windows: &[&ImuWindow]) -> Result<Vec<Tensor2>> {
        let normed = windows
            .iter()
            .map(|w| {
                self.normalizer.apply(&w.values).map_err(|_| {
                    Error::dims(
                        format!("window `{}`", w.id),
                        format!("{} features", self.normalizer.features()),
                        w.values.shape_str(),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        to_time_major(&normed.iter().collect::<Vec<_>>())
    }

    /// Eval-mode feature vectors, one row per window, processed in chunks of
    /// the training batch size.
    pub(crate) fn features(&self, windows: &[&ImuWindow]) -> Result<Tensor2> {
        let mut parts = Vec::new();
        for chunk in windows.chunks(self.config.batch_size.max(1)) {
            let inputs = self.prepare(chunk)?;
            parts.push(super::network::encode_batch(&self.params, &inputs, self.config.pooling)?);
        }
        Tensor2::vstack(&parts.iter().collect::<Vec<_>>())
    }

    /// Decoded skeletons for each condition row.
    pub(crate) fn decode_rows(&self, conditions: &Tensor2, class: &[&str]) -> Result<Vec<SkeletonSequence>> {
        let (frames, _) = decoder_forward(&self.params.decoder, conditions, self.config.frames)?;
        let width = self.params.decoder.frame_width();
        (0..conditions.rows())
            .map(|r| {
                let mut coords = Tensor2::zeros(frames.len(), width);
                for (t, f) in frames.iter().enumerate() {
                    coords.row_mut(t).copy_from_slice(f.row(r));
                }
                SkeletonSequence::new(coords, self.config.joints, self.config.dims, class[r])
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub predicted_class: String,
    pub scores: BTreeMap<String, f64>,
    pub probabilities: BTreeMap<String, f64>,
}

impl Prediction {
    /// Scores `f` against `classes`; the first class in name order wins ties.
    pub fn from_features(f: &[f64], classes: &ClassSemanticSet) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Data("no candidate classes to predict from".into()));
        }
        let scores = similarity_scores(f, classes)?;
        let probabilities = class_probabilities(&scores)?;
        let mut best: Option<(&String, f64)> = None;
        for (c, &b) in &scores {
            if best.is_none_or(|(_, bb)| b > bb) {
                best = Some((c, b));
            }
        }
        let predicted_class = best.expect("nonempty").0.clone();
        Ok(Self {
            predicted_class,
            scores,
            probabilities,
        })
    }
}

/// The generated skeleton for a prediction and its nearest seen reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub sample_id: String,
    pub predicted_class: String,
    pub probabilities: BTreeMap<String, f64>,
    pub matching_seen_class: String,
    /// Position of the matching sequence in the reference list.
    pub reference_index: usize,
    pub dtw_to_match: f64,
    #[serde(skip)]
    pub generated: SkeletonSequence,
}

/// Feature vector `f` of one window.
pub fn encode_imu(x: &ImuWindow, model: &Model, mode: Mode, rng: &mut SeededRng) -> Result<Vec<f64>> {
    let inputs = model.prepare(&[x])?;
    let mask = sample_mask(1, 2 * model.params.encoder.hidden_size(), model.config.dropout, mode, rng)?;
    let (f, _) = encoder_forward(&model.params, &inputs, model.config.pooling, &mask)?;
    Ok(f.into_vec())
}

/// Skeleton sequence decoded from `condition`.
pub fn decode_skeleton(
    condition: &[f64],
    params: &ModelParams,
    frames: usize,
    joints: usize,
    dims: usize,
) -> Result<SkeletonSequence> {
    let width = params.decoder.frame_width();
    if joints * dims != width {
        return Err(Error::dims("decode skeleton", format!("{joints}x{dims} joints"), format!("frame width {width}")));
    }
    let (out, _) = decoder_forward(&params.decoder, &Tensor2::row_vector(condition), frames)?;
    let mut coords = Tensor2::zeros(frames, width);
    for (t, f) in out.iter().enumerate() {
        coords.row_mut(t).copy_from_slice(f.row(0));
    }
    SkeletonSequence::new(coords, joints, dims, "generated")
}

fn eval_features(x: &ImuWindow, model: &Model) -> Result<Vec<f64>> {
    // Eval mode draws nothing from the stream.
    let mut rng = <SeededRng as rand::SeedableRng>::seed_from_u64(0);
    encode_imu(x, model, Mode::Eval, &mut rng)
}

/// Eval-mode prediction restricted to the given unseen classes.
pub fn predict_unseen(x: &ImuWindow, model: &Model, unseen: &ClassSemanticSet) -> Result<Prediction> {
    Prediction::from_features(&eval_features(x, model)?, unseen)
}

/// Prediction plus the decoded skeleton and its nearest seen reference under
/// DTW with `cost`.
pub fn explain<S: AsRef<str>>(
    x: &ImuWindow,
    model: &Model,
    unseen: &ClassSemanticSet,
    references: &[(S, &SkeletonSequence)],
    cost: &CostModel,
) -> Result<Explanation> {
    let f = eval_features(x, model)?;
    let prediction = Prediction::from_features(&f, unseen)?;
    let mut generated = decode_skeleton(&f, &model.params, model.config.frames, model.config.joints, model.config.dims)?;
    generated.class = prediction.predicted_class.clone();
    build_explanation(&x.id, prediction, generated, references, cost)
}

pub(crate) fn build_explanation<S: AsRef<str>>(
    sample_id: &str,
    prediction: Prediction,
    generated: SkeletonSequence,
    references: &[(S, &SkeletonSequence)],
    cost: &CostModel,
) -> Result<Explanation> {
    let (index, distance) = nearest_reference(&generated, references, cost)?;
    Ok(Explanation {
        sample_id: sample_id.to_string(),
        predicted_class: prediction.predicted_class,
        probabilities: prediction.probabilities,
        matching_seen_class: references[index].0.as_ref().to_string(),
        reference_index: index,
        dtw_to_match: distance,
        generated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::dtw_distance;
    use crate::nn::{uniform, Parameters};
    use rand::SeedableRng;

    fn tiny(seed: u64) -> Model {
        let config = TrainConfig {
            hidden: 4,
            stacks: 2,
            decoder_hidden: 5,
            frames: 6,
            joints: 2,
            dims: 2,
            ..Default::default()
        };
        let mut rng = SeededRng::seed_from_u64(seed);
        Model {
            params: ModelParams::init(3, 4, &config, &mut rng),
            config,
            seen_classes: vec!["s1".into(), "s2".into()],
            unseen_classes: vec!["u1".into(), "u2".into()],
            normalizer: Normalizer::identity(3),
        }
    }

    fn window(seed: u64) -> ImuWindow {
        let mut rng = SeededRng::seed_from_u64(seed);
        ImuWindow::new("w", uniform(7, 3, 1.0, &mut rng), None).unwrap()
    }

    fn set(vectors: &[(&str, Vec<f64>)]) -> ClassSemanticSet {
        let map = vectors.iter().map(|(c, v)| (c.to_string(), v.clone())).collect();
        ClassSemanticSet::from_vectors(vectors[0].1.len(), map).unwrap()
    }

    #[test]
    fn zero_parameters_give_head_bias() {
        let mut m = tiny(1);
        m.params.zero();
        m.params.head.bias = Tensor2::row_vector(&[0.5, -1.0, 2.0, 0.25]);
        let mut rng = SeededRng::seed_from_u64(0);
        assert_eq!(encode_imu(&window(2), &m, Mode::Train, &mut rng).unwrap(), vec![0.5, -1.0, 2.0, 0.25]);
        let s = decode_skeleton(&[1.0, 2.0, 3.0, 4.0], &m.params, 6, 2, 2).unwrap();
        assert!(s.coords().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eval_encoding_is_deterministic() {
        let m = tiny(3);
        let x = window(4);
        let mut a = SeededRng::seed_from_u64(1);
        let mut b = SeededRng::seed_from_u64(99);
        assert_eq!(
            encode_imu(&x, &m, Mode::Eval, &mut a).unwrap(),
            encode_imu(&x, &m, Mode::Eval, &mut b).unwrap()
        );
        let c = [0.3, -0.2, 0.1, 0.9];
        assert_eq!(
            decode_skeleton(&c, &m.params, 6, 2, 2).unwrap(),
            decode_skeleton(&c, &m.params, 6, 2, 2).unwrap()
        );
        assert!(decode_skeleton(&c, &m.params, 6, 3, 2).is_err());
    }

    #[test]
    fn prediction_rules() {
        let one = set(&[("only", vec![1.0, 0.0])]);
        let p = Prediction::from_features(&[-3.0, 2.0], &one).unwrap();
        assert_eq!(p.predicted_class, "only");
        assert_eq!(p.probabilities["only"], 1.0);

        let ortho = set(&[("a", vec![2.0, 0.0, 0.0]), ("b", vec![0.0, 3.0, 0.0]), ("c", vec![0.0, 0.0, 1.0])]);
        assert_eq!(Prediction::from_features(&[0.0, 3.0, 0.0], &ortho).unwrap().predicted_class, "b");

        let tie = set(&[("zz", vec![1.0, 0.0]), ("aa", vec![1.0, 0.0])]);
        assert_eq!(Prediction::from_features(&[1.0, 1.0], &tie).unwrap().predicted_class, "aa");

        let scaled = set(&[("a", vec![20.0, 0.0, 0.0]), ("b", vec![0.0, 0.3, 0.0]), ("c", vec![0.0, 0.0, 7.0])]);
        let f = [0.2, 0.5, -0.1];
        assert_eq!(
            Prediction::from_features(&f, &ortho).unwrap(),
            Prediction::from_features(&f, &scaled).unwrap()
        );
    }

    #[test]
    fn explanation_matches_identical_reference_and_recomputes() {
        let m = tiny(5);
        let x = window(6);
        let unseen = set(&[("u1", vec![1.0, 0.0, 0.0, 0.0]), ("u2", vec![0.0, 1.0, 0.0, 0.0])]);
        let f = eval_features(&x, &m).unwrap();
        let generated = decode_skeleton(&f, &m.params, 6, 2, 2).unwrap();
        let mut shifted = generated.coords().clone();
        shifted.data_mut().iter_mut().for_each(|v| *v += 0.4);
        let far = SkeletonSequence::unchecked(shifted, 2, 2, "s1");
        let cost = CostModel::identity(4, 1e-9).unwrap();

        let refs = [("s1", &far), ("s2", &generated)];
        let e = explain(&x, &m, &unseen, &refs, &cost).unwrap();
        assert_eq!((e.matching_seen_class.as_str(), e.dtw_to_match), ("s2", 0.0));

        let refs = [("s1", &far)];
        let e = explain(&x, &m, &unseen, &refs, &cost).unwrap();
        assert_eq!(e.dtw_to_match, dtw_distance(&e.generated, &far, &cost).unwrap());

        let refs = [("s2", &generated), ("s1", &generated)];
        assert_eq!(explain(&x, &m, &unseen, &refs, &cost).unwrap().matching_seen_class, "s1");
    }
}
