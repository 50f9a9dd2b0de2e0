use super::tensor::Tensor2;
use crate::error::{Error, Result};

/// A fixed, ordered collection of trainable tensors.
///
/// The same type doubles as its own gradient container: gradients are a
/// zeroed clone whose tensors line up one-to-one with the parameters.
pub trait Parameters: Clone {
    fn named_tensors(&self) -> Vec<(String, &Tensor2)>;

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2>;

    fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.zero();
        out
    }

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    fn parameter_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.data().len()).sum()
    }

    fn global_norm(&self) -> f64 {
        self.named_tensors()
            .iter()
            .map(|(_, t)| t.sum_squares())
            .sum::<f64>()
            .sqrt()
    }

    fn all_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.is_finite())
    }
}

/// Prefixes the names of a nested parameter group.
pub fn prefixed<'a>(prefix: &str, inner: Vec<(String, &'a Tensor2)>) -> Vec<(String, &'a Tensor2)> {
    inner
        .into_iter()
        .map(|(name, t)| (format!("{prefix}.{name}"), t))
        .collect()
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<P: Parameters>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm.is_finite() {
        let factor = max_norm / norm;
        for t in grads.tensors_mut() {
            t.scale_in_place(factor);
        }
    }
    norm
}

#[derive(Debug, Clone)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators for Adam, aligned with a parameter set.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Tensor2>,
    second: Vec<Tensor2>,
}

impl AdamState {
    pub fn new<P: Parameters>(params: &P, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor2> = params
            .named_tensors()
            .iter()
            .map(|(_, t)| Tensor2::zeros(t.rows(), t.cols()))
            .collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let named = grads.named_tensors();
        if named.len() != self.first.len() {
            return Err(Error::dims(
                "adam step",
                format!("{} state tensors", self.first.len()),
                format!("{} gradient tensors", named.len()),
            ));
        }
        for ((name, g), m) in named.iter().zip(&self.first) {
            if !g.same_shape(m) {
                return Err(Error::dims(format!("adam step for {name}"), m.shape_str(), g.shape_str()));
            }
            if !g.is_finite() {
                return Err(Error::Numeric(format!("non-finite gradient in {name}")));
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);

        let grads: Vec<&Tensor2> = named.into_iter().map(|(_, g)| g).collect();
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for (((p, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone)]
    struct Scalar(Tensor2);

    impl Parameters for Scalar {
        fn named_tensors(&self) -> Vec<(String, &Tensor2)> {
            vec![("x".into(), &self.0)]
        }
        fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
            vec![&mut self.0]
        }
    }

    fn scalar(v: f64) -> Scalar {
        Scalar(Tensor2::filled(1, 1, v))
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Scalar(Tensor2::from_vec(1, 3, vec![1.0, -2.0, 0.5]).unwrap());
        let before = p.0.clone();
        let mut adam = AdamState::new(&p, AdamConfig::default());
        for _ in 0..5 {
            let zero = p.zeros_like();
            adam.step(&mut p, &zero).unwrap();
        }
        assert_eq!(p.0, before);
        assert_eq!(adam.step_count(), 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar(0.0);
        let config = AdamConfig::default();
        let lr = config.learning_rate;
        let eps = config.epsilon;
        let mut adam = AdamState::new(&p, config);
        adam.step(&mut p, &scalar(1.0)).unwrap();
        // m̂ = 1 and v̂ = 1 after bias correction.
        let expected = -lr / (1.0 + eps);
        assert!((p.0.get(0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn minimises_quadratic_monotonically() {
        let mut p = scalar(1.0);
        let mut adam = AdamState::new(
            &p,
            AdamConfig {
                learning_rate: 0.05,
                ..AdamConfig::default()
            },
        );
        let mut last = 1.0f64;
        for _ in 0..10 {
            let x = p.0.get(0, 0);
            adam.step(&mut p, &scalar(2.0 * x)).unwrap();
            let now = p.0.get(0, 0).abs();
            assert!(now < last, "{now} !< {last}");
            last = now;
        }
    }

    #[test]
    fn nan_gradient_names_tensor() {
        let mut p = scalar(1.0);
        let mut adam = AdamState::new(&p, AdamConfig::default());
        let err = adam.step(&mut p, &scalar(f64::NAN)).unwrap_err();
        assert!(matches!(&err, Error::Numeric(m) if m.contains('x')));
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut g = Scalar(Tensor2::from_vec(1, 2, vec![30.0, 40.0]).unwrap());
        let before = clip_global_norm(&mut g, 5.0);
        assert_eq!(before, 50.0);
        assert!((g.global_norm() - 5.0).abs() < 1e-12);
        let mut small = scalar(1.0);
        clip_global_norm(&mut small, 5.0);
        assert_eq!(small.0.get(0, 0), 1.0);
    }
}
