//! Small dense numeric kernel: layers with explicit backward passes and Adam.

pub mod bilstm;
pub mod gradcheck;
pub mod layers;
pub mod lstm;
pub mod params;
pub mod tensor;

use rand::Rng;

pub use bilstm::{BiLstmParams, Pooling};
pub use layers::{Linear, Mode};
pub use lstm::LstmParams;
pub use params::{AdamConfig, AdamState, Parameters};
pub use tensor::Tensor2;

/// Portable, seedable stream used for every random draw in the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Matrix with entries drawn uniformly from `[-bound, bound)`.
pub fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut SeededRng) -> Tensor2 {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Tensor2::from_vec(rows, cols, data).expect("length matches shape")
}
