//! Central finite-difference gradient checking.
//!
//! Kept independent of every backward pass it is used to verify: it only
//! ever evaluates the scalar loss.

use super::params::Parameters;
use super::tensor::Tensor2;

/// Central-difference step. Truncation error grows as `STEP²` and rounding
/// noise as `ε·|L|/STEP`; at `1e-4` both stay near `1e-10` for the O(1–10)
/// losses checked here.
pub const STEP: f64 = 1e-4;

/// Denominator floor for relative errors: entries below it are compared in
/// absolute terms, since finite differences cannot resolve them further.
pub const DENOM_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs().max(numeric.abs()).max(DENOM_FLOOR))
}

/// `∂f/∂x` for every element of `x` by central differences.
pub fn numeric_grad(x: &Tensor2, f: impl Fn(&Tensor2) -> f64) -> Tensor2 {
    let mut out = Tensor2::zeros(x.rows(), x.cols());
    let mut probe = x.clone();
    for i in 0..x.data().len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + STEP;
        let up = f(&probe);
        probe.data_mut()[i] = orig - STEP;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (up - down) / (2.0 * STEP);
    }
    out
}

/// Numeric gradient of `f` with respect to every parameter tensor.
pub fn numeric_param_grads<P: Parameters>(params: &P, f: impl Fn(&P) -> f64) -> P {
    let mut grads = params.zeros_like();
    let mut probe = params.clone();
    let count = params.named_tensors().len();
    for k in 0..count {
        let len = params.named_tensors()[k].1.data().len();
        for i in 0..len {
            let orig = probe.tensors_mut()[k].data()[i];
            probe.tensors_mut()[k].data_mut()[i] = orig + STEP;
            let up = f(&probe);
            probe.tensors_mut()[k].data_mut()[i] = orig - STEP;
            let down = f(&probe);
            probe.tensors_mut()[k].data_mut()[i] = orig;
            grads.tensors_mut()[k].data_mut()[i] = (up - down) / (2.0 * STEP);
        }
    }
    grads
}

/// Largest element-wise relative error between two gradient sets, with the
/// name of the tensor where it occurs.
pub fn max_param_error<P: Parameters>(analytic: &P, numeric: &P) -> (f64, String) {
    let mut worst = (0.0, String::new());
    for ((name, a), (_, n)) in analytic.named_tensors().into_iter().zip(numeric.named_tensors()) {
        let e = max_error(a, n);
        if e > worst.0 || worst.1.is_empty() {
            worst = (e, name);
        }
    }
    worst
}

pub fn max_error(analytic: &Tensor2, numeric: &Tensor2) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

pub fn assert_close(analytic: &Tensor2, numeric: &Tensor2, tol: f64, what: &str) {
    assert_eq!(analytic.shape(), numeric.shape(), "{what}: shape");
    let e = max_error(analytic, numeric);
    assert!(e < tol, "{what}: relative error {e:e} exceeds {tol:e}");
}

pub fn assert_grads_match<P: Parameters>(params: &P, analytic: &P, f: impl Fn(&P) -> f64, tol: f64) {
    let numeric = numeric_param_grads(params, f);
    let (e, name) = max_param_error(analytic, &numeric);
    assert!(e < tol, "{name}: relative error {e:e} exceeds {tol:e}");
}
