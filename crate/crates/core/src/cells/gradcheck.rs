//! Central-difference gradient checking.
//!
//! The perturbed losses are evaluated in [`DoubleDouble`] by default. In
//! plain `f64` the difference `L(θ+ε) − L(θ−ε)` carries roughly 1e-11 of
//! rounding noise at `ε = 1e-5`, which swamps the relative error of any
//! gradient coordinate below about 1e-6. Truncation error at that step is
//! around 1e-17, so extended precision leaves the comparison limited only
//! by the analytic side.

use super::{CellError, Network, ParamTensors};
use crate::nn::Matrix;
use crate::scalar::{DoubleDouble, Scalar};

/// Largest per-coordinate disagreement between BPTT and central finite
/// differences, measured as `|a - n| / max(|a|, |n|, 1e-12)`.
pub fn grad_check<T: Scalar>(
    network: &Network<T>,
    frames: &Matrix<T>,
    label: usize,
    eps: T,
) -> Result<T, CellError> {
    check_eps(eps)?;
    let analytic = network.backward(frames, label)?.grads;
    compare_gradients(network, frames, label, &analytic, eps)
}

/// Same metric as [`grad_check`] against a caller-supplied gradient.
pub fn compare_gradients<T: Scalar>(
    network: &Network<T>,
    frames: &Matrix<T>,
    label: usize,
    analytic: &Network<T>,
    eps: T,
) -> Result<T, CellError> {
    compare_gradients_in::<DoubleDouble, T>(network, frames, label, analytic, eps)
}

/// [`compare_gradients`] with the finite-difference losses evaluated in
/// scalar type `P`.
pub fn compare_gradients_in<P: Scalar, T: Scalar>(
    network: &Network<T>,
    frames: &Matrix<T>,
    label: usize,
    analytic: &Network<T>,
    eps: T,
) -> Result<T, CellError> {
    check_eps(eps)?;
    let analytic: Vec<T> = analytic
        .tensors()
        .iter()
        .flat_map(|t| t.values.iter().copied())
        .collect();
    if analytic.len() != network.num_scalars() {
        return Err(CellError::Parse(format!(
            "gradient has {} scalars, network has {}",
            analytic.len(),
            network.num_scalars()
        )));
    }
    let numeric = central_differences::<P>(&network.cast(), &frames.cast(), label, P::lit(eps.to_f64_lossy()))?;
    let floor = T::lit(1e-12);
    Ok(analytic
        .iter()
        .zip(numeric)
        .map(|(&a, n)| {
            let n = T::lit(n.to_f64_lossy());
            (a - n).abs() / a.abs().max(n.abs()).max(floor)
        })
        .fold(T::zero(), T::max))
}

fn central_differences<P: Scalar>(
    network: &Network<P>,
    frames: &Matrix<P>,
    label: usize,
    eps: P,
) -> Result<Vec<P>, CellError> {
    let mut probe = network.clone();
    let mut out = Vec::with_capacity(network.num_scalars());
    let n_tensors = probe.tensors_mut().len();
    for ti in 0..n_tensors {
        let len = probe.tensors_mut()[ti].1.len();
        for k in 0..len {
            let original = probe.tensors_mut()[ti].1[k];
            probe.tensors_mut()[ti].1[k] = original + eps;
            let plus = probe.loss(frames, label)?;
            probe.tensors_mut()[ti].1[k] = original - eps;
            let minus = probe.loss(frames, label)?;
            probe.tensors_mut()[ti].1[k] = original;
            out.push((plus - minus) / (eps + eps));
        }
    }
    Ok(out)
}

fn check_eps<T: Scalar>(eps: T) -> Result<(), CellError> {
    if eps > T::zero() && eps.is_finite() {
        Ok(())
    } else {
        Err(CellError::InvalidEpsilon(eps.to_f64_lossy()))
    }
}
