use super::{NnError, Vector};
use crate::scalar::Scalar;

/// Floor applied to the target probability before taking the log.
pub const LOSS_FLOOR: f64 = 1e-15;

/// Logistic sigmoid. Evaluated on the side of zero where `exp` cannot
/// overflow, so saturated inputs give exactly 0 or 1.
#[inline]
pub fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Scalar>(v: &Vector<T>) -> Vector<T> {
    Vector(v.0.iter().map(|&x| sigmoid_scalar(x)).collect())
}

pub fn tanh_act<T: Scalar>(v: &Vector<T>) -> Vector<T> {
    Vector(v.0.iter().map(|&x| x.tanh()).collect())
}

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(v: &Vector<T>) -> Vector<T> {
    let mut out = v.0.clone();
    softmax_in_place(&mut out);
    Vector(out)
}

pub fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// `-ln(max(p[label], 1e-15))`. A NaN probability gives a NaN loss rather
/// than the floor, so divergence stays visible.
pub fn cross_entropy<T: Scalar>(p: &Vector<T>, label: usize) -> Result<T, NnError> {
    let &pl = p.0.get(label).ok_or(NnError::Index {
        index: label,
        len: p.len(),
    })?;
    if pl.is_nan() {
        return Ok(pl);
    }
    Ok(-pl.max(T::lit(LOSS_FLOOR)).ln())
}

/// Gradient of `cross_entropy(softmax(logits), label)` with respect to the
/// logits, given the softmax output: `p - onehot(label)`.
pub fn softmax_cross_entropy_grad<T: Scalar>(
    probs: &Vector<T>,
    label: usize,
) -> Result<Vector<T>, NnError> {
    if label >= probs.len() {
        return Err(NnError::Index {
            index: label,
            len: probs.len(),
        });
    }
    let mut g = probs.clone();
    g[label] -= T::one();
    Ok(g)
}
