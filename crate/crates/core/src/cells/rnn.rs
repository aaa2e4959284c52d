use rand::Rng;

use super::{add_into, check_dims, preactivation, CellError, ParamTensors, RecurrentCell, TensorRef};
use crate::nn::{Matrix, Vector};
use crate::scalar::Scalar;

/// `s_t = tanh(W s_{t-1} + U x_t + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnParams<T> {
    /// Input map, `hidden × input`.
    pub u: Matrix<T>,
    /// Recurrent map, `hidden × hidden`.
    pub w: Matrix<T>,
    pub b: Option<Vector<T>>,
}

#[derive(Clone, Debug)]
pub struct RnnCache<T> {
    s: Vec<T>,
}

impl<T: Scalar> RnnParams<T> {
    pub fn zeros(input: usize, hidden: usize, use_bias: bool) -> Self {
        Self {
            u: Matrix::zeros(hidden, input),
            w: Matrix::zeros(hidden, hidden),
            b: use_bias.then(|| Vector::zeros(hidden)),
        }
    }

    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, use_bias: bool, rng: &mut R) -> Self {
        Self {
            u: Matrix::uniform(hidden, input, fan_in_bound(input), rng),
            w: Matrix::uniform(hidden, hidden, fan_in_bound(hidden), rng),
            b: use_bias.then(|| Vector::zeros(hidden)),
        }
    }
}

pub(crate) fn fan_in_bound<T: Scalar>(fan_in: usize) -> T {
    T::one() / T::from_usize_lossy(fan_in.max(1)).sqrt()
}

/// One vanilla RNN step.
pub fn rnn_step<T: Scalar>(
    params: &RnnParams<T>,
    s_prev: &Vector<T>,
    x: &Vector<T>,
) -> Result<Vector<T>, CellError> {
    check_dims(params, s_prev.len(), x.len())?;
    Ok(params.step(s_prev, x.as_slice()).0)
}

impl<T: Scalar> ParamTensors<T> for RnnParams<T> {
    fn tensors(&self) -> Vec<TensorRef<'_, T>> {
        let mut out = vec![
            TensorRef {
                name: "u",
                shape: self.u.shape(),
                values: self.u.as_slice(),
            },
            TensorRef {
                name: "w",
                shape: self.w.shape(),
                values: self.w.as_slice(),
            },
        ];
        if let Some(b) = &self.b {
            out.push(TensorRef {
                name: "b",
                shape: (b.len(), 1),
                values: b.as_slice(),
            });
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        let mut out = vec![("u", self.u.as_mut_slice()), ("w", self.w.as_mut_slice())];
        if let Some(b) = &mut self.b {
            out.push(("b", b.as_mut_slice()));
        }
        out
    }
}

impl<T: Scalar> RecurrentCell<T> for RnnParams<T> {
    type State = Vector<T>;
    type Cache = RnnCache<T>;

    fn input_dim(&self) -> usize {
        self.u.cols()
    }

    fn hidden_dim(&self) -> usize {
        self.w.rows()
    }

    fn zero_state(&self) -> Vector<T> {
        Vector::zeros(self.hidden_dim())
    }

    fn step(&self, prev: &Vector<T>, x: &[T]) -> (Vector<T>, RnnCache<T>) {
        let mut s = preactivation(&self.u, x, &self.w, &prev.0, self.b.as_ref());
        s.iter_mut().for_each(|a| *a = a.tanh());
        (Vector(s.clone()), RnnCache { s })
    }

    fn step_backward(
        &self,
        x: &[T],
        prev: &Vector<T>,
        cache: &RnnCache<T>,
        d_state: &Vector<T>,
        grads: &mut Self,
    ) -> Vector<T> {
        let da: Vec<T> = d_state
            .0
            .iter()
            .zip(&cache.s)
            .map(|(&ds, &s)| ds * (T::one() - s * s))
            .collect();
        grads.u.outer_acc(&da, x);
        grads.w.outer_acc(&da, &prev.0);
        if let Some(b) = &mut grads.b {
            add_into(b.as_mut_slice(), &da);
        }
        let mut d_prev = vec![T::zero(); self.hidden_dim()];
        self.w.matvec_t_acc(&da, &mut d_prev);
        Vector(d_prev)
    }
}
