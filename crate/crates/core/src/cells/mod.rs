//! Vanilla RNN, peephole LSTM and GRU cells with a shared softmax readout,
//! forward unrolling and backpropagation through time.
//!
//! All weight matrices act on column vectors: an input map has shape
//! `hidden × input`, a recurrent map `hidden × hidden` and the readout
//! `classes × hidden`.

mod gradcheck;
mod gru;
mod lstm;
mod network;
mod rnn;
mod serialize;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::nn::NnError;
use crate::scalar::Scalar;

pub use gradcheck::{compare_gradients, compare_gradients_in, grad_check};
pub use gru::{gru_step, GruCache, GruParams};
pub use lstm::{lstm_step, LstmCache, LstmParams, LstmState};
pub use network::{BpttOutput, CellParams, Forward, Network, Pooling, Readout};
pub use rnn::{rnn_step, RnnCache, RnnParams};
pub use serialize::{read_params, write_params, PARAMS_HEADER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CellError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("feature sequence is empty")]
    EmptySequence,
    #[error("frame width {found} does not match the cell input width {expected}")]
    InputWidth { expected: usize, found: usize },
    #[error("finite-difference step must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("parameter file: {0}")]
    Parse(String),
}

/// Which recurrent unit a network uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellKind {
    Rnn,
    Lstm,
    Gru,
}

impl CellKind {
    pub const ALL: [CellKind; 3] = [CellKind::Rnn, CellKind::Lstm, CellKind::Gru];

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Rnn => "rnn",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rnn" => Ok(CellKind::Rnn),
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(format!("unknown cell kind `{other}` (expected rnn|lstm|gru)")),
        }
    }
}

/// Structural switches shared by all cell kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CellOptions {
    pub use_bias: bool,
    /// LSTM only: diagonal connections from the memory cell into the gates.
    pub peepholes: bool,
}

impl Default for CellOptions {
    fn default() -> Self {
        Self {
            use_bias: false,
            peepholes: true,
        }
    }
}

/// Read-only view of one named parameter tensor.
#[derive(Debug, Clone, Copy)]
pub struct TensorRef<'a, T> {
    pub name: &'static str,
    pub shape: (usize, usize),
    pub values: &'a [T],
}

/// Uniform access to every stored scalar of a parameter (or gradient)
/// container, in a fixed order.
pub trait ParamTensors<T: Scalar>: Clone {
    fn tensors(&self) -> Vec<TensorRef<'_, T>>;

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [T])>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(T::zero());
        }
        z
    }

    fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.values.len()).sum()
    }

    fn global_norm(&self) -> T {
        self.tensors()
            .iter()
            .flat_map(|t| t.values.iter())
            .fold(T::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    fn scale_all(&mut self, s: T) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// `self += alpha · other`. Both sides must come from the same shape.
    fn add_scaled(&mut self, alpha: T, other: &Self) {
        let src = other.tensors();
        for ((_, dst), s) in self.tensors_mut().into_iter().zip(src) {
            debug_assert_eq!(dst.len(), s.values.len());
            for (d, &v) in dst.iter_mut().zip(s.values) {
                *d += alpha * v;
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.values.iter().all(|x| x.is_finite()))
    }
}

/// One recurrent unit. `step_backward` pushes the gradient with respect to
/// the new state back to the previous state and accumulates parameter
/// gradients into `grads`.
pub trait RecurrentCell<T: Scalar>: ParamTensors<T> {
    type State: CellState<T>;
    type Cache;

    fn input_dim(&self) -> usize;

    fn hidden_dim(&self) -> usize;

    fn zero_state(&self) -> Self::State;

    fn step(&self, prev: &Self::State, x: &[T]) -> (Self::State, Self::Cache);

    fn step_backward(
        &self,
        x: &[T],
        prev: &Self::State,
        cache: &Self::Cache,
        d_state: &Self::State,
        grads: &mut Self,
    ) -> Self::State;
}

/// Recurrent state whose hidden part feeds the readout.
pub trait CellState<T>: Clone {
    fn hidden(&self) -> &[T];

    fn hidden_mut(&mut self) -> &mut [T];
}

impl<T: Scalar> CellState<T> for crate::nn::Vector<T> {
    fn hidden(&self) -> &[T] {
        &self.0
    }

    fn hidden_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

/// Number of scalars stored by the recurrent unit itself, excluding the
/// readout projection (see [`readout_param_count`]).
pub fn param_count(kind: CellKind, input: usize, hidden: usize, opts: CellOptions) -> usize {
    let (d, p) = (input, hidden);
    let per_gate = p * d + p * p + if opts.use_bias { p } else { 0 };
    match kind {
        CellKind::Rnn => per_gate,
        CellKind::Gru => 3 * per_gate,
        CellKind::Lstm => 4 * per_gate + if opts.peepholes { 3 * p } else { 0 },
    }
}

pub fn readout_param_count(hidden: usize, classes: usize, use_bias: bool) -> usize {
    classes * hidden + if use_bias { classes } else { 0 }
}

/// `W·x + U·h (+ b)` into a fresh buffer.
#[inline]
pub(crate) fn preactivation<T: Scalar>(
    w: &crate::nn::Matrix<T>,
    x: &[T],
    u: &crate::nn::Matrix<T>,
    h: &[T],
    b: Option<&crate::nn::Vector<T>>,
) -> Vec<T> {
    let mut out = match b {
        Some(b) => b.0.clone(),
        None => vec![T::zero(); w.rows()],
    };
    w.matvec_acc(x, &mut out);
    u.matvec_acc(h, &mut out);
    out
}

#[inline]
pub(crate) fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn check_dims<T: Scalar, C: RecurrentCell<T>>(
    cell: &C,
    prev_hidden: usize,
    x: usize,
) -> Result<(), CellError> {
    if x != cell.input_dim() {
        return Err(NnError::Shape {
            op: "cell input",
            expected: cell.input_dim(),
            found: x,
        }
        .into());
    }
    if prev_hidden != cell.hidden_dim() {
        return Err(NnError::Shape {
            op: "cell state",
            expected: cell.hidden_dim(),
            found: prev_hidden,
        }
        .into());
    }
    Ok(())
}
