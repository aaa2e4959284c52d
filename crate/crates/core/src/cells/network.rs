use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::rnn::fan_in_bound;
use super::{
    add_into, CellError, CellKind, CellOptions, CellState, GruParams, LstmParams, ParamTensors,
    RecurrentCell, RnnParams, TensorRef,
};
use crate::nn::{cross_entropy, softmax_cross_entropy_grad, softmax_in_place, Matrix, Vector};
use crate::scalar::Scalar;

/// How the hidden-state sequence is reduced before the softmax layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Pooling {
    /// Final timestep only.
    #[default]
    Last,
    Mean,
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Last => "last",
            Pooling::Mean => "mean",
        })
    }
}

impl FromStr for Pooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "last" => Ok(Pooling::Last),
            "mean" => Ok(Pooling::Mean),
            other => Err(format!("unknown readout `{other}` (expected last|mean)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellParams<T> {
    Rnn(RnnParams<T>),
    Lstm(LstmParams<T>),
    Gru(GruParams<T>),
}

/// Softmax output layer: `logits = V_out · pooled(h) (+ b_out)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Readout<T> {
    /// `classes × hidden`
    pub v: Matrix<T>,
    pub b: Option<Vector<T>>,
    pub pooling: Pooling,
}

/// A recurrent cell followed by the softmax readout.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    pub cell: CellParams<T>,
    pub readout: Readout<T>,
}

/// Result of unrolling a network over one sequence.
#[derive(Clone, Debug)]
pub struct Forward<T> {
    /// Hidden state after each frame, `T × hidden`.
    pub states: Vec<Vector<T>>,
    pub logits: Vector<T>,
    pub probs: Vector<T>,
}

#[derive(Clone, Debug)]
pub struct BpttOutput<T> {
    pub loss: T,
    pub probs: Vector<T>,
    /// Same layout as the network's parameters.
    pub grads: Network<T>,
    /// `‖∂loss/∂h_t‖₂` for every timestep, earliest first.
    pub hidden_grad_norms: Vec<T>,
}

impl<T: Scalar> Network<T> {
    /// Seeded initialization: weights uniform on `±1/√fan_in`, biases zero.
    pub fn init<R: Rng + ?Sized>(
        kind: CellKind,
        input: usize,
        hidden: usize,
        classes: usize,
        opts: CellOptions,
        pooling: Pooling,
        rng: &mut R,
    ) -> Self {
        let cell = match kind {
            CellKind::Rnn => CellParams::Rnn(RnnParams::init(input, hidden, opts.use_bias, rng)),
            CellKind::Lstm => CellParams::Lstm(LstmParams::init(
                input,
                hidden,
                opts.use_bias,
                opts.peepholes,
                rng,
            )),
            CellKind::Gru => CellParams::Gru(GruParams::init(input, hidden, opts.use_bias, rng)),
        };
        let readout = Readout {
            v: Matrix::uniform(classes, hidden, fan_in_bound(hidden), rng),
            b: opts.use_bias.then(|| Vector::zeros(classes)),
            pooling,
        };
        Self { cell, readout }
    }

    /// All-zero parameters of the given layout.
    pub fn zeros(
        kind: CellKind,
        input: usize,
        hidden: usize,
        classes: usize,
        opts: CellOptions,
        pooling: Pooling,
    ) -> Self {
        let cell = match kind {
            CellKind::Rnn => CellParams::Rnn(RnnParams::zeros(input, hidden, opts.use_bias)),
            CellKind::Lstm => CellParams::Lstm(LstmParams::zeros(
                input,
                hidden,
                opts.use_bias,
                opts.peepholes,
            )),
            CellKind::Gru => CellParams::Gru(GruParams::zeros(input, hidden, opts.use_bias)),
        };
        let readout = Readout {
            v: Matrix::zeros(classes, hidden),
            b: opts.use_bias.then(|| Vector::zeros(classes)),
            pooling,
        };
        Self { cell, readout }
    }

    /// Same network with every parameter converted to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let opts = self.options();
        let mut out = Network::<U>::zeros(
            self.kind(),
            self.input_dim(),
            self.hidden_dim(),
            self.classes(),
            opts,
            self.readout.pooling,
        );
        for ((_, dst), src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            for (d, &s) in dst.iter_mut().zip(src.values) {
                *d = U::lit(s.to_f64_lossy());
            }
        }
        out
    }

    pub fn kind(&self) -> CellKind {
        match self.cell {
            CellParams::Rnn(_) => CellKind::Rnn,
            CellParams::Lstm(_) => CellKind::Lstm,
            CellParams::Gru(_) => CellKind::Gru,
        }
    }

    pub fn input_dim(&self) -> usize {
        match &self.cell {
            CellParams::Rnn(c) => c.input_dim(),
            CellParams::Lstm(c) => c.input_dim(),
            CellParams::Gru(c) => c.input_dim(),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.readout.v.cols()
    }

    pub fn classes(&self) -> usize {
        self.readout.v.rows()
    }

    pub fn options(&self) -> CellOptions {
        let peepholes = match &self.cell {
            CellParams::Lstm(c) => c.has_peepholes(),
            _ => false,
        };
        CellOptions {
            use_bias: self.readout.b.is_some(),
            peepholes,
        }
    }

    /// Runs the cell left to right from a zero state and applies the readout.
    pub fn forward(&self, frames: &Matrix<T>) -> Result<Forward<T>, CellError> {
        self.check_frames(frames)?;
        match &self.cell {
            CellParams::Rnn(c) => Ok(forward_with(c, &self.readout, frames)),
            CellParams::Lstm(c) => Ok(forward_with(c, &self.readout, frames)),
            CellParams::Gru(c) => Ok(forward_with(c, &self.readout, frames)),
        }
    }

    /// Reverse-mode gradient of `cross_entropy(softmax(logits), label)` with
    /// respect to every parameter, accumulated over all timesteps.
    pub fn backward(&self, frames: &Matrix<T>, label: usize) -> Result<BpttOutput<T>, CellError> {
        self.check_frames(frames)?;
        if label >= self.classes() {
            return Err(crate::nn::NnError::Index {
                index: label,
                len: self.classes(),
            }
            .into());
        }
        let (loss, probs, cell, readout, norms) = match &self.cell {
            CellParams::Rnn(c) => {
                let (l, p, g, r, n) = bptt_with(c, &self.readout, frames, label)?;
                (l, p, CellParams::Rnn(g), r, n)
            }
            CellParams::Lstm(c) => {
                let (l, p, g, r, n) = bptt_with(c, &self.readout, frames, label)?;
                (l, p, CellParams::Lstm(g), r, n)
            }
            CellParams::Gru(c) => {
                let (l, p, g, r, n) = bptt_with(c, &self.readout, frames, label)?;
                (l, p, CellParams::Gru(g), r, n)
            }
        };
        Ok(BpttOutput {
            loss,
            probs,
            grads: Network { cell, readout },
            hidden_grad_norms: norms,
        })
    }

    /// Loss only, without gradients.
    pub fn loss(&self, frames: &Matrix<T>, label: usize) -> Result<T, CellError> {
        let fwd = self.forward(frames)?;
        Ok(cross_entropy(&fwd.probs, label)?)
    }

    /// Predicted class, ties resolved toward the lowest index.
    pub fn predict(&self, frames: &Matrix<T>) -> Result<usize, CellError> {
        let fwd = self.forward(frames)?;
        Ok(fwd.probs.argmax().unwrap_or(0))
    }

    fn check_frames(&self, frames: &Matrix<T>) -> Result<(), CellError> {
        if frames.rows() == 0 {
            return Err(CellError::EmptySequence);
        }
        if frames.cols() != self.input_dim() {
            return Err(CellError::InputWidth {
                expected: self.input_dim(),
                found: frames.cols(),
            });
        }
        Ok(())
    }
}

fn pooled<T: Scalar>(pooling: Pooling, hidden: &[&[T]]) -> Vec<T> {
    match pooling {
        Pooling::Last => hidden.last().map(|h| h.to_vec()).unwrap_or_default(),
        Pooling::Mean => {
            let mut acc = vec![T::zero(); hidden.first().map_or(0, |h| h.len())];
            for h in hidden {
                add_into(&mut acc, h);
            }
            let n = T::from_usize_lossy(hidden.len());
            acc.iter_mut().for_each(|a| *a /= n);
            acc
        }
    }
}

fn readout_logits<T: Scalar>(readout: &Readout<T>, pooled: &[T]) -> Vec<T> {
    let mut logits = match &readout.b {
        Some(b) => b.0.clone(),
        None => vec![T::zero(); readout.v.rows()],
    };
    readout.v.matvec_acc(pooled, &mut logits);
    logits
}

fn forward_with<T: Scalar, C: RecurrentCell<T>>(
    cell: &C,
    readout: &Readout<T>,
    frames: &Matrix<T>,
) -> Forward<T> {
    let mut state = cell.zero_state();
    let mut states = Vec::with_capacity(frames.rows());
    for t in 0..frames.rows() {
        state = cell.step(&state, frames.row(t)).0;
        states.push(Vector(state.hidden().to_vec()));
    }
    let hidden: Vec<&[T]> = states.iter().map(|s| s.as_slice()).collect();
    let logits = readout_logits(readout, &pooled(readout.pooling, &hidden));
    let mut probs = logits.clone();
    softmax_in_place(&mut probs);
    Forward {
        states,
        logits: Vector(logits),
        probs: Vector(probs),
    }
}

type BpttParts<T, C> = (T, Vector<T>, C, Readout<T>, Vec<T>);

fn bptt_with<T: Scalar, C: RecurrentCell<T>>(
    cell: &C,
    readout: &Readout<T>,
    frames: &Matrix<T>,
    label: usize,
) -> Result<BpttParts<T, C>, CellError> {
    let steps = frames.rows();
    let mut states = Vec::with_capacity(steps + 1);
    let mut caches = Vec::with_capacity(steps);
    states.push(cell.zero_state());
    for t in 0..steps {
        let (s, c) = cell.step(&states[t], frames.row(t));
        states.push(s);
        caches.push(c);
    }
    let hidden: Vec<&[T]> = states[1..].iter().map(|s| s.hidden()).collect();
    let pooled_h = pooled(readout.pooling, &hidden);
    let mut probs = readout_logits(readout, &pooled_h);
    softmax_in_place(&mut probs);
    let probs = Vector(probs);
    let loss = cross_entropy(&probs, label)?;
    let d_logits = softmax_cross_entropy_grad(&probs, label)?;

    let mut d_readout = Readout {
        v: Matrix::zeros(readout.v.rows(), readout.v.cols()),
        b: readout.b.as_ref().map(|b| Vector::zeros(b.len())),
        pooling: readout.pooling,
    };
    d_readout.v.outer_acc(&d_logits.0, &pooled_h);
    if let Some(b) = &mut d_readout.b {
        add_into(b.as_mut_slice(), &d_logits.0);
    }
    let mut d_pooled = vec![T::zero(); readout.v.cols()];
    readout.v.matvec_t_acc(&d_logits.0, &mut d_pooled);
    if readout.pooling == Pooling::Mean {
        let n = T::from_usize_lossy(steps);
        d_pooled.iter_mut().for_each(|d| *d /= n);
    }

    let mut grads = cell.zeros_like();
    let mut norms = vec![T::zero(); steps];
    let mut d_state = cell.zero_state();
    for t in (0..steps).rev() {
        if readout.pooling == Pooling::Mean || t == steps - 1 {
            add_into(d_state.hidden_mut(), &d_pooled);
        }
        norms[t] = d_state
            .hidden()
            .iter()
            .fold(T::zero(), |acc, &g| acc + g * g)
            .sqrt();
        d_state = cell.step_backward(frames.row(t), &states[t], &caches[t], &d_state, &mut grads);
    }
    Ok((loss, probs, grads, d_readout, norms))
}

impl<T: Scalar> ParamTensors<T> for Network<T> {
    fn tensors(&self) -> Vec<TensorRef<'_, T>> {
        let mut out = match &self.cell {
            CellParams::Rnn(c) => c.tensors(),
            CellParams::Lstm(c) => c.tensors(),
            CellParams::Gru(c) => c.tensors(),
        };
        out.push(TensorRef {
            name: "v_out",
            shape: self.readout.v.shape(),
            values: self.readout.v.as_slice(),
        });
        if let Some(b) = &self.readout.b {
            out.push(TensorRef {
                name: "b_out",
                shape: (b.len(), 1),
                values: b.as_slice(),
            });
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        let mut out = match &mut self.cell {
            CellParams::Rnn(c) => c.tensors_mut(),
            CellParams::Lstm(c) => c.tensors_mut(),
            CellParams::Gru(c) => c.tensors_mut(),
        };
        out.push(("v_out", self.readout.v.as_mut_slice()));
        if let Some(b) = &mut self.readout.b {
            out.push(("b_out", b.as_mut_slice()));
        }
        out
    }
}
