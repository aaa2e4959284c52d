use rand::Rng;

use super::rnn::fan_in_bound;
use super::{add_into, check_dims, preactivation, CellError, CellState, ParamTensors, RecurrentCell, TensorRef};
use crate::nn::{sigmoid_scalar, Matrix, Vector};
use crate::scalar::Scalar;

/// LSTM with optional diagonal peepholes. Each gate `g` reads its own
/// `W_g`, `U_g` and (for i, f, o) peephole `V_g`:
///
/// ```text
/// i  = σ(W_i x + U_i h_prev + V_i ⊙ c_prev + b_i)
/// f  = σ(W_f x + U_f h_prev + V_f ⊙ c_prev + b_f)
/// c̃  = tanh(W_c x + U_c h_prev + b_c)
/// c  = f ⊙ c_prev + i ⊙ c̃
/// o  = σ(W_o x + U_o h_prev + V_o ⊙ c + b_o)
/// h  = o ⊙ tanh(c)
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<T> {
    pub w_i: Matrix<T>,
    pub w_f: Matrix<T>,
    pub w_o: Matrix<T>,
    pub w_c: Matrix<T>,
    pub u_i: Matrix<T>,
    pub u_f: Matrix<T>,
    pub u_o: Matrix<T>,
    pub u_c: Matrix<T>,
    pub peep_i: Option<Vector<T>>,
    pub peep_f: Option<Vector<T>>,
    pub peep_o: Option<Vector<T>>,
    pub b_i: Option<Vector<T>>,
    pub b_f: Option<Vector<T>>,
    pub b_o: Option<Vector<T>>,
    pub b_c: Option<Vector<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState<T> {
    pub h: Vector<T>,
    pub c: Vector<T>,
}

impl<T: Scalar> CellState<T> for LstmState<T> {
    fn hidden(&self) -> &[T] {
        &self.h.0
    }

    fn hidden_mut(&mut self) -> &mut [T] {
        &mut self.h.0
    }
}

#[derive(Clone, Debug)]
pub struct LstmCache<T> {
    i: Vec<T>,
    f: Vec<T>,
    o: Vec<T>,
    g: Vec<T>,
    c: Vec<T>,
    tanh_c: Vec<T>,
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(input: usize, hidden: usize, use_bias: bool, peepholes: bool) -> Self {
        let (d, p) = (input, hidden);
        let vec = |on: bool| on.then(|| Vector::zeros(p));
        Self {
            w_i: Matrix::zeros(p, d),
            w_f: Matrix::zeros(p, d),
            w_o: Matrix::zeros(p, d),
            w_c: Matrix::zeros(p, d),
            u_i: Matrix::zeros(p, p),
            u_f: Matrix::zeros(p, p),
            u_o: Matrix::zeros(p, p),
            u_c: Matrix::zeros(p, p),
            peep_i: vec(peepholes),
            peep_f: vec(peepholes),
            peep_o: vec(peepholes),
            b_i: vec(use_bias),
            b_f: vec(use_bias),
            b_o: vec(use_bias),
            b_c: vec(use_bias),
        }
    }

    pub fn init<R: Rng + ?Sized>(
        input: usize,
        hidden: usize,
        use_bias: bool,
        peepholes: bool,
        rng: &mut R,
    ) -> Self {
        let (d, p) = (input, hidden);
        let (bd, bp) = (fan_in_bound::<T>(d), fan_in_bound::<T>(p));
        let w_i = Matrix::uniform(p, d, bd, rng);
        let w_f = Matrix::uniform(p, d, bd, rng);
        let w_o = Matrix::uniform(p, d, bd, rng);
        let w_c = Matrix::uniform(p, d, bd, rng);
        let u_i = Matrix::uniform(p, p, bp, rng);
        let u_f = Matrix::uniform(p, p, bp, rng);
        let u_o = Matrix::uniform(p, p, bp, rng);
        let u_c = Matrix::uniform(p, p, bp, rng);
        let mut peep = || peepholes.then(|| Vector::uniform(p, bp, rng));
        let (peep_i, peep_f, peep_o) = (peep(), peep(), peep());
        let bias = || use_bias.then(|| Vector::zeros(p));
        Self {
            w_i,
            w_f,
            w_o,
            w_c,
            u_i,
            u_f,
            u_o,
            u_c,
            peep_i,
            peep_f,
            peep_o,
            b_i: bias(),
            b_f: bias(),
            b_o: bias(),
            b_c: bias(),
        }
    }

    pub fn has_peepholes(&self) -> bool {
        self.peep_i.is_some()
    }
}

/// One LSTM step returning `(h, c)`.
pub fn lstm_step<T: Scalar>(
    params: &LstmParams<T>,
    h_prev: &Vector<T>,
    c_prev: &Vector<T>,
    x: &Vector<T>,
) -> Result<(Vector<T>, Vector<T>), CellError> {
    check_dims(params, h_prev.len(), x.len())?;
    check_dims(params, c_prev.len(), x.len())?;
    let prev = LstmState {
        h: h_prev.clone(),
        c: c_prev.clone(),
    };
    let (s, _) = params.step(&prev, x.as_slice());
    Ok((s.h, s.c))
}

#[inline]
fn peep_acc<T: Scalar>(acc: &mut [T], peep: Option<&Vector<T>>, c: &[T]) {
    if let Some(v) = peep {
        for ((a, &w), &cv) in acc.iter_mut().zip(&v.0).zip(c) {
            *a += w * cv;
        }
    }
}

impl<T: Scalar> ParamTensors<T> for LstmParams<T> {
    fn tensors(&self) -> Vec<TensorRef<'_, T>> {
        let mats = [
            ("w_i", &self.w_i),
            ("w_f", &self.w_f),
            ("w_o", &self.w_o),
            ("w_c", &self.w_c),
            ("u_i", &self.u_i),
            ("u_f", &self.u_f),
            ("u_o", &self.u_o),
            ("u_c", &self.u_c),
        ];
        let vecs = [
            ("peep_i", &self.peep_i),
            ("peep_f", &self.peep_f),
            ("peep_o", &self.peep_o),
            ("b_i", &self.b_i),
            ("b_f", &self.b_f),
            ("b_o", &self.b_o),
            ("b_c", &self.b_c),
        ];
        let mut out: Vec<_> = mats
            .into_iter()
            .map(|(name, m)| TensorRef {
                name,
                shape: m.shape(),
                values: m.as_slice(),
            })
            .collect();
        out.extend(vecs.into_iter().filter_map(|(name, v)| {
            v.as_ref().map(|v| TensorRef {
                name,
                shape: (v.len(), 1),
                values: v.as_slice(),
            })
        }));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        let mut out = vec![
            ("w_i", self.w_i.as_mut_slice()),
            ("w_f", self.w_f.as_mut_slice()),
            ("w_o", self.w_o.as_mut_slice()),
            ("w_c", self.w_c.as_mut_slice()),
            ("u_i", self.u_i.as_mut_slice()),
            ("u_f", self.u_f.as_mut_slice()),
            ("u_o", self.u_o.as_mut_slice()),
            ("u_c", self.u_c.as_mut_slice()),
        ];
        let vecs = [
            ("peep_i", &mut self.peep_i),
            ("peep_f", &mut self.peep_f),
            ("peep_o", &mut self.peep_o),
            ("b_i", &mut self.b_i),
            ("b_f", &mut self.b_f),
            ("b_o", &mut self.b_o),
            ("b_c", &mut self.b_c),
        ];
        out.extend(
            vecs.into_iter()
                .filter_map(|(name, v)| v.as_mut().map(|v| (name, v.as_mut_slice()))),
        );
        out
    }
}

impl<T: Scalar> RecurrentCell<T> for LstmParams<T> {
    type State = LstmState<T>;
    type Cache = LstmCache<T>;

    fn input_dim(&self) -> usize {
        self.w_i.cols()
    }

    fn hidden_dim(&self) -> usize {
        self.u_i.rows()
    }

    fn zero_state(&self) -> LstmState<T> {
        LstmState {
            h: Vector::zeros(self.hidden_dim()),
            c: Vector::zeros(self.hidden_dim()),
        }
    }

    fn step(&self, prev: &LstmState<T>, x: &[T]) -> (LstmState<T>, LstmCache<T>) {
        let (h_prev, c_prev) = (&prev.h.0, &prev.c.0);
        let mut i = preactivation(&self.w_i, x, &self.u_i, h_prev, self.b_i.as_ref());
        peep_acc(&mut i, self.peep_i.as_ref(), c_prev);
        i.iter_mut().for_each(|a| *a = sigmoid_scalar(*a));

        let mut f = preactivation(&self.w_f, x, &self.u_f, h_prev, self.b_f.as_ref());
        peep_acc(&mut f, self.peep_f.as_ref(), c_prev);
        f.iter_mut().for_each(|a| *a = sigmoid_scalar(*a));

        let mut g = preactivation(&self.w_c, x, &self.u_c, h_prev, self.b_c.as_ref());
        g.iter_mut().for_each(|a| *a = a.tanh());

        let c: Vec<T> = (0..g.len())
            .map(|j| f[j] * c_prev[j] + i[j] * g[j])
            .collect();

        let mut o = preactivation(&self.w_o, x, &self.u_o, h_prev, self.b_o.as_ref());
        peep_acc(&mut o, self.peep_o.as_ref(), &c);
        o.iter_mut().for_each(|a| *a = sigmoid_scalar(*a));

        let tanh_c: Vec<T> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<T> = o.iter().zip(&tanh_c).map(|(&o, &t)| o * t).collect();
        let state = LstmState {
            h: Vector(h),
            c: Vector(c.clone()),
        };
        (
            state,
            LstmCache {
                i,
                f,
                o,
                g,
                c,
                tanh_c,
            },
        )
    }

    fn step_backward(
        &self,
        x: &[T],
        prev: &LstmState<T>,
        cache: &LstmCache<T>,
        d_state: &LstmState<T>,
        grads: &mut Self,
    ) -> LstmState<T> {
        let p = self.hidden_dim();
        let one = T::one();
        let (h_prev, c_prev) = (&prev.h.0, &prev.c.0);
        let LstmCache {
            i,
            f,
            o,
            g,
            c,
            tanh_c,
        } = cache;

        let mut da_o = vec![T::zero(); p];
        let mut da_i = vec![T::zero(); p];
        let mut da_f = vec![T::zero(); p];
        let mut da_g = vec![T::zero(); p];
        let mut dc_prev = vec![T::zero(); p];
        for j in 0..p {
            let dh = d_state.h[j];
            da_o[j] = dh * tanh_c[j] * o[j] * (one - o[j]);
            let mut dc = d_state.c[j] + dh * o[j] * (one - tanh_c[j] * tanh_c[j]);
            if let Some(v) = &self.peep_o {
                dc += da_o[j] * v[j];
            }
            da_i[j] = dc * g[j] * i[j] * (one - i[j]);
            da_f[j] = dc * c_prev[j] * f[j] * (one - f[j]);
            da_g[j] = dc * i[j] * (one - g[j] * g[j]);
            dc_prev[j] = dc * f[j];
            if let Some(v) = &self.peep_i {
                dc_prev[j] += da_i[j] * v[j];
            }
            if let Some(v) = &self.peep_f {
                dc_prev[j] += da_f[j] * v[j];
            }
        }

        let mut dh_prev = vec![T::zero(); p];
        self.u_i.matvec_t_acc(&da_i, &mut dh_prev);
        self.u_f.matvec_t_acc(&da_f, &mut dh_prev);
        self.u_o.matvec_t_acc(&da_o, &mut dh_prev);
        self.u_c.matvec_t_acc(&da_g, &mut dh_prev);

        grads.w_i.outer_acc(&da_i, x);
        grads.w_f.outer_acc(&da_f, x);
        grads.w_o.outer_acc(&da_o, x);
        grads.w_c.outer_acc(&da_g, x);
        grads.u_i.outer_acc(&da_i, h_prev);
        grads.u_f.outer_acc(&da_f, h_prev);
        grads.u_o.outer_acc(&da_o, h_prev);
        grads.u_c.outer_acc(&da_g, h_prev);
        for (gv, da, src) in [
            (&mut grads.peep_i, &da_i, c_prev),
            (&mut grads.peep_f, &da_f, c_prev),
            (&mut grads.peep_o, &da_o, c),
        ] {
            if let Some(gv) = gv {
                for ((gj, &dj), &cj) in gv.0.iter_mut().zip(da.iter()).zip(src.iter()) {
                    *gj += dj * cj;
                }
            }
        }
        for (gb, da) in [
            (&mut grads.b_i, &da_i),
            (&mut grads.b_f, &da_f),
            (&mut grads.b_o, &da_o),
            (&mut grads.b_c, &da_g),
        ] {
            if let Some(gb) = gb {
                add_into(gb.as_mut_slice(), da);
            }
        }

        LstmState {
            h: Vector(dh_prev),
            c: Vector(dc_prev),
        }
    }
}
