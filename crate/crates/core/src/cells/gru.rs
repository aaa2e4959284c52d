use rand::Rng;

use super::rnn::fan_in_bound;
use super::{add_into, check_dims, preactivation, CellError, ParamTensors, RecurrentCell, TensorRef};
use crate::nn::{sigmoid_scalar, Matrix, Vector};
use crate::scalar::Scalar;

/// GRU: update gate `z`, reset gate `r`, candidate `h̃`, and
/// `h = (1 - z) ⊙ h_prev + z ⊙ h̃`. No separate memory cell, no peepholes.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams<T> {
    pub w_z: Matrix<T>,
    pub w_r: Matrix<T>,
    pub w_h: Matrix<T>,
    pub u_z: Matrix<T>,
    pub u_r: Matrix<T>,
    pub u_h: Matrix<T>,
    pub b_z: Option<Vector<T>>,
    pub b_r: Option<Vector<T>>,
    pub b_h: Option<Vector<T>>,
}

#[derive(Clone, Debug)]
pub struct GruCache<T> {
    pub z: Vec<T>,
    pub r: Vec<T>,
    /// `r ⊙ h_prev`
    pub rh: Vec<T>,
    pub candidate: Vec<T>,
}

impl<T: Scalar> GruParams<T> {
    pub fn zeros(input: usize, hidden: usize, use_bias: bool) -> Self {
        let (d, p) = (input, hidden);
        let bias = || use_bias.then(|| Vector::zeros(p));
        Self {
            w_z: Matrix::zeros(p, d),
            w_r: Matrix::zeros(p, d),
            w_h: Matrix::zeros(p, d),
            u_z: Matrix::zeros(p, p),
            u_r: Matrix::zeros(p, p),
            u_h: Matrix::zeros(p, p),
            b_z: bias(),
            b_r: bias(),
            b_h: bias(),
        }
    }

    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, use_bias: bool, rng: &mut R) -> Self {
        let (d, p) = (input, hidden);
        let (bd, bp) = (fan_in_bound::<T>(d), fan_in_bound::<T>(p));
        let w_z = Matrix::uniform(p, d, bd, rng);
        let w_r = Matrix::uniform(p, d, bd, rng);
        let w_h = Matrix::uniform(p, d, bd, rng);
        let u_z = Matrix::uniform(p, p, bp, rng);
        let u_r = Matrix::uniform(p, p, bp, rng);
        let u_h = Matrix::uniform(p, p, bp, rng);
        let bias = || use_bias.then(|| Vector::zeros(p));
        Self {
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            b_z: bias(),
            b_r: bias(),
            b_h: bias(),
        }
    }

    /// Forward step that also exposes the gate activations.
    pub fn step_with_gates(&self, h_prev: &Vector<T>, x: &Vector<T>) -> Result<(Vector<T>, GruCache<T>), CellError> {
        check_dims(self, h_prev.len(), x.len())?;
        Ok(self.step(h_prev, x.as_slice()))
    }
}

/// One GRU step.
pub fn gru_step<T: Scalar>(
    params: &GruParams<T>,
    h_prev: &Vector<T>,
    x: &Vector<T>,
) -> Result<Vector<T>, CellError> {
    params.step_with_gates(h_prev, x).map(|(h, _)| h)
}

impl<T: Scalar> ParamTensors<T> for GruParams<T> {
    fn tensors(&self) -> Vec<TensorRef<'_, T>> {
        let mats = [
            ("w_z", &self.w_z),
            ("w_r", &self.w_r),
            ("w_h", &self.w_h),
            ("u_z", &self.u_z),
            ("u_r", &self.u_r),
            ("u_h", &self.u_h),
        ];
        let vecs = [("b_z", &self.b_z), ("b_r", &self.b_r), ("b_h", &self.b_h)];
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
            ("w_z", self.w_z.as_mut_slice()),
            ("w_r", self.w_r.as_mut_slice()),
            ("w_h", self.w_h.as_mut_slice()),
            ("u_z", self.u_z.as_mut_slice()),
            ("u_r", self.u_r.as_mut_slice()),
            ("u_h", self.u_h.as_mut_slice()),
        ];
        let vecs = [
            ("b_z", &mut self.b_z),
            ("b_r", &mut self.b_r),
            ("b_h", &mut self.b_h),
        ];
        out.extend(
            vecs.into_iter()
                .filter_map(|(name, v)| v.as_mut().map(|v| (name, v.as_mut_slice()))),
        );
        out
    }
}

impl<T: Scalar> RecurrentCell<T> for GruParams<T> {
    type State = Vector<T>;
    type Cache = GruCache<T>;

    fn input_dim(&self) -> usize {
        self.w_z.cols()
    }

    fn hidden_dim(&self) -> usize {
        self.u_z.rows()
    }

    fn zero_state(&self) -> Vector<T> {
        Vector::zeros(self.hidden_dim())
    }

    fn step(&self, prev: &Vector<T>, x: &[T]) -> (Vector<T>, GruCache<T>) {
        let h_prev = &prev.0;
        let mut z = preactivation(&self.w_z, x, &self.u_z, h_prev, self.b_z.as_ref());
        z.iter_mut().for_each(|a| *a = sigmoid_scalar(*a));
        let mut r = preactivation(&self.w_r, x, &self.u_r, h_prev, self.b_r.as_ref());
        r.iter_mut().for_each(|a| *a = sigmoid_scalar(*a));
        let rh: Vec<T> = r.iter().zip(h_prev).map(|(&r, &h)| r * h).collect();
        let mut candidate = preactivation(&self.w_h, x, &self.u_h, &rh, self.b_h.as_ref());
        candidate.iter_mut().for_each(|a| *a = a.tanh());
        let h: Vec<T> = (0..z.len())
            .map(|j| (T::one() - z[j]) * h_prev[j] + z[j] * candidate[j])
            .collect();
        (
            Vector(h),
            GruCache {
                z,
                r,
                rh,
                candidate,
            },
        )
    }

    fn step_backward(
        &self,
        x: &[T],
        prev: &Vector<T>,
        cache: &GruCache<T>,
        d_state: &Vector<T>,
        grads: &mut Self,
    ) -> Vector<T> {
        let p = self.hidden_dim();
        let one = T::one();
        let h_prev = &prev.0;
        let GruCache {
            z,
            r,
            rh,
            candidate,
        } = cache;

        let mut da_z = vec![T::zero(); p];
        let mut da_h = vec![T::zero(); p];
        let mut dh_prev = vec![T::zero(); p];
        for j in 0..p {
            let dh = d_state[j];
            da_z[j] = dh * (candidate[j] - h_prev[j]) * z[j] * (one - z[j]);
            da_h[j] = dh * z[j] * (one - candidate[j] * candidate[j]);
            dh_prev[j] = dh * (one - z[j]);
        }
        let mut d_rh = vec![T::zero(); p];
        self.u_h.matvec_t_acc(&da_h, &mut d_rh);
        let mut da_r = vec![T::zero(); p];
        for j in 0..p {
            dh_prev[j] += d_rh[j] * r[j];
            da_r[j] = d_rh[j] * h_prev[j] * r[j] * (one - r[j]);
        }
        self.u_z.matvec_t_acc(&da_z, &mut dh_prev);
        self.u_r.matvec_t_acc(&da_r, &mut dh_prev);

        grads.w_z.outer_acc(&da_z, x);
        grads.w_r.outer_acc(&da_r, x);
        grads.w_h.outer_acc(&da_h, x);
        grads.u_z.outer_acc(&da_z, h_prev);
        grads.u_r.outer_acc(&da_r, h_prev);
        grads.u_h.outer_acc(&da_h, rh);
        for (gb, da) in [
            (&mut grads.b_z, &da_z),
            (&mut grads.b_r, &da_r),
            (&mut grads.b_h, &da_h),
        ] {
            if let Some(gb) = gb {
                add_into(gb.as_mut_slice(), da);
            }
        }
        Vector(dh_prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::{rnn_step, RnnParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(seed: u64) -> (GruParams<f64>, Vector<f64>, Vector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = GruParams::init(3, 4, true, &mut rng);
        let h = Vector::uniform(4, 1.0, &mut rng);
        let x = Vector::uniform(3, 2.0, &mut rng);
        (p, h, x)
    }

    #[test]
    fn closed_update_gate_keeps_previous_state() {
        let (mut p, h, x) = random(1);
        p.b_z = Some(Vector(vec![-800.0; 4]));
        assert_eq!(gru_step(&p, &h, &x).unwrap(), h);
    }

    #[test]
    fn open_update_gate_takes_candidate() {
        let (mut p, h, x) = random(2);
        p.b_z = Some(Vector(vec![800.0; 4]));
        let (out, cache) = p.step_with_gates(&h, &x).unwrap();
        assert_eq!(out.0, cache.candidate);
    }

    #[test]
    fn zero_weights_halve_the_state() {
        let p = GruParams::<f64>::zeros(3, 4, false);
        let h = Vector(vec![0.9, -0.4, 0.0, 0.25]);
        let (out, cache) = p.step_with_gates(&h, &Vector(vec![1.0, 2.0, 3.0])).unwrap();
        assert!(cache.z.iter().chain(&cache.r).all(|&g| g == 0.5));
        assert!(cache.candidate.iter().all(|&c| c == 0.0));
        for j in 0..4 {
            assert_eq!(out[j], 0.5 * h[j]);
        }
    }

    #[test]
    fn closed_reset_gate_forgets_the_past() {
        let (mut p, h, _) = random(3);
        p.b_r = Some(Vector(vec![-800.0; 4]));
        p.b_h = Some(Vector::zeros(4));
        let (_, cache) = p.step_with_gates(&h, &Vector::zeros(3)).unwrap();
        assert!(cache.candidate.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn saturated_gates_reduce_to_vanilla_rnn() {
        let (mut p, h, x) = random(4);
        p.b_z = Some(Vector(vec![800.0; 4]));
        p.b_r = Some(Vector(vec![800.0; 4]));
        let rnn = RnnParams {
            u: p.w_h.clone(),
            w: p.u_h.clone(),
            b: p.b_h.clone(),
        };
        let a = gru_step(&p, &h, &x).unwrap();
        let b = rnn_step(&rnn, &h, &x).unwrap();
        for (u, v) in a.0.iter().zip(&b.0) {
            assert!((u - v).abs() <= 1e-12);
        }
    }
}
