use gated_ser::cells::{
    gru_step, read_params, write_params, CellKind, CellOptions, GruParams, ParamTensors, Pooling,
};
use gated_ser::nn::{Matrix, Vector};
use gated_ser::{seed, Network32, Network64, NUM_CLASSES};
use proptest::prelude::*;

fn net(kind: CellKind, opts: CellOptions, s: u64) -> Network64 {
    let mut rng = seed::rng(s);
    let mut n = Network64::init(kind, 4, 3, NUM_CLASSES, opts, Pooling::Last, &mut rng);
    for (name, v) in n.tensors_mut() {
        if name.starts_with("b") || name.starts_with("peep") {
            v.iter_mut().enumerate().for_each(|(i, b)| *b = 0.1 * (i as f64 + 1.0));
        }
    }
    n
}

fn input(s: u64) -> Matrix<f64> {
    Matrix::uniform(6, 4, 1.0, &mut seed::rng(s))
}

// Scaling any single tensor by 1.01 must move the output: every stored
// parameter is wired into the forward pass.
#[test]
fn every_tensor_reaches_the_output() {
    let opts = CellOptions {
        use_bias: true,
        peepholes: true,
    };
    let x = input(2);
    for kind in CellKind::ALL {
        let base = net(kind, opts, 1);
        let p0 = base.forward(&x).unwrap().probs;
        let names: Vec<_> = base.tensors().iter().map(|t| t.name).collect();
        for (i, name) in names.iter().enumerate() {
            let mut m = base.clone();
            m.tensors_mut()[i].1.iter_mut().for_each(|v| *v *= 1.01);
            let p = m.forward(&x).unwrap().probs;
            let moved = p.0.iter().zip(&p0.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(moved > 1e-6, "{kind}: {name} moved output by {moved:e}");
        }
    }
}

#[test]
fn parameters_round_trip_through_text() {
    for kind in CellKind::ALL {
        let n = net(kind, CellOptions { use_bias: true, peepholes: true }, 5);
        let mut buf = Vec::new();
        write_params(&n, &mut buf).unwrap();
        let back: Network64 = read_params(buf.as_slice()).unwrap();
        assert_eq!(back, n);
    }
    assert!(read_params::<f64, _>("not a parameter file\n".as_bytes()).is_err());
}

#[test]
fn single_precision_tracks_double() {
    let x = input(9);
    for kind in CellKind::ALL {
        let n = net(kind, CellOptions::default(), 8);
        let n32: Network32 = n.cast();
        let p64 = n.forward(&x).unwrap().probs;
        let p32 = n32.forward(&x.cast()).unwrap().probs;
        for (a, b) in p64.0.iter().zip(&p32.0) {
            assert!((a - f64::from(*b)).abs() < 1e-5, "{kind}: {a} vs {b}");
        }
    }
}

#[test]
fn mismatched_shapes_are_rejected() {
    let n = net(CellKind::Gru, CellOptions::default(), 1);
    assert!(n.forward(&Matrix::zeros(3, 5)).is_err());
    assert!(n.backward(&input(1), NUM_CLASSES).is_err());
    let g = GruParams::<f64>::zeros(4, 3, false);
    assert!(gru_step(&g, &Vector::zeros(2), &Vector::zeros(4)).is_err());
}

proptest! {
    // h is a convex combination of h_prev and a tanh output
    #[test]
    fn gru_state_stays_within_bounds(s in any::<u64>(), scale in 0.1f64..20.0) {
        let mut rng = seed::rng(s);
        let mut g = GruParams::<f64>::init(4, 3, true, &mut rng);
        for (_, v) in g.tensors_mut() {
            v.iter_mut().for_each(|w| *w *= scale);
        }
        let h_prev = Vector::uniform(3, 3.0, &mut rng);
        let x = Vector::uniform(4, 5.0, &mut rng);
        let h = gru_step(&g, &h_prev, &x).unwrap();
        for (hn, hp) in h.0.iter().zip(&h_prev.0) {
            prop_assert!(hn.abs() <= hp.abs().max(1.0) + 1e-15);
        }
    }
}
