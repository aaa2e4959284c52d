//! Textual tensor dump:
//!
//! ```text
//! gated-ser-params v1
//! kind gru
//! input 13
//! hidden 4
//! classes 7
//! use_bias false
//! peepholes false
//! pooling last
//! tensor w_z 4 13 <row-major values...>
//! ```
//!
//! Values use the shortest representation that parses back to the same
//! bits, so a dump round-trips exactly.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use super::{CellError, CellKind, CellOptions, Network, ParamTensors, Pooling};
use crate::scalar::Scalar;

pub const PARAMS_HEADER: &str = "gated-ser-params v1";

pub fn write_params<T: Scalar, W: Write>(network: &Network<T>, mut out: W) -> std::io::Result<()> {
    let opts = network.options();
    writeln!(out, "{PARAMS_HEADER}")?;
    writeln!(out, "kind {}", network.kind())?;
    writeln!(out, "input {}", network.input_dim())?;
    writeln!(out, "hidden {}", network.hidden_dim())?;
    writeln!(out, "classes {}", network.classes())?;
    writeln!(out, "use_bias {}", opts.use_bias)?;
    writeln!(out, "peepholes {}", opts.peepholes)?;
    writeln!(out, "pooling {}", network.readout.pooling)?;
    for t in network.tensors() {
        write!(out, "tensor {} {} {}", t.name, t.shape.0, t.shape.1)?;
        for v in t.values {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_params<T: Scalar + FromStr, R: BufRead>(input: R) -> Result<Network<T>, CellError> {
    let err = |m: String| CellError::Parse(m);
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| err(e.to_string()))?
        .unwrap_or_default();
    if header.trim() != PARAMS_HEADER {
        return Err(err(format!("unexpected header `{header}`")));
    }
    let mut meta: HashMap<String, String> = HashMap::new();
    let mut tensors: HashMap<String, ((usize, usize), Vec<T>)> = HashMap::new();
    for line in lines {
        let line = line.map_err(|e| err(e.to_string()))?;
        let mut fields = line.split_whitespace();
        let Some(key) = fields.next() else { continue };
        if key == "tensor" {
            let name = fields.next().ok_or_else(|| err("tensor without name".into()))?;
            let mut dim = || -> Result<usize, CellError> {
                fields
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err(format!("bad shape for tensor {name}")))
            };
            let shape = (dim()?, dim()?);
            let values = fields
                .map(|s| s.parse::<T>().map_err(|_| err(format!("bad value `{s}` in {name}"))))
                .collect::<Result<Vec<T>, _>>()?;
            tensors.insert(name.to_string(), (shape, values));
        } else {
            meta.insert(key.to_string(), fields.collect::<Vec<_>>().join(" "));
        }
    }
    let get = |k: &str| meta.get(k).ok_or_else(|| err(format!("missing `{k}`")));
    let num = |k: &str| -> Result<usize, CellError> {
        get(k)?.parse().map_err(|_| err(format!("bad `{k}`")))
    };
    let flag = |k: &str| -> Result<bool, CellError> {
        get(k)?.parse().map_err(|_| err(format!("bad `{k}`")))
    };
    let kind: CellKind = get("kind")?.parse().map_err(err)?;
    let pooling: Pooling = get("pooling")?.parse().map_err(err)?;
    let opts = CellOptions {
        use_bias: flag("use_bias")?,
        peepholes: flag("peepholes")?,
    };
    let mut network = Network::zeros(kind, num("input")?, num("hidden")?, num("classes")?, opts, pooling);
    let shapes: Vec<(&'static str, (usize, usize))> =
        network.tensors().iter().map(|t| (t.name, t.shape)).collect();
    for ((name, slot), (_, shape)) in network.tensors_mut().into_iter().zip(shapes) {
        let (found_shape, values) = tensors
            .remove(name)
            .ok_or_else(|| err(format!("missing tensor {name}")))?;
        if found_shape != shape || values.len() != slot.len() {
            return Err(err(format!(
                "tensor {name}: expected shape {shape:?}, found {found_shape:?} with {} values",
                values.len()
            )));
        }
        slot.copy_from_slice(&values);
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(err(format!("unexpected tensor {extra}")));
    }
    Ok(network)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn dump_round_trips_bit_exactly(seed in any::<u64>(), kind in 0usize..3, bias: bool, peep: bool, mean: bool) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pooling = if mean { Pooling::Mean } else { Pooling::Last };
            let net = Network::<f64>::init(CellKind::ALL[kind], 5, 3, 7, CellOptions { use_bias: bias, peepholes: peep }, pooling, &mut rng);
            let mut buf = Vec::new();
            write_params(&net, &mut buf).unwrap();
            let back: Network<f64> = read_params(buf.as_slice()).unwrap();
            prop_assert_eq!(back, net);
        }
    }

    #[test]
    fn rejects_foreign_files_and_bad_shapes() {
        assert!(read_params::<f64, _>("hello\n".as_bytes()).is_err());
        let net = Network::<f32>::zeros(CellKind::Rnn, 2, 2, 7, CellOptions::default(), Pooling::Last);
        let mut buf = Vec::new();
        write_params(&net, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("tensor u 2 2", "tensor u 2 3");
        assert!(read_params::<f32, _>(text.as_bytes()).is_err());
    }
}
