//! Plain fully connected network over the tape.

use crate::autodiff::{ParamRange, ParamStore, Tape, Var};
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MlpSpec {
    pub input: u32,
    pub hidden_layers: u32,
    pub hidden_width: u32,
    pub output: u32,
    pub leaky_slope: f64,
}

impl MlpSpec {
    pub fn new(input: u32, hidden_layers: u32, hidden_width: u32, output: u32) -> MlpSpec {
        MlpSpec {
            input,
            hidden_layers,
            hidden_width,
            output,
            leaky_slope: 0.01,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mlp {
    pub spec: MlpSpec,
    /// (weights, biases) per layer; weights row-major [out][in].
    pub layers: Vec<(ParamRange, ParamRange)>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(spec: MlpSpec, store: &mut ParamStore, rng: &mut RandomStream) -> Mlp {
        let mut layers = Vec::new();
        let mut widths = vec![spec.input];
        for _ in 0..spec.hidden_layers {
            widths.push(spec.hidden_width);
        }
        widths.push(spec.output);
        for l in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[l] as usize, widths[l + 1] as usize);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = store.alloc(fan_in * fan_out, |_| (rng.next_f64() * 2.0 - 1.0) * bound);
            let b = store.alloc(fan_out, |_| 0.0);
            layers.push((w, b));
        }
        Mlp { spec, layers }
    }

    pub fn param_ranges(&self) -> Vec<ParamRange> {
        self.layers.iter().flat_map(|(w, b)| [*w, *b]).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|(w, b)| (w.len + b.len) as usize)
            .sum()
    }

    /// Affine layers with leaky-rectifier hidden activations; the output
    /// layer is returned raw (callers apply their own output activation).
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        input: &[Var],
        attach: bool,
        out: &mut Vec<Var>,
    ) {
        assert_eq!(
            input.len(),
            self.spec.input as usize,
            "mlp input width mismatch"
        );
        let mut cur: Vec<Var> = input.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, (w, b)) in self.layers.iter().enumerate() {
            tape.affine(store, *w, *b, &cur, attach, &mut next);
            if l < last {
                for v in next.iter_mut() {
                    *v = tape.leaky_relu(*v, self.spec.leaky_slope);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        out.clear();
        out.extend_from_slice(&cur);
    }
}
