//! Scalar reverse-mode automatic differentiation.
//!
//! A [`Tape`] records a Wengert list of operations with eagerly computed
//! local partials. [`Var`] is a lightweight value handle: constants and
//! parameter leaves carry no tape node, so expressions over detached
//! quantities cost nothing. Dense MLP layers go through a block
//! [`Tape::affine`] op that stores per-layer inputs once instead of
//! per-weight partials.

mod adam;
mod fd;
mod params;

pub use adam::AdamState;
pub use fd::{finite_diff_gradient, finite_diff_gradient_scaled};
pub use params::{GradientTable, ParamRange, ParamStore};

use std::sync::atomic::{AtomicU32, Ordering};

const SRC_CONST: u32 = u32::MAX;
const PARAM_BIT: u32 = 0x8000_0000;

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(1);

/// A differentiable scalar: a value plus its provenance (constant,
/// parameter leaf, or tape node).
#[derive(Clone, Copy, Debug)]
pub struct Var {
    val: f64,
    src: u32,
    tape_id: u32,
}

impl Var {
    pub fn constant(v: f64) -> Var {
        Var {
            val: v,
            src: SRC_CONST,
            tape_id: 0,
        }
    }

    pub fn value(self) -> f64 {
        self.val
    }

    pub fn is_constant(self) -> bool {
        self.src == SRC_CONST
    }

    fn node_id(self) -> Option<u32> {
        if self.src != SRC_CONST && self.src & PARAM_BIT == 0 {
            Some(self.src)
        } else {
            None
        }
    }
}

/// Identity on values, zero derivative.
pub fn stop_gradient(v: Var) -> Var {
    Var::constant(v.val)
}

pub(crate) fn param_var(id: u32, value: f64) -> Var {
    debug_assert!(id & PARAM_BIT == 0, "parameter id overflow");
    Var {
        val: value,
        src: PARAM_BIT | id,
        tape_id: 0,
    }
}

/// RGB triple of differentiable scalars.
pub type RgbVar = [Var; 3];

pub fn rgb_const(v: crate::math::Rgb) -> RgbVar {
    [Var::constant(v[0]), Var::constant(v[1]), Var::constant(v[2])]
}

pub fn rgb_value(v: RgbVar) -> crate::math::Rgb {
    [v[0].value(), v[1].value(), v[2].value()]
}

pub fn rgb_stop_gradient(v: RgbVar) -> RgbVar {
    [stop_gradient(v[0]), stop_gradient(v[1]), stop_gradient(v[2])]
}

#[derive(Clone, Copy, Debug)]
enum OpKind {
    /// Output depends on `n` arguments with precomputed local partials.
    Scalar { n: u32 },
    /// Dense layer: out_j = bias[j] + sum_i W[j*n_in+i] * x_i.
    /// The args span holds input refs, the partials span their values.
    Affine {
        n_in: u32,
        n_out: u32,
        w_base: u32,
        b_base: u32,
        attach_params: bool,
    },
}

#[derive(Clone, Copy, Debug)]
struct Op {
    out0: u32,
    a0: u32,
    kind: OpKind,
}

/// Restore point for [`Tape::reset_to`].
#[derive(Clone, Copy, Debug)]
pub struct TapeMark {
    n_nodes: u32,
    n_ops: u32,
    n_args: u32,
}

pub struct Tape {
    id: u32,
    n_nodes: u32,
    ops: Vec<Op>,
    args: Vec<u32>,
    partials: Vec<f64>,
    adjoint: Vec<f64>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            n_nodes: 0,
            ops: Vec::new(),
            args: Vec::new(),
            partials: Vec::new(),
            adjoint: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.n_nodes as usize
    }

    pub fn mark(&self) -> TapeMark {
        TapeMark {
            n_nodes: self.n_nodes,
            n_ops: self.ops.len() as u32,
            n_args: self.args.len() as u32,
        }
    }

    /// Rolls back to a checkpoint; nodes recorded after it are dropped.
    pub fn reset_to(&mut self, mark: TapeMark) {
        self.n_nodes = mark.n_nodes;
        self.ops.truncate(mark.n_ops as usize);
        self.args.truncate(mark.n_args as usize);
        self.partials.truncate(mark.n_args as usize);
    }

    pub fn clear(&mut self) {
        self.reset_to(TapeMark {
            n_nodes: 0,
            n_ops: 0,
            n_args: 0,
        });
    }

    fn check(&self, v: Var) {
        assert!(
            v.node_id().is_none() || v.tape_id == self.id,
            "Var belongs to a different tape"
        );
    }

    fn new_node(&mut self) -> u32 {
        let id = self.n_nodes;
        self.n_nodes += 1;
        id
    }

    fn node_var(&self, id: u32, val: f64) -> Var {
        Var {
            val,
            src: id,
            tape_id: self.id,
        }
    }

    /// Records a scalar node from (arg, partial) pairs; constant args are
    /// skipped (their partial contributes nothing).
    fn record(&mut self, val: f64, deps: &[(Var, f64)]) -> Var {
        let a0 = self.args.len() as u32;
        let mut n = 0u32;
        for &(arg, partial) in deps {
            self.check(arg);
            if arg.src != SRC_CONST {
                self.args.push(arg.src);
                self.partials.push(partial);
                n += 1;
            }
        }
        if n == 0 {
            self.args.truncate(a0 as usize);
            self.partials.truncate(a0 as usize);
            return Var::constant(val);
        }
        let out0 = self.new_node();
        self.ops.push(Op {
            out0,
            a0,
            kind: OpKind::Scalar { n },
        });
        self.node_var(out0, val)
    }

    // -- arithmetic ---------------------------------------------------------

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.record(a.val + b.val, &[(a, 1.0), (b, 1.0)])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.record(a.val - b.val, &[(a, 1.0), (b, -1.0)])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.record(a.val * b.val, &[(a, b.val), (b, a.val)])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        assert!(b.val != 0.0, "division by zero on tape");
        let y = a.val / b.val;
        self.record(y, &[(a, 1.0 / b.val), (b, -y / b.val)])
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.record(-a.val, &[(a, -1.0)])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.record(a.val * c, &[(a, c)])
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        self.record(a.val + c, &[(a, 1.0)])
    }

    /// a*b + c in one node.
    pub fn mul_add(&mut self, a: Var, b: Var, c: Var) -> Var {
        self.record(a.val * b.val + c.val, &[(a, b.val), (b, a.val), (c, 1.0)])
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.record(a.val * a.val, &[(a, 2.0 * a.val)])
    }

    pub fn powi(&mut self, a: Var, n: i32) -> Var {
        let y = a.val.powi(n);
        self.record(y, &[(a, n as f64 * a.val.powi(n - 1))])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let y = a.val.exp();
        self.record(y, &[(a, y)])
    }

    pub fn ln(&mut self, a: Var) -> Var {
        assert!(a.val > 0.0, "log of non-positive value on tape");
        self.record(a.val.ln(), &[(a, 1.0 / a.val)])
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        assert!(a.val >= 0.0, "sqrt of negative value on tape");
        let y = a.val.sqrt();
        let d = if y == 0.0 { 0.0 } else { 0.5 / y };
        self.record(y, &[(a, d)])
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.record(a.val.abs(), &[(a, if a.val >= 0.0 { 1.0 } else { -1.0 })])
    }

    pub fn max(&mut self, a: Var, b: Var) -> Var {
        if a.val >= b.val {
            self.record(a.val, &[(a, 1.0)])
        } else {
            self.record(b.val, &[(b, 1.0)])
        }
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let s = 1.0 / (1.0 + (-a.val).exp());
        self.record(s, &[(a, s * (1.0 - s))])
    }

    /// ln(1 + e^x), numerically stable.
    pub fn softplus(&mut self, a: Var) -> Var {
        let x = a.val;
        let y = if x > 30.0 {
            x
        } else if x < -30.0 {
            x.exp()
        } else {
            x.exp().ln_1p()
        };
        let s = 1.0 / (1.0 + (-x).exp());
        self.record(y, &[(a, s)])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        if a.val >= 0.0 {
            self.record(a.val, &[(a, 1.0)])
        } else {
            self.record(a.val * slope, &[(a, slope)])
        }
    }

    /// Linear combination sum_i coeffs[i] * xs[i] as a single node.
    pub fn lincomb(&mut self, xs: &[Var], coeffs: &[f64]) -> Var {
        debug_assert_eq!(xs.len(), coeffs.len());
        let a0 = self.args.len() as u32;
        let mut val = 0.0;
        let mut n = 0u32;
        for (&x, &c) in xs.iter().zip(coeffs) {
            self.check(x);
            val += x.val * c;
            if x.src != SRC_CONST {
                self.args.push(x.src);
                self.partials.push(c);
                n += 1;
            }
        }
        if n == 0 {
            return Var::constant(val);
        }
        let out0 = self.new_node();
        self.ops.push(Op {
            out0,
            a0,
            kind: OpKind::Scalar { n },
        });
        self.node_var(out0, val)
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let a0 = self.args.len() as u32;
        let mut val = 0.0;
        let mut n = 0u32;
        for &x in xs {
            self.check(x);
            val += x.val;
            if x.src != SRC_CONST {
                self.args.push(x.src);
                self.partials.push(1.0);
                n += 1;
            }
        }
        if n == 0 {
            return Var::constant(val);
        }
        let out0 = self.new_node();
        self.ops.push(Op {
            out0,
            a0,
            kind: OpKind::Scalar { n },
        });
        self.node_var(out0, val)
    }

    /// Dense layer forward; records one block op covering all outputs.
    ///
    /// `weights`/`biases` index into `store` (row-major W, n_out rows).
    /// With `attach_params` false no gradient reaches W/b; if additionally
    /// every input is constant, nothing is recorded at all.
    pub fn affine(
        &mut self,
        store: &ParamStore,
        weights: ParamRange,
        biases: ParamRange,
        xs: &[Var],
        attach_params: bool,
        out: &mut Vec<Var>,
    ) {
        let n_in = xs.len() as u32;
        let n_out = biases.len;
        debug_assert_eq!(weights.len, n_in * n_out);
        out.clear();

        let w = store.slice(weights);
        let b = store.slice(biases);
        let all_const = xs.iter().all(|x| x.src == SRC_CONST);

        if all_const && !attach_params {
            for j in 0..n_out as usize {
                let row = &w[j * n_in as usize..(j + 1) * n_in as usize];
                let mut acc = b[j];
                for (i, x) in xs.iter().enumerate() {
                    acc += row[i] * x.val;
                }
                out.push(Var::constant(acc));
            }
            return;
        }

        let a0 = self.args.len() as u32;
        for &x in xs {
            self.check(x);
            self.args.push(x.src);
            self.partials.push(x.val);
        }
        let out0 = self.n_nodes;
        self.n_nodes += n_out;
        self.ops.push(Op {
            out0,
            a0,
            kind: OpKind::Affine {
                n_in,
                n_out,
                w_base: weights.start,
                b_base: biases.start,
                attach_params,
            },
        });
        for j in 0..n_out as usize {
            let row = &w[j * n_in as usize..(j + 1) * n_in as usize];
            let mut acc = b[j];
            for (i, x) in xs.iter().enumerate() {
                acc += row[i] * x.val;
            }
            out.push(self.node_var(out0 + j as u32, acc));
        }
    }

    // -- RGB helpers --------------------------------------------------------

    pub fn rgb_add(&mut self, a: RgbVar, b: RgbVar) -> RgbVar {
        [
            self.add(a[0], b[0]),
            self.add(a[1], b[1]),
            self.add(a[2], b[2]),
        ]
    }

    pub fn rgb_sub(&mut self, a: RgbVar, b: RgbVar) -> RgbVar {
        [
            self.sub(a[0], b[0]),
            self.sub(a[1], b[1]),
            self.sub(a[2], b[2]),
        ]
    }

    pub fn rgb_mul(&mut self, a: RgbVar, b: RgbVar) -> RgbVar {
        [
            self.mul(a[0], b[0]),
            self.mul(a[1], b[1]),
            self.mul(a[2], b[2]),
        ]
    }

    pub fn rgb_scale(&mut self, a: RgbVar, s: f64) -> RgbVar {
        [
            self.scale(a[0], s),
            self.scale(a[1], s),
            self.scale(a[2], s),
        ]
    }

    pub fn rgb_mul_var(&mut self, a: RgbVar, s: Var) -> RgbVar {
        [
            self.mul(a[0], s),
            self.mul(a[1], s),
            self.mul(a[2], s),
        ]
    }

    // -- backward -----------------------------------------------------------

    /// Accumulates `seed * d(output)/d(param)` into `grads` for every
    /// reachable parameter leaf. Multiple roots are swept in one pass.
    pub fn backward_seeded(
        &mut self,
        roots: &[(Var, f64)],
        store: &ParamStore,
        grads: &mut GradientTable,
    ) {
        let n = self.n_nodes as usize;
        self.adjoint.clear();
        self.adjoint.resize(n, 0.0);
        for &(root, seed) in roots {
            match root.src {
                SRC_CONST => {}
                s if s & PARAM_BIT != 0 => grads.add(s & !PARAM_BIT, seed),
                s => {
                    assert!(
                        root.tape_id == self.id,
                        "backward on an output from a different tape"
                    );
                    self.adjoint[s as usize] += seed;
                }
            }
        }
        for op in self.ops.iter().rev() {
            match op.kind {
                OpKind::Scalar { n } => {
                    let g = self.adjoint[op.out0 as usize];
                    if g == 0.0 {
                        continue;
                    }
                    let a0 = op.a0 as usize;
                    for k in 0..n as usize {
                        let r = self.args[a0 + k];
                        let d = g * self.partials[a0 + k];
                        if r & PARAM_BIT != 0 {
                            grads.add(r & !PARAM_BIT, d);
                        } else {
                            self.adjoint[r as usize] += d;
                        }
                    }
                }
                OpKind::Affine {
                    n_in,
                    n_out,
                    w_base,
                    b_base,
                    attach_params,
                } => {
                    let (n_in, n_out) = (n_in as usize, n_out as usize);
                    let a0 = op.a0 as usize;
                    let out0 = op.out0 as usize;
                    for j in 0..n_out {
                        let g = self.adjoint[out0 + j];
                        if g == 0.0 {
                            continue;
                        }
                        let w_row = store.row(w_base, j, n_in);
                        if attach_params {
                            grads.add(b_base + j as u32, g);
                            let gw = grads.row_mut(w_base, j, n_in);
                            for i in 0..n_in {
                                gw[i] += g * self.partials[a0 + i];
                            }
                        }
                        for i in 0..n_in {
                            let r = self.args[a0 + i];
                            if r == SRC_CONST {
                                continue;
                            }
                            let d = g * w_row[i];
                            if r & PARAM_BIT != 0 {
                                grads.add(r & !PARAM_BIT, d);
                            } else {
                                self.adjoint[r as usize] += d;
                            }
                        }
                    }
                }
            }
        }
    }

    /// d(output)/d(param) for every reachable parameter (seed 1).
    pub fn backward(&mut self, output: Var, store: &ParamStore, grads: &mut GradientTable) {
        self.backward_seeded(&[(output, 1.0)], store, grads);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single_param(value: f64) -> (ParamStore, ParamRange) {
        let mut store = ParamStore::new();
        let r = store.alloc(1, |_| value);
        (store, r)
    }

    #[test]
    fn square_gradient() {
        let (store, r) = single_param(3.0);
        let mut tape = Tape::new();
        let x = store.var(r.start);
        let y = tape.mul(x, x);
        assert_eq!(y.value(), 9.0);
        let mut grads = GradientTable::new(store.len());
        tape.backward(y, &store, &mut grads);
        assert_eq!(grads.get(r.start), 6.0);
    }

    #[test]
    fn stop_gradient_blocks_flow() {
        let (store, r) = single_param(2.0);
        let mut tape = Tape::new();
        let x = store.var(r.start);
        let y = tape.mul(stop_gradient(x), x);
        assert_eq!(y.value(), 4.0);
        let mut grads = GradientTable::new(store.len());
        tape.backward(y, &store, &mut grads);
        assert_eq!(grads.get(r.start), 2.0);
    }

    #[test]
    fn stop_gradient_value_and_idempotence() {
        let v = Var::constant(5.0);
        let s = stop_gradient(v);
        assert_eq!(s.value(), 5.0);
        assert!(s.is_constant());
        let s2 = stop_gradient(stop_gradient(s));
        assert_eq!(s2.value(), 5.0);
        assert!(s2.is_constant());
    }

    #[test]
    fn detached_difference_loss() {
        // loss = (stop_gradient(a) - b)^2 -> d/da = 0, d/db = -2(a-b)
        let mut store = ParamStore::new();
        let ra = store.alloc(1, |_| 3.0);
        let rb = store.alloc(1, |_| 1.0);
        let mut tape = Tape::new();
        let a = store.var(ra.start);
        let b = store.var(rb.start);
        let d = tape.sub(stop_gradient(a), b);
        let loss = tape.mul(d, d);
        let mut grads = GradientTable::new(store.len());
        tape.backward(loss, &store, &mut grads);
        assert_eq!(grads.get(ra.start), 0.0);
        assert_eq!(grads.get(rb.start), -2.0 * (3.0 - 1.0));
    }

    #[test]
    fn unreachable_parameters_are_zero() {
        let mut store = ParamStore::new();
        let ra = store.alloc(1, |_| 1.0);
        let rb = store.alloc(1, |_| 1.0);
        let mut tape = Tape::new();
        let a = store.var(ra.start);
        let y = tape.mul(a, a);
        let mut grads = GradientTable::new(store.len());
        tape.backward(y, &store, &mut grads);
        assert_eq!(grads.get(rb.start), 0.0);
    }

    #[test]
    #[should_panic(expected = "different tape")]
    fn foreign_tape_output_panics() {
        let (store, r) = single_param(1.0);
        let mut t1 = Tape::new();
        let mut t2 = Tape::new();
        let x = store.var(r.start);
        let y = t1.add(x, x);
        let mut grads = GradientTable::new(store.len());
        t2.backward(y, &store, &mut grads);
    }

    #[test]
    #[should_panic(expected = "division by zero")]
    fn division_by_zero_panics() {
        let mut tape = Tape::new();
        let (store, r) = single_param(1.0);
        let x = store.var(r.start);
        let zero = Var::constant(0.0);
        tape.div(x, zero);
    }

    /// Builds a deterministic random expression DAG mixing every scalar op.
    fn random_dag(tape: &mut Tape, leaves: &[Var], rng: &mut crate::rng::RandomStream) -> Var {
        let mut pool: Vec<Var> = leaves.to_vec();
        for _ in 0..5 {
            let mut next = Vec::new();
            for _ in 0..pool.len().max(2) {
                let a = pool[rng.next_usize(pool.len())];
                let b = pool[rng.next_usize(pool.len())];
                let v = match rng.next_usize(8) {
                    0 => tape.add(a, b),
                    1 => tape.sub(a, b),
                    2 => tape.mul(a, b),
                    3 => {
                        let den = tape.square(b);
                        let den = tape.add_const(den, 1.5);
                        tape.div(a, den)
                    }
                    4 => tape.sigmoid(a),
                    5 => {
                        let s = tape.square(a);
                        let s = tape.add_const(s, 1.0);
                        tape.ln(s)
                    }
                    6 => {
                        let s = tape.square(a);
                        let s = tape.add_const(s, 0.5);
                        tape.sqrt(s)
                    }
                    _ => {
                        let c = tape.scale(a, 0.3);
                        tape.mul_add(c, b, a)
                    }
                };
                next.push(v);
            }
            pool = next;
        }
        tape.sum(&pool)
    }

    #[test]
    fn random_dag_matches_finite_differences() {
        let n = 6;
        let mut store = ParamStore::new();
        let mut init = crate::rng::RandomStream::new(11);
        let r = store.alloc(n, |_| init.next_f64() * 2.0 - 1.0);
        let base: Vec<f64> = store.slice(r).to_vec();

        let eval = |vals: &[f64]| -> f64 {
            let mut s = ParamStore::new();
            let rr = s.alloc(n, |i| vals[i]);
            let mut tape = Tape::new();
            let leaves: Vec<Var> = (0..n).map(|i| s.var(rr.start + i as u32)).collect();
            let mut rng = crate::rng::RandomStream::new(99);
            random_dag(&mut tape, &leaves, &mut rng).value()
        };

        let mut tape = Tape::new();
        let leaves: Vec<Var> = (0..n).map(|i| store.var(r.start + i as u32)).collect();
        let mut rng = crate::rng::RandomStream::new(99);
        let out = random_dag(&mut tape, &leaves, &mut rng);
        let mut grads = GradientTable::new(store.len());
        tape.backward(out, &store, &mut grads);

        let fd = finite_diff_gradient(eval, &base, 1e-5);
        for i in 0..n {
            let g = grads.get(r.start + i as u32);
            assert_relative_eq!(g, fd[i], max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn backward_is_linear() {
        let n = 4;
        let mut store = ParamStore::new();
        let mut init = crate::rng::RandomStream::new(5);
        let r = store.alloc(n, |_| init.next_f64() + 0.2);
        let mut tape = Tape::new();
        let leaves: Vec<Var> = (0..n).map(|i| store.var(r.start + i as u32)).collect();
        let mut rng_f = crate::rng::RandomStream::new(31);
        let f = random_dag(&mut tape, &leaves, &mut rng_f);
        let mut rng_g = crate::rng::RandomStream::new(32);
        let g = random_dag(&mut tape, &leaves, &mut rng_g);

        let (a, b) = (1.7, -0.4);
        let fa = tape.scale(f, a);
        let gb = tape.scale(g, b);
        let combo = tape.add(fa, gb);

        let mut gf = GradientTable::new(store.len());
        tape.backward(f, &store, &mut gf);
        let mut gg = GradientTable::new(store.len());
        tape.backward(g, &store, &mut gg);
        let mut gc = GradientTable::new(store.len());
        tape.backward(combo, &store, &mut gc);

        for i in 0..n as u32 {
            let lhs = gc.get(r.start + i);
            let rhs = a * gf.get(r.start + i) + b * gg.get(r.start + i);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn checkpoint_rollback() {
        let (store, r) = single_param(2.0);
        let mut tape = Tape::new();
        let x = store.var(r.start);
        let y = tape.mul(x, x);
        let mark = tape.mark();
        let nodes_before = tape.num_nodes();

        let mut g_before = GradientTable::new(store.len());
        tape.backward(y, &store, &mut g_before);

        // scratch work past the checkpoint, then roll back
        let z = tape.exp(y);
        let _w = tape.mul(z, x);
        tape.reset_to(mark);
        assert_eq!(tape.num_nodes(), nodes_before);

        let mut g_after = GradientTable::new(store.len());
        tape.backward(y, &store, &mut g_after);
        assert_eq!(g_before.get(r.start), g_after.get(r.start));
    }

    #[test]
    fn affine_matches_scalar_composition_and_fd() {
        let n_in = 3;
        let n_out = 2;
        let mut store = ParamStore::new();
        let mut init = crate::rng::RandomStream::new(77);
        let w = store.alloc(n_in * n_out, |_| init.next_f64() - 0.5);
        let b = store.alloc(n_out, |_| init.next_f64() - 0.5);
        let x_range = store.alloc(n_in, |_| init.next_f64() * 2.0 - 1.0);

        let run = |s: &ParamStore| -> (f64, Vec<f64>) {
            let mut tape = Tape::new();
            let xs: Vec<Var> = (0..n_in).map(|i| s.var(x_range.start + i as u32)).collect();
            let mut out = Vec::new();
            tape.affine(s, w, b, &xs, true, &mut out);
            let y0 = tape.sigmoid(out[0]);
            let y = tape.mul(y0, out[1]);
            let mut grads = GradientTable::new(s.len());
            tape.backward(y, s, &mut grads);
            let g: Vec<f64> = (0..s.len() as u32).map(|i| grads.get(i)).collect();
            (y.value(), g)
        };
        let (val, grads) = run(&store);

        // scalar-op replica
        let mut tape = Tape::new();
        let mut outs = Vec::new();
        for j in 0..n_out {
            let mut acc = store.var(b.start + j as u32);
            for i in 0..n_in {
                let wv = store.var(w.start + (j * n_in + i) as u32);
                let xv = store.var(x_range.start + i as u32);
                acc = tape.mul_add(wv, xv, acc);
            }
            outs.push(acc);
        }
        let y0 = tape.sigmoid(outs[0]);
        let y = tape.mul(y0, outs[1]);
        assert_relative_eq!(y.value(), val, max_relative = 1e-14);
        let mut grads2 = GradientTable::new(store.len());
        tape.backward(y, &store, &mut grads2);
        for i in 0..store.len() as u32 {
            assert_relative_eq!(grads2.get(i), grads[i as usize], max_relative = 1e-12, epsilon = 1e-14);
        }

        // finite differences over everything
        let base: Vec<f64> = (0..store.len() as u32).map(|i| store.value(i)).collect();
        let fd = finite_diff_gradient(
            |vals| {
                let mut s = ParamStore::new();
                let total = vals.len();
                s.alloc(total, |i| vals[i]);
                run(&s).0
            },
            &base,
            1e-6,
        );
        for i in 0..store.len() {
            assert_relative_eq!(grads[i], fd[i], max_relative = 1e-5, epsilon = 1e-9);
        }
    }

    #[test]
    fn affine_detached_constant_inputs_record_nothing() {
        let mut store = ParamStore::new();
        let w = store.alloc(4, |i| i as f64 + 1.0);
        let b = store.alloc(2, |_| 0.5);
        let mut tape = Tape::new();
        let xs = [Var::constant(1.0), Var::constant(2.0)];
        let mut out = Vec::new();
        tape.affine(&store, w, b, &xs, false, &mut out);
        assert_eq!(tape.num_nodes(), 0);
        assert_eq!(out[0].value(), 0.5 + 1.0 * 1.0 + 2.0 * 2.0);
        assert!(out[0].is_constant());
    }
}
