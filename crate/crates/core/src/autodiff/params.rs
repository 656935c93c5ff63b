//! Parameter storage and gradient tables.

use super::{param_var, Var};

/// Contiguous block of parameter ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamRange {
    pub start: u32,
    pub len: u32,
}

impl ParamRange {
    pub fn iter(self) -> impl Iterator<Item = u32> {
        self.start..self.start + self.len
    }

    pub fn as_usize(self) -> std::ops::Range<usize> {
        self.start as usize..(self.start + self.len) as usize
    }
}

/// Flat arena of optimizable scalars; ranges are handed out at
/// construction time and stay valid for the lifetime of the store.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    values: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore { values: Vec::new() }
    }

    pub fn alloc(&mut self, n: usize, mut init: impl FnMut(usize) -> f64) -> ParamRange {
        let start = self.values.len() as u32;
        self.values.extend((0..n).map(&mut init));
        ParamRange {
            start,
            len: n as u32,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: u32) -> f64 {
        self.values[id as usize]
    }

    pub fn set(&mut self, id: u32, v: f64) {
        self.values[id as usize] = v;
    }

    /// Differentiable leaf handle for a parameter.
    pub fn var(&self, id: u32) -> Var {
        param_var(id, self.values[id as usize])
    }

    pub fn slice(&self, range: ParamRange) -> &[f64] {
        &self.values[range.as_usize()]
    }

    pub fn slice_mut(&mut self, range: ParamRange) -> &mut [f64] {
        &mut self.values[range.as_usize()]
    }

    pub(super) fn row(&self, base: u32, row: usize, n: usize) -> &[f64] {
        let start = base as usize + row * n;
        &self.values[start..start + n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Dense gradient accumulator parallel to a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct GradientTable {
    grads: Vec<f64>,
}

impl GradientTable {
    pub fn new(n_params: usize) -> GradientTable {
        GradientTable {
            grads: vec![0.0; n_params],
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn get(&self, id: u32) -> f64 {
        self.grads[id as usize]
    }

    pub fn add(&mut self, id: u32, v: f64) {
        self.grads[id as usize] += v;
    }

    pub(super) fn row_mut(&mut self, base: u32, row: usize, n: usize) -> &mut [f64] {
        let start = base as usize + row * n;
        &mut self.grads[start..start + n]
    }

    pub fn clear(&mut self) {
        self.grads.fill(0.0);
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.grads {
            *g *= s;
        }
    }

    /// Componentwise accumulation of another table.
    pub fn add_table(&mut self, other: &GradientTable) {
        debug_assert_eq!(self.grads.len(), other.grads.len());
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            *a += *b;
        }
    }

    pub fn slice(&self, range: ParamRange) -> &[f64] {
        &self.grads[range.as_usize()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.grads
    }

    pub fn max_abs(&self, ranges: &[ParamRange]) -> f64 {
        ranges
            .iter()
            .flat_map(|r| self.slice(*r))
            .fold(0.0f64, |m, g| m.max(g.abs()))
    }
}
