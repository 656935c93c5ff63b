//! Multiresolution hash-grid positional encoding.

use crate::autodiff::{ParamRange, ParamStore, Tape, Var};
use crate::rng::RandomStream;

const HASH_P2: u64 = 2654435761;
const HASH_P3: u64 = 805459861;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HashGridConfig {
    pub levels: u32,
    pub base_resolution: u32,
    pub max_resolution: u32,
    pub features_per_level: u32,
    /// Entries per level; power of two.
    pub table_size: u32,
}

impl HashGridConfig {
    /// Full-scale configuration: 16 levels spanning 2^1..2^16, 2 features
    /// per level, 2^17-entry tables.
    pub fn full() -> HashGridConfig {
        HashGridConfig {
            levels: 16,
            base_resolution: 2,
            max_resolution: 1 << 16,
            features_per_level: 2,
            table_size: 1 << 17,
        }
    }

    /// Desk-scale default: 8 levels up to 256, 2^14-entry tables.
    pub fn desk() -> HashGridConfig {
        HashGridConfig {
            levels: 8,
            base_resolution: 2,
            max_resolution: 256,
            features_per_level: 2,
            table_size: 1 << 14,
        }
    }

    /// Small configuration for parameter fields.
    pub fn param_field() -> HashGridConfig {
        HashGridConfig {
            levels: 4,
            base_resolution: 2,
            max_resolution: 64,
            features_per_level: 2,
            table_size: 1 << 12,
        }
    }

    pub fn output_len(&self) -> usize {
        (self.levels * self.features_per_level) as usize
    }

    /// Per-level lattice resolution, geometric from base to max.
    pub fn resolution(&self, level: u32) -> u32 {
        if self.levels == 1 {
            return self.base_resolution;
        }
        let b = ((self.max_resolution as f64).ln() - (self.base_resolution as f64).ln())
            / (self.levels - 1) as f64;
        (self.base_resolution as f64 * (b * level as f64).exp()).round() as u32
    }

    pub fn params_per_level(&self) -> usize {
        (self.table_size * self.features_per_level) as usize
    }

    pub fn total_params(&self) -> usize {
        self.params_per_level() * self.levels as usize
    }
}

fn spatial_hash(c: [u64; 3], table_size: u32) -> u32 {
    let h = c[0] ^ c[1].wrapping_mul(HASH_P2) ^ c[2].wrapping_mul(HASH_P3);
    (h & (table_size as u64 - 1)) as u32
}

#[derive(Clone, Debug)]
pub struct HashGrid {
    pub config: HashGridConfig,
    pub params: ParamRange,
}

impl HashGrid {
    pub fn new(config: HashGridConfig, store: &mut ParamStore, rng: &mut RandomStream) -> HashGrid {
        assert!(config.table_size.is_power_of_two());
        for l in 1..config.levels {
            assert!(
                config.resolution(l) > config.resolution(l - 1),
                "per-level resolutions must strictly increase"
            );
        }
        let params = store.alloc(config.total_params(), |_| (rng.next_f64() * 2.0 - 1.0) * 1e-4);
        HashGrid { config, params }
    }

    /// Trilinear interpolation of hashed corner features at every level,
    /// concatenated. `x` is in normalized [0,1]^3 coordinates (clamped).
    pub fn encode(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: [f64; 3],
        attach: bool,
        out: &mut Vec<Var>,
    ) {
        out.clear();
        let x = [
            x[0].clamp(0.0, 1.0),
            x[1].clamp(0.0, 1.0),
            x[2].clamp(0.0, 1.0),
        ];
        let fpl = self.config.features_per_level as usize;
        let mut corner_vars = [Var::constant(0.0); 8];
        let mut weights = [0.0f64; 8];
        for level in 0..self.config.levels {
            let res = self.config.resolution(level) as f64;
            let level_base =
                self.params.start + (level as usize * self.config.params_per_level()) as u32;
            let p = [x[0] * res, x[1] * res, x[2] * res];
            let c0 = [p[0].floor(), p[1].floor(), p[2].floor()];
            let f = [p[0] - c0[0], p[1] - c0[1], p[2] - c0[2]];
            for feature in 0..fpl {
                for corner in 0..8usize {
                    let dx = (corner & 1) as u64;
                    let dy = ((corner >> 1) & 1) as u64;
                    let dz = ((corner >> 2) & 1) as u64;
                    let idx = spatial_hash(
                        [
                            c0[0] as u64 + dx,
                            c0[1] as u64 + dy,
                            c0[2] as u64 + dz,
                        ],
                        self.config.table_size,
                    );
                    let wx = if dx == 1 { f[0] } else { 1.0 - f[0] };
                    let wy = if dy == 1 { f[1] } else { 1.0 - f[1] };
                    let wz = if dz == 1 { f[2] } else { 1.0 - f[2] };
                    weights[corner] = wx * wy * wz;
                    let id = level_base + idx * fpl as u32 + feature as u32;
                    corner_vars[corner] = if attach {
                        store.var(id)
                    } else {
                        Var::constant(store.value(id))
                    };
                }
                out.push(tape.lincomb(&corner_vars, &weights));
            }
        }
    }

    /// Table entry ids touched by an encode at `x` (gradient support).
    pub fn touched_entries(&self, x: [f64; 3]) -> Vec<u32> {
        let x = [
            x[0].clamp(0.0, 1.0),
            x[1].clamp(0.0, 1.0),
            x[2].clamp(0.0, 1.0),
        ];
        let fpl = self.config.features_per_level as usize;
        let mut ids = Vec::new();
        for level in 0..self.config.levels {
            let res = self.config.resolution(level) as f64;
            let level_base =
                self.params.start + (level as usize * self.config.params_per_level()) as u32;
            let c0 = [
                (x[0] * res).floor() as u64,
                (x[1] * res).floor() as u64,
                (x[2] * res).floor() as u64,
            ];
            for corner in 0..8usize {
                let idx = spatial_hash(
                    [
                        c0[0] + (corner & 1) as u64,
                        c0[1] + ((corner >> 1) & 1) as u64,
                        c0[2] + ((corner >> 2) & 1) as u64,
                    ],
                    self.config.table_size,
                );
                for feature in 0..fpl {
                    ids.push(level_base + idx * fpl as u32 + feature as u32);
                }
            }
        }
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> (HashGrid, ParamStore) {
        let mut store = ParamStore::new();
        let mut rng = RandomStream::new(7);
        let g = HashGrid::new(HashGridConfig::desk(), &mut store, &mut rng);
        (g, store)
    }

    #[test]
    fn output_length_matches_config() {
        // 16 levels x 2 features under the full configuration
        assert_eq!(HashGridConfig::full().output_len(), 32);
        let (g, store) = grid();
        let mut tape = Tape::new();
        let mut out = Vec::new();
        g.encode(&mut tape, &store, [0.3, 0.4, 0.5], true, &mut out);
        assert_eq!(out.len(), g.config.output_len());
    }

    #[test]
    fn full_config_resolutions_are_powers_of_two() {
        let c = HashGridConfig::full();
        for l in 0..c.levels {
            assert_eq!(c.resolution(l), 2u32 << l);
        }
    }

    #[test]
    fn interpolation_weights_sum_to_one() {
        // encode of a constant-filled table returns that constant at any x
        let mut store = ParamStore::new();
        let config = HashGridConfig::desk();
        let params = store.alloc(config.total_params(), |_| 0.75);
        let g = HashGrid { config, params };
        let mut tape = Tape::new();
        let mut out = Vec::new();
        let mut rng = RandomStream::new(3);
        for _ in 0..20 {
            let x = [rng.next_f64(), rng.next_f64(), rng.next_f64()];
            g.encode(&mut tape, &store, x, false, &mut out);
            for v in &out {
                assert_relative_eq!(v.value(), 0.75, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_features() {
        let (g, store) = grid();
        let mut tape = Tape::new();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        g.encode(&mut tape, &store, [0.21, 0.87, 0.55], false, &mut a);
        g.encode(&mut tape, &store, [0.21, 0.87, 0.55], false, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.value(), y.value());
        }
    }

    #[test]
    fn encode_gradient_matches_touched_entries() {
        let (g, store) = grid();
        let mut tape = Tape::new();
        let mut out = Vec::new();
        let x = [0.312, 0.777, 0.123];
        g.encode(&mut tape, &store, x, true, &mut out);
        let total = tape.sum(&out);
        let mut grads = crate::autodiff::GradientTable::new(store.len());
        tape.backward(total, &store, &mut grads);
        let touched = g.touched_entries(x);
        for id in 0..store.len() as u32 {
            if grads.get(id) != 0.0 {
                assert!(touched.binary_search(&id).is_ok());
            }
        }
        // weights sum to 1 per (level, feature), so total gradient mass
        // equals levels * features
        let mass: f64 = touched.iter().map(|&id| grads.get(id)).sum();
        assert_relative_eq!(mass, g.config.output_len() as f64, epsilon = 1e-9);
    }

    #[test]
    fn locality_of_small_perturbations() {
        let (g, _) = grid();
        let finest = g.config.resolution(g.config.levels - 1) as f64;
        let x = [0.4003, 0.5002, 0.6001];
        let half_cell = 0.5 / finest;
        // stay strictly inside the same finest-level cell
        let y = [x[0] + 0.4 * half_cell, x[1], x[2]];
        assert_eq!(g.touched_entries(x), g.touched_entries(y));
    }
}
