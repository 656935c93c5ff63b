//! Parameter fields: constant, dense trilinear grid, or hash-grid MLP.
//!
//! Raw storage is unconstrained; queries squash through a logistic into
//! (0,1) so optimizer steps can never leave the value domain.

use crate::autodiff::{ParamRange, ParamStore, Tape, Var};
use crate::math::Vec3;
use crate::neuralfield::{HashGridConfig, MlpField};
use crate::rng::RandomStream;

fn logit(v: f64) -> f64 {
    let v = v.clamp(1e-6, 1.0 - 1e-6);
    (v / (1.0 - v)).ln()
}

/// Declarative field description (scene file side).
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldDesc {
    Constant {
        /// scalar or [r, g, b] depending on the parameter
        value: serde_json::Value,
        #[serde(default = "default_true")]
        optimizable: bool,
    },
    Grid {
        resolution: [u32; 3],
        init: serde_json::Value,
        #[serde(default = "default_true")]
        optimizable: bool,
    },
    Neural {
        #[serde(default)]
        init: Option<serde_json::Value>,
        #[serde(default = "default_true")]
        optimizable: bool,
    },
}

fn default_true() -> bool {
    true
}

impl FieldDesc {
    pub fn constant_rgb(v: [f64; 3]) -> FieldDesc {
        FieldDesc::Constant {
            value: serde_json::json!(v),
            optimizable: true,
        }
    }

    pub fn constant_scalar(v: f64) -> FieldDesc {
        FieldDesc::Constant {
            value: serde_json::json!(v),
            optimizable: true,
        }
    }

    pub fn fixed(mut self) -> FieldDesc {
        match &mut self {
            FieldDesc::Constant { optimizable, .. }
            | FieldDesc::Grid { optimizable, .. }
            | FieldDesc::Neural { optimizable, .. } => *optimizable = false,
        }
        self
    }

    pub fn is_optimizable(&self) -> bool {
        match self {
            FieldDesc::Constant { optimizable, .. }
            | FieldDesc::Grid { optimizable, .. }
            | FieldDesc::Neural { optimizable, .. } => *optimizable,
        }
    }

    fn init_values(value: &serde_json::Value, dim: usize) -> Vec<f64> {
        match value {
            serde_json::Value::Number(n) => vec![n.as_f64().unwrap_or(0.5); dim],
            serde_json::Value::Array(a) => {
                let vals: Vec<f64> = a.iter().filter_map(|v| v.as_f64()).collect();
                if vals.len() == dim {
                    vals
                } else if vals.len() == 1 {
                    vec![vals[0]; dim]
                } else {
                    vec![0.5; dim]
                }
            }
            _ => vec![0.5; dim],
        }
    }
}

#[derive(Clone, Debug)]
pub enum ParameterField {
    Constant {
        params: ParamRange,
        dim: usize,
    },
    Grid {
        params: ParamRange,
        resolution: [u32; 3],
        dim: usize,
        domain_min: Vec3,
        domain_max: Vec3,
    },
    Neural {
        field: MlpField,
    },
}

impl ParameterField {
    /// Instantiates storage for a field description. `dim` is 1 for
    /// roughness, 3 for albedo. Grid/constant raw values hold the logit
    /// of the requested init so the squashed query returns it exactly.
    pub fn build(
        desc: &FieldDesc,
        dim: usize,
        domain: (Vec3, Vec3),
        store: &mut ParamStore,
        rng: &mut RandomStream,
    ) -> ParameterField {
        match desc {
            FieldDesc::Constant { value, .. } => {
                let init = FieldDesc::init_values(value, dim);
                let params = store.alloc(dim, |i| logit(init[i]));
                ParameterField::Constant { params, dim }
            }
            FieldDesc::Grid {
                resolution, init, ..
            } => {
                let init = FieldDesc::init_values(init, dim);
                let n = (resolution[0].max(1) * resolution[1].max(1) * resolution[2].max(1))
                    as usize
                    * dim;
                let params = store.alloc(n, |i| logit(init[i % dim]));
                ParameterField::Grid {
                    params,
                    resolution: [
                        resolution[0].max(1),
                        resolution[1].max(1),
                        resolution[2].max(1),
                    ],
                    dim,
                    domain_min: domain.0,
                    domain_max: domain.1,
                }
            }
            FieldDesc::Neural { .. } => {
                let field = MlpField::new(
                    HashGridConfig::param_field(),
                    1,
                    64,
                    dim as u32,
                    domain,
                    store,
                    rng,
                );
                ParameterField::Neural { field }
            }
        }
    }

    pub fn param_ranges(&self) -> Vec<ParamRange> {
        match self {
            ParameterField::Constant { params, .. } | ParameterField::Grid { params, .. } => {
                vec![*params]
            }
            ParameterField::Neural { field } => field.param_ranges(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ParameterField::Constant { dim, .. } | ParameterField::Grid { dim, .. } => *dim,
            ParameterField::Neural { field } => field.out_dim as usize,
        }
    }

    /// Raw (pre-squash) field values at `x`.
    pub fn query_raw(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Vec3,
        attach: bool,
        out: &mut Vec<Var>,
    ) {
        out.clear();
        match self {
            ParameterField::Constant { params, dim } => {
                for c in 0..*dim {
                    let id = params.start + c as u32;
                    out.push(if attach {
                        store.var(id)
                    } else {
                        Var::constant(store.value(id))
                    });
                }
            }
            ParameterField::Grid {
                params,
                resolution,
                dim,
                domain_min,
                domain_max,
            } => {
                let size = *domain_max - *domain_min;
                let nx = [
                    ((x.x - domain_min.x) / size.x).clamp(0.0, 1.0),
                    ((x.y - domain_min.y) / size.y).clamp(0.0, 1.0),
                    ((x.z - domain_min.z) / size.z).clamp(0.0, 1.0),
                ];
                // grid points sit at the cell corners; R=1 collapses an axis
                let mut i0 = [0usize; 3];
                let mut frac = [0.0f64; 3];
                for a in 0..3 {
                    let r = resolution[a] as usize;
                    if r == 1 {
                        continue;
                    }
                    let p = nx[a] * (r - 1) as f64;
                    let c = p.floor().min((r - 2) as f64);
                    i0[a] = c as usize;
                    frac[a] = p - c;
                }
                let stride = [
                    *dim,
                    *dim * resolution[0] as usize,
                    *dim * (resolution[0] * resolution[1]) as usize,
                ];
                let mut corner_vars = [Var::constant(0.0); 8];
                let mut weights = [0.0f64; 8];
                for c in 0..*dim {
                    for corner in 0..8usize {
                        let dx = corner & 1;
                        let dy = (corner >> 1) & 1;
                        let dz = (corner >> 2) & 1;
                        let ix = (i0[0] + dx).min(resolution[0] as usize - 1);
                        let iy = (i0[1] + dy).min(resolution[1] as usize - 1);
                        let iz = (i0[2] + dz).min(resolution[2] as usize - 1);
                        let id = params.start
                            + (c + ix * stride[0] + iy * stride[1] + iz * stride[2]) as u32;
                        let wx = if dx == 1 { frac[0] } else { 1.0 - frac[0] };
                        let wy = if dy == 1 { frac[1] } else { 1.0 - frac[1] };
                        let wz = if dz == 1 { frac[2] } else { 1.0 - frac[2] };
                        weights[corner] = wx * wy * wz;
                        corner_vars[corner] = if attach {
                            store.var(id)
                        } else {
                            Var::constant(store.value(id))
                        };
                    }
                    out.push(tape.lincomb(&corner_vars, &weights));
                }
            }
            ParameterField::Neural { field } => {
                field.query(tape, store, x, attach, out);
            }
        }
    }

    /// Squashed field values in (0,1).
    pub fn query(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Vec3,
        attach: bool,
        out: &mut Vec<Var>,
    ) {
        self.query_raw(tape, store, x, attach, out);
        for v in out.iter_mut() {
            *v = tape.sigmoid(*v);
        }
    }

    /// Sets every raw parameter so the squashed value equals `v`
    /// (constant/grid fields only).
    pub fn set_uniform(&self, store: &mut ParamStore, v: f64) {
        match self {
            ParameterField::Constant { params, .. } | ParameterField::Grid { params, .. } => {
                store.slice_mut(*params).fill(logit(v));
            }
            ParameterField::Neural { .. } => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::GradientTable;
    use crate::math::vec3;
    use approx::assert_relative_eq;

    fn unit_domain() -> (Vec3, Vec3) {
        (vec3(0.0, 0.0, 0.0), vec3(1.0, 1.0, 1.0))
    }

    #[test]
    fn constant_field_everywhere() {
        let mut store = ParamStore::new();
        let mut rng = RandomStream::new(0);
        let f = ParameterField::build(
            &FieldDesc::constant_scalar(0.7),
            1,
            unit_domain(),
            &mut store,
            &mut rng,
        );
        let mut tape = Tape::new();
        let mut out = Vec::new();
        for p in [vec3(0.0, 0.0, 0.0), vec3(0.9, 0.1, 0.4), vec3(5.0, -3.0, 0.2)] {
            f.query(&mut tape, &store, p, false, &mut out);
            assert_relative_eq!(out[0].value(), 0.7, epsilon = 1e-9);
        }
    }

    #[test]
    fn grid_midpoint_is_half_before_squashing() {
        // 2x1x1 grid with raw corner values 0 and 1: query at the midpoint
        // interpolates to 0.5 pre-squash
        let mut store = ParamStore::new();
        let params = store.alloc(2, |i| i as f64);
        let f = ParameterField::Grid {
            params,
            resolution: [2, 1, 1],
            dim: 1,
            domain_min: vec3(0.0, 0.0, 0.0),
            domain_max: vec3(1.0, 1.0, 1.0),
        };
        let mut tape = Tape::new();
        let mut out = Vec::new();
        f.query_raw(&mut tape, &store, vec3(0.5, 0.5, 0.5), false, &mut out);
        assert_relative_eq!(out[0].value(), 0.5, epsilon = 1e-12);
        // clamp outside the bounding box
        f.query_raw(&mut tape, &store, vec3(2.0, 0.0, 0.0), false, &mut out);
        assert_relative_eq!(out[0].value(), 1.0, epsilon = 1e-12);
        f.query_raw(&mut tape, &store, vec3(-2.0, 0.0, 0.0), false, &mut out);
        assert_relative_eq!(out[0].value(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_gradient_equals_interpolation_weight() {
        let mut store = ParamStore::new();
        let mut rng = RandomStream::new(1);
        let f = ParameterField::build(
            &FieldDesc::Grid {
                resolution: [3, 3, 3],
                init: serde_json::json!(0.5),
                optimizable: true,
            },
            1,
            unit_domain(),
            &mut store,
            &mut rng,
        );
        let x = vec3(0.3, 0.62, 0.18);
        let mut tape = Tape::new();
        let mut out = Vec::new();
        f.query_raw(&mut tape, &store, x, true, &mut out);
        let mut grads = GradientTable::new(store.len());
        tape.backward(out[0], &store, &mut grads);

        // weights reconstructed independently
        let p = [x.x * 2.0, x.y * 2.0, x.z * 2.0];
        let c0 = [p[0].floor() as usize, p[1].floor() as usize, p[2].floor() as usize];
        let fr = [p[0] - c0[0] as f64, p[1] - c0[1] as f64, p[2] - c0[2] as f64];
        let mut total = 0.0;
        for corner in 0..8usize {
            let dx = corner & 1;
            let dy = (corner >> 1) & 1;
            let dz = (corner >> 2) & 1;
            let w = (if dx == 1 { fr[0] } else { 1.0 - fr[0] })
                * (if dy == 1 { fr[1] } else { 1.0 - fr[1] })
                * (if dz == 1 { fr[2] } else { 1.0 - fr[2] });
            let id = (c0[0] + dx) + (c0[1] + dy) * 3 + (c0[2] + dz) * 9;
            assert_relative_eq!(grads.get(id as u32), w, epsilon = 1e-12);
            total += w;
        }
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn squashed_values_stay_in_unit_interval() {
        let mut store = ParamStore::new();
        let mut rng = RandomStream::new(3);
        let f = ParameterField::build(
            &FieldDesc::Neural {
                init: None,
                optimizable: true,
            },
            3,
            unit_domain(),
            &mut store,
            &mut rng,
        );
        let mut tape = Tape::new();
        let mut out = Vec::new();
        for _ in 0..100 {
            let x = vec3(rng.next_f64() * 2.0 - 0.5, rng.next_f64(), rng.next_f64());
            f.query(&mut tape, &store, x, false, &mut out);
            for v in &out {
                assert!(v.value() > 0.0 && v.value() < 1.0);
            }
            tape.clear();
        }
    }

    #[test]
    fn set_uniform_round_trips_through_squash() {
        let mut store = ParamStore::new();
        let mut rng = RandomStream::new(9);
        let f = ParameterField::build(
            &FieldDesc::constant_rgb([0.2, 0.5, 0.8]),
            3,
            unit_domain(),
            &mut store,
            &mut rng,
        );
        f.set_uniform(&mut store, 0.35);
        let mut tape = Tape::new();
        let mut out = Vec::new();
        f.query(&mut tape, &store, vec3(0.5, 0.5, 0.5), false, &mut out);
        for v in &out {
            assert_relative_eq!(v.value(), 0.35, epsilon = 1e-9);
        }
    }
}
