//! Emitters: area lights attached to shapes and the environment map.

use super::{Scene, SceneParams, SurfaceHit};
use crate::autodiff::{rgb_const, ParamRange, ParamStore, RgbVar, Tape, Var};
use crate::math::{Rgb, Vec3};
use crate::rng::RandomStream;

#[derive(Clone, Debug)]
pub enum EmitterDesc {
    /// Radiates `radiance` from the front side of its shape.
    Area { shape_id: usize, radiance: Rgb },
    /// Latitude-longitude texture queried by escaping rays.
    Environment {
        width: u32,
        height: u32,
        init: Rgb,
        optimizable: bool,
    },
}

/// Equirectangular environment texture; texels live in the parameter
/// store so lighting can be optimized.
#[derive(Clone, Debug)]
pub struct EnvMap {
    pub width: u32,
    pub height: u32,
    pub params: ParamRange,
    pub optimizable: bool,
}

impl EnvMap {
    pub fn alloc(
        width: u32,
        height: u32,
        init: Rgb,
        optimizable: bool,
        store: &mut ParamStore,
    ) -> EnvMap {
        let params = store.alloc((width * height * 3) as usize, |i| init[i % 3]);
        EnvMap {
            width,
            height,
            params,
            optimizable,
        }
    }

    /// Bilinear lookup in latitude-longitude parameterization: v runs
    /// from the +y pole (top row) to -y, u wraps around the horizon.
    pub fn eval(&self, tape: &mut Tape, store: &ParamStore, dir: Vec3, attach: bool) -> RgbVar {
        let u = 0.5 + dir.x.atan2(-dir.z) / (2.0 * std::f64::consts::PI);
        let v = dir.y.clamp(-1.0, 1.0).acos() / std::f64::consts::PI;
        let (w, h) = (self.width as i64, self.height as i64);

        let fu = u * w as f64 - 0.5;
        let fv = v * h as f64 - 0.5;
        let i0 = fu.floor();
        let j0 = fv.floor();
        let a = fu - i0;
        let b = fv - j0;
        let wrap = |i: i64| -> i64 { i.rem_euclid(w) };
        let clampv = |j: i64| -> i64 { j.clamp(0, h - 1) };
        let (i0w, i1w) = (wrap(i0 as i64), wrap(i0 as i64 + 1));
        let (j0c, j1c) = (clampv(j0 as i64), clampv(j0 as i64 + 1));

        let texel = |i: i64, j: i64, c: usize| -> u32 {
            self.params.start + ((j * w + i) * 3) as u32 + c as u32
        };
        let weights = [
            (1.0 - a) * (1.0 - b),
            a * (1.0 - b),
            (1.0 - a) * b,
            a * b,
        ];
        let mut out = [Var::constant(0.0); 3];
        for (c, slot) in out.iter_mut().enumerate() {
            let ids = [
                texel(i0w, j0c, c),
                texel(i1w, j0c, c),
                texel(i0w, j1c, c),
                texel(i1w, j1c, c),
            ];
            let vars: Vec<Var> = ids
                .iter()
                .map(|&id| {
                    if attach {
                        store.var(id)
                    } else {
                        Var::constant(store.value(id))
                    }
                })
                .collect();
            *slot = tape.lincomb(&vars, &weights);
        }
        out
    }
}

/// Differentiable environment lookup.
pub fn eval_environment(
    env: &EnvMap,
    tape: &mut Tape,
    store: &ParamStore,
    dir: Vec3,
    attach: bool,
) -> RgbVar {
    env.eval(tape, store, dir, attach)
}

#[derive(Clone, Copy, Debug)]
pub struct EmitterSample {
    /// Direction from the shading point toward the emitter (world).
    pub dir: Vec3,
    /// Solid-angle pdf at the shading point, including emitter selection.
    pub pdf: f64,
    pub radiance: RgbVar,
    pub visible: bool,
    /// Distance to the sampled emitter point (infinite for environment).
    pub dist: f64,
}

/// Next-event estimation sample toward one uniformly selected emitter.
/// Zero-measure selections come back with pdf 0; callers skip them.
pub fn sample_emitter(
    scene: &Scene,
    params: &SceneParams,
    tape: &mut Tape,
    store: &ParamStore,
    hit: &SurfaceHit,
    rng: &mut RandomStream,
    attach_lighting: bool,
) -> Option<EmitterSample> {
    let n_emitters = scene.emitters.len();
    if n_emitters == 0 {
        return None;
    }
    let pick = rng.next_usize(n_emitters);
    let select_pdf = 1.0 / n_emitters as f64;
    match &scene.emitters[pick] {
        EmitterDesc::Area { shape_id, radiance } => {
            let s = scene.shapes[*shape_id].shape.sample_point(rng);
            let to_light = s.position - hit.position;
            let dist2 = to_light.length_squared();
            if dist2 <= 0.0 {
                return zero_sample();
            }
            let dist = dist2.sqrt();
            let dir = to_light / dist;
            let cos_light = s.n.dot(-dir);
            if cos_light <= 0.0 || dir.dot(hit.n) <= 0.0 {
                return zero_sample();
            }
            let pdf = select_pdf * s.pdf_area * dist2 / cos_light;
            let visible = scene.unoccluded(hit.position, hit.n, dir, dist);
            Some(EmitterSample {
                dir,
                pdf,
                radiance: rgb_const(*radiance),
                visible,
                dist,
            })
        }
        EmitterDesc::Environment { .. } => {
            let env = params.env.as_ref()?;
            let (local, pdf_dir) = crate::materials::cosine_sample_hemisphere(rng);
            if pdf_dir <= 0.0 {
                return zero_sample();
            }
            let dir = hit.frame.to_world(local);
            let radiance = env.eval(tape, store, dir, attach_lighting);
            let visible = scene.unoccluded(hit.position, hit.n, dir, f64::INFINITY);
            Some(EmitterSample {
                dir,
                pdf: select_pdf * pdf_dir,
                radiance,
                visible,
                dist: f64::INFINITY,
            })
        }
    }
}

fn zero_sample() -> Option<EmitterSample> {
    Some(EmitterSample {
        dir: Vec3::ZERO,
        pdf: 0.0,
        radiance: rgb_const([0.0, 0.0, 0.0]),
        visible: false,
        dist: 0.0,
    })
}
