//! BRDF models (Burley diffuse with retro-reflection, ideal Lambert) and
//! the parameter fields housing the optimizable scene parameters.

mod field;

pub use field::{FieldDesc, ParameterField};

use crate::autodiff::{RgbVar, Tape, Var};
use crate::math::{vec3, Vec3};
use crate::rng::RandomStream;

pub const INV_PI: f64 = std::f64::consts::FRAC_1_PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrdfModel {
    /// Ideal diffuse lobe; the analytic benchmark scenes use this.
    Lambert,
    /// Burley diffuse with the roughness-driven retro-reflection term.
    Burley,
}

/// BRDF value for local-frame directions (z is the shading normal).
/// Zero outside the upper hemisphere. Differentiable in albedo and
/// roughness.
pub fn eval_brdf(
    tape: &mut Tape,
    model: BrdfModel,
    albedo: RgbVar,
    roughness: Var,
    wi: Vec3,
    wo: Vec3,
) -> RgbVar {
    if wi.z <= 0.0 || wo.z <= 0.0 {
        return crate::autodiff::rgb_const([0.0, 0.0, 0.0]);
    }
    match model {
        BrdfModel::Lambert => tape.rgb_scale(albedo, INV_PI),
        BrdfModel::Burley => {
            // cos of the angle between wi and the half vector, written as
            // (1 + wi.wo)/|wi + wo| so swapping wi/wo is bit-exact
            let half_len = (wi + wo).length();
            let cos_d = if half_len > 0.0 {
                ((1.0 + wi.dot(wo)) / half_len).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            let p_i = (1.0 - wi.z).clamp(0.0, 1.0).powi(5);
            let p_o = (1.0 - wo.z).clamp(0.0, 1.0).powi(5);
            // fd90 - 1 = 2*roughness*cos_d^2 - 0.5
            let k = tape.scale(roughness, 2.0 * cos_d * cos_d);
            let k = tape.add_const(k, -0.5);
            let fi = tape.scale(k, p_i);
            let fi = tape.add_const(fi, 1.0);
            let fo = tape.scale(k, p_o);
            let fo = tape.add_const(fo, 1.0);
            let fresnel = tape.mul(fi, fo);
            let scaled = tape.rgb_mul_var(albedo, fresnel);
            tape.rgb_scale(scaled, INV_PI)
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BrdfSample {
    /// Sampled incident direction, local frame.
    pub wi: Vec3,
    /// Solid-angle pdf; a plain constant under differentiation
    /// (detached sampling).
    pub pdf: f64,
    /// BRDF value at (wi, wo).
    pub value: RgbVar,
}

/// Cosine-weighted hemisphere sample with pdf cos(theta)/pi; the Burley
/// lobe is near-Lambertian so the value/pdf ratio absorbs the mismatch.
pub fn sample_brdf(
    tape: &mut Tape,
    model: BrdfModel,
    albedo: RgbVar,
    roughness: Var,
    wo: Vec3,
    rng: &mut RandomStream,
) -> Option<BrdfSample> {
    if wo.z <= 0.0 {
        return None;
    }
    let (wi, pdf) = cosine_sample_hemisphere(rng);
    if pdf <= 0.0 {
        return None;
    }
    let value = eval_brdf(tape, model, albedo, roughness, wi, wo);
    Some(BrdfSample { wi, pdf, value })
}

pub fn cosine_sample_hemisphere(rng: &mut RandomStream) -> (Vec3, f64) {
    let (u1, u2) = rng.next_2d();
    let r = u1.sqrt();
    let phi = 2.0 * std::f64::consts::PI * u2;
    let wi = vec3(r * phi.cos(), r * phi.sin(), (1.0 - u1).max(0.0).sqrt());
    (wi, wi.z * INV_PI)
}
