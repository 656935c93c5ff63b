//! Direct illumination integrator: E + one next-event-estimation
//! scattering of emitter light (the AD-Direct baseline).

use super::{render_image, ImageBuffer, RenderOpts, RenderStats, SceneView};
use crate::autodiff::{rgb_const, rgb_value, RgbVar, Tape};
use crate::geometry::{sample_emitter, PinholeCamera};
use crate::materials::eval_brdf;
use crate::rng::RandomStream;

/// One differentiable camera sample of E + T(E). Detached sampling:
/// directions and pdfs are constants, gradients flow through BRDF and
/// emitted radiance only.
pub fn render_direct_pixel(
    view: SceneView,
    tape: &mut Tape,
    camera: &PinholeCamera,
    pixel: (u32, u32),
    sample: u32,
    spp: u32,
    rng: &mut RandomStream,
    attach_phi: bool,
    stats: &mut RenderStats,
) -> RgbVar {
    let (ray, _) = camera.sample_ray_stratified(pixel, sample, spp, rng);
    stats.ray_segments += 1;
    let hit = match view.scene.intersect(&ray) {
        Some(h) => h,
        None => return view.environment(tape, ray.dir, attach_phi),
    };
    let mut out = rgb_const(view.emitted(&hit));
    let es = match sample_emitter(
        view.scene,
        view.params,
        tape,
        view.store,
        &hit,
        rng,
        attach_phi,
    ) {
        Some(e) => e,
        None => return out,
    };
    // shadow rays are part of the traced-segment budget
    stats.ray_segments += 1;
    if es.pdf <= 0.0 || !es.visible {
        return out;
    }
    let wi_local = hit.frame.to_local(es.dir);
    let wo_local = hit.frame.to_local(-ray.dir);
    if wi_local.z <= 0.0 || wo_local.z <= 0.0 {
        return out;
    }
    let (model, albedo, rough) = view.material_at(tape, &hit, attach_phi);
    let f = eval_brdf(tape, model, albedo, rough, wi_local, wo_local);
    let weight = wi_local.z / es.pdf;
    let scattered = tape.rgb_mul(f, es.radiance);
    let scattered = tape.rgb_scale(scattered, weight);
    out = tape.rgb_add(out, scattered);
    out
}

/// Direct-illumination image (values only; use [`render_direct_pixel`]
/// on a tape for gradients).
pub fn render_direct(view: SceneView, camera: &PinholeCamera, opts: &RenderOpts) -> ImageBuffer {
    render_image(camera, opts, |pixel, s, rng, tape, stats| {
        rgb_value(render_direct_pixel(
            view, tape, camera, pixel, s, opts.spp, rng, false, stats,
        ))
    })
}
