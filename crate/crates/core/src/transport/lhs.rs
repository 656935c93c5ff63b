//! LHS rendering: imaging the radiance cache directly at primary hits.

use super::{render_image, ImageBuffer, RenderOpts, RenderStats, SceneView};
use crate::autodiff::{rgb_value, RgbVar, Tape};
use crate::geometry::PinholeCamera;
use crate::neuralfield::Radiance;
use crate::rng::RandomStream;

/// One camera sample of the cache; differentiable with respect to the
/// cache parameters only. Background pixels take the environment
/// radiance (zero in closed scenes).
pub fn render_lhs_pixel<R: Radiance + ?Sized>(
    view: SceneView,
    field: &R,
    tape: &mut Tape,
    camera: &PinholeCamera,
    pixel: (u32, u32),
    sample: u32,
    spp: u32,
    rng: &mut RandomStream,
    attach_theta: bool,
    stats: &mut RenderStats,
) -> RgbVar {
    let (ray, _) = camera.sample_ray_stratified(pixel, sample, spp, rng);
    stats.ray_segments += 1;
    match view.scene.intersect(&ray) {
        Some(hit) => {
            let hint = view.albedo_hint(tape, &hit, false);
            field.radiance(
                tape,
                view.store,
                hit.position,
                -ray.dir,
                hit.n,
                hint,
                attach_theta,
            )
        }
        None => view.environment(tape, ray.dir, false),
    }
}

/// Cache image (values only; use [`render_lhs_pixel`] for gradients).
pub fn render_lhs<R: Radiance + ?Sized>(
    view: SceneView,
    field: &R,
    camera: &PinholeCamera,
    opts: &RenderOpts,
) -> ImageBuffer {
    render_image(camera, opts, |pixel, s, rng, tape, stats| {
        rgb_value(render_lhs_pixel(
            view, field, tape, camera, pixel, s, opts.spp, rng, false, stats,
        ))
    })
}
