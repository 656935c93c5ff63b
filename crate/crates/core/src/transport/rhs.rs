//! Cache-based rendering: one traced bounce plus a radiance-cache query
//! (RHS rendering), and its truncated-series generalization that traces
//! k differentiable bounces before querying the cache.

use super::{render_image, ImageBuffer, RenderOpts, RenderStats, SceneView, ShadingSample};
use crate::autodiff::{rgb_const, rgb_value, RgbVar, Tape};
use crate::geometry::PinholeCamera;
use crate::materials::sample_brdf;
use crate::neuralfield::Radiance;
use crate::rng::RandomStream;

/// Gradient routing switches for the RHS estimators.
#[derive(Clone, Copy, Debug, Default)]
pub struct RhsAttach {
    /// Differentiate scene parameters (BRDF fields, emitted/environment
    /// radiance).
    pub phi: bool,
    /// Differentiate the radiance cache (off under the default routing;
    /// the cache's dependence on the scene parameters is never
    /// differentiated).
    pub theta: bool,
    /// Attach the albedo hint fed to the cache.
    pub albedo_hint: bool,
}

/// E(x, wo) + (1/n) sum f(x, wi, wo) L(x2) cos/pdf with `wi` sampled by
/// the BRDF (detached sampling). Escaped secondary rays substitute the
/// environment radiance for the cache.
pub fn estimate_rhs<R: Radiance + ?Sized>(
    view: SceneView,
    field: &R,
    tape: &mut Tape,
    sample: &ShadingSample,
    rng: &mut RandomStream,
    n_inner: u32,
    attach: RhsAttach,
    stats: &mut RenderStats,
) -> RgbVar {
    let hit = &sample.hit;
    let mut out = rgb_const(view.emitted(hit));
    let wo_local = hit.frame.to_local(sample.wo);
    if wo_local.z <= 0.0 || n_inner == 0 {
        return out;
    }
    let (model, albedo, rough) = view.material_at(tape, hit, attach.phi);
    for _ in 0..n_inner {
        let bs = match sample_brdf(tape, model, albedo, rough, wo_local, rng) {
            Some(s) if s.pdf > 0.0 => s,
            _ => continue,
        };
        let wi_world = hit.frame.to_world(bs.wi);
        let ray = view.scene.spawn_ray(hit.position, hit.n, wi_world);
        stats.ray_segments += 1;
        let incident = match view.scene.intersect(&ray) {
            Some(h2) => {
                let hint = view.albedo_hint(tape, &h2, attach.albedo_hint);
                field.radiance(tape, view.store, h2.position, -wi_world, h2.n, hint, attach.theta)
            }
            None => view.environment(tape, wi_world, attach.phi),
        };
        let weight = bs.wi.z / (bs.pdf * n_inner as f64);
        let term = tape.rgb_mul(bs.value, incident);
        let term = tape.rgb_scale(term, weight);
        out = tape.rgb_add(out, term);
    }
    out
}

/// One camera sample of the truncated series: sum_{i<k} T^i(E) + T^k(L).
/// Traces exactly k+1 segments unless the path escapes early; k = 1 is
/// RHS rendering.
#[allow(clippy::too_many_arguments)]
pub fn render_rhs_k_pixel<R: Radiance + ?Sized>(
    view: SceneView,
    field: &R,
    tape: &mut Tape,
    camera: &PinholeCamera,
    pixel: (u32, u32),
    sample: u32,
    k: u32,
    spp: u32,
    rng: &mut RandomStream,
    attach: RhsAttach,
    stats: &mut RenderStats,
) -> RgbVar {
    assert!(k >= 1, "render_rhs_k needs k >= 1");
    let (mut ray, _) = camera.sample_ray_stratified(pixel, sample, spp, rng);
    let mut beta = rgb_const([1.0, 1.0, 1.0]);
    let mut out = rgb_const([0.0, 0.0, 0.0]);
    for depth in 0..k {
        stats.ray_segments += 1;
        let hit = match view.scene.intersect(&ray) {
            Some(h) => h,
            None => {
                let env = view.environment(tape, ray.dir, attach.phi);
                let term = tape.rgb_mul(beta, env);
                return tape.rgb_add(out, term);
            }
        };
        let emitted = rgb_const(view.emitted(&hit));
        let term = tape.rgb_mul(beta, emitted);
        out = tape.rgb_add(out, term);

        let wo_local = hit.frame.to_local(-ray.dir);
        if wo_local.z <= 0.0 {
            return out;
        }
        let (model, albedo, rough) = view.material_at(tape, &hit, attach.phi);
        let bs = match sample_brdf(tape, model, albedo, rough, wo_local, rng) {
            Some(s) if s.pdf > 0.0 => s,
            _ => return out,
        };
        let weight = bs.wi.z / bs.pdf;
        let fw = tape.rgb_scale(bs.value, weight);
        beta = tape.rgb_mul(beta, fw);
        let wi_world = hit.frame.to_world(bs.wi);
        ray = view.scene.spawn_ray(hit.position, hit.n, wi_world);
        if depth + 1 == k {
            stats.ray_segments += 1;
            let incident = match view.scene.intersect(&ray) {
                Some(h2) => {
                    let hint = view.albedo_hint(tape, &h2, attach.albedo_hint);
                    field.radiance(tape, view.store, h2.position, -wi_world, h2.n, hint, attach.theta)
                }
                None => view.environment(tape, wi_world, attach.phi),
            };
            let term = tape.rgb_mul(beta, incident);
            out = tape.rgb_add(out, term);
        }
    }
    out
}

/// RHS-rendered image (values only): E + T(L) at every primary hit,
/// background pixels take the environment radiance.
pub fn render_rhs<R: Radiance + ?Sized>(
    view: SceneView,
    field: &R,
    camera: &PinholeCamera,
    opts: &RenderOpts,
) -> ImageBuffer {
    render_rhs_k(view, field, camera, 1, opts)
}

/// Truncated-series image with k differentiable bounces (values only).
pub fn render_rhs_k<R: Radiance + ?Sized>(
    view: SceneView,
    field: &R,
    camera: &PinholeCamera,
    k: u32,
    opts: &RenderOpts,
) -> ImageBuffer {
    assert!(k >= 1, "render_rhs_k needs k >= 1");
    render_image(camera, opts, |pixel, s, rng, tape, stats| {
        rgb_value(render_rhs_k_pixel(
            view,
            field,
            tape,
            camera,
            pixel,
            s,
            k,
            opts.spp,
            rng,
            RhsAttach::default(),
            stats,
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{GradientTable, ParamStore, Var};
    use crate::geometry::SceneParams;
    use crate::math::vec3;
    use crate::neuralfield::ConstField;
    use crate::scenes;
    use crate::transport::render_pt;

    fn setup(scene: &crate::geometry::Scene) -> (ParamStore, SceneParams) {
        let mut store = ParamStore::new();
        let mut rng = RandomStream::new(1);
        let params = SceneParams::build(scene, &mut store, &mut rng);
        (store, params)
    }

    #[test]
    fn zero_field_reduces_to_emission() {
        let scene = scenes::furnace_cube(0.5, 1.0);
        let (store, params) = setup(&scene);
        let view = SceneView::new(&scene, &store, &params);
        let field = ConstField([0.0, 0.0, 0.0]);
        let mut tape = Tape::new();
        let mut stats = RenderStats::default();
        let mut rng = RandomStream::new(5);
        let ray = crate::geometry::Ray::new(vec3(0.0, 0.0, 0.0), vec3(0.0, 0.0, 1.0), 0.0, f64::INFINITY);
        let hit = scene.intersect(&ray).unwrap();
        let sample = ShadingSample::primary(hit, ray.dir);
        let est = estimate_rhs(
            view,
            &field,
            &mut tape,
            &sample,
            &mut rng,
            1,
            RhsAttach::default(),
            &mut stats,
        );
        // T(0) = 0, so the estimate is exactly E
        assert_eq!(rgb_value(est), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn exact_equilibrium_field_is_a_fixed_point() {
        // L == 1/(1-rho) in the furnace: E + T(L) == L in expectation
        let rho = 0.5;
        let scene = scenes::furnace_cube(rho, 1.0);
        let (store, params) = setup(&scene);
        let view = SceneView::new(&scene, &store, &params);
        let eq = 1.0 / (1.0 - rho);
        let field = ConstField([eq, eq, eq]);
        let mut tape = Tape::new();
        let mut stats = RenderStats::default();
        let ray = crate::geometry::Ray::new(vec3(0.2, -0.1, 0.0), vec3(0.3, 0.2, 0.93).normalized(), 0.0, f64::INFINITY);
        let hit = scene.intersect(&ray).unwrap();
        let sample = ShadingSample::primary(hit, ray.dir);
        let n = 10_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for i in 0..n {
            let mut rng = RandomStream::derive(42, &[i]);
            let mark = tape.mark();
            let est = estimate_rhs(
                view,
                &field,
                &mut tape,
                &sample,
                &mut rng,
                1,
                RhsAttach::default(),
                &mut stats,
            );
            let v = rgb_value(est)[0];
            sum += v;
            sum2 += v * v;
            tape.reset_to(mark);
        }
        let mean = sum / n as f64;
        let sigma = (((sum2 / n as f64 - mean * mean).max(0.0)) / n as f64).sqrt();
        assert!(
            (mean - eq).abs() <= 3.0 * sigma.max(1e-12),
            "estimate mean {mean} vs equilibrium {eq} (3 sigma {})",
            3.0 * sigma
        );
    }

    #[test]
    fn k1_is_bit_identical_to_render_rhs() {
        let scene = scenes::lit_cube(0.7, 5.0);
        let (store, params) = setup(&scene);
        let view = SceneView::new(&scene, &store, &params);
        let field = ConstField([0.3, 0.3, 0.3]);
        let opts = RenderOpts::default().with_spp(4).with_seed(9).with_threads(2);
        let a = render_rhs(view, &field, &scene.cameras[0], &opts);
        let b = render_rhs_k(view, &field, &scene.cameras[0], 1, &opts);
        for y in 0..a.height {
            for x in 0..a.width {
                let (pa, pb) = (a.pixel(x, y), b.pixel(x, y));
                for c in 0..3 {
                    assert_eq!(pa[c].to_bits(), pb[c].to_bits());
                }
            }
        }
    }

    #[test]
    fn expectation_is_independent_of_k_at_the_fixed_point() {
        let rho = 0.5;
        let scene = scenes::furnace_cube(rho, 1.0);
        let (store, params) = setup(&scene);
        let view = SceneView::new(&scene, &store, &params);
        let eq = 1.0 / (1.0 - rho);
        let field = ConstField([eq, eq, eq]);
        let opts = RenderOpts::default().with_spp(256).with_seed(13).with_threads(2);
        let mut means = Vec::new();
        for k in 1..=3 {
            let img = render_rhs_k(view, &field, &scene.cameras[0], k, &opts);
            means.push(img.mean_all());
        }
        for m in &means {
            assert!((m - eq).abs() < 0.03, "k-mean {m} far from {eq}");
        }
        let spread = means
            .iter()
            .fold(0.0f64, |acc, m| acc.max((m - eq).abs()));
        assert!(spread < 0.03, "k means spread too wide: {means:?}");
    }

    #[test]
    fn segment_count_is_exactly_k_plus_one_in_closed_scenes() {
        let scene = scenes::furnace_cube(0.9, 1.0);
        let (store, params) = setup(&scene);
        let view = SceneView::new(&scene, &store, &params);
        let field = ConstField([1.0, 1.0, 1.0]);
        for k in 1..=3u32 {
            let opts = RenderOpts::default().with_spp(4).with_seed(21);
            let img = render_rhs_k(view, &field, &scene.cameras[0], k, &opts);
            assert_eq!(
                img.stats.ray_segments,
                img.stats.camera_samples * (k as u64 + 1),
                "k={k}"
            );
        }
    }

    #[test]
    fn rhs_image_with_exact_field_matches_path_tracer() {
        let rho = 0.5;
        let scene = scenes::furnace_cube(rho, 1.0);
        let (store, params) = setup(&scene);
        let view = SceneView::new(&scene, &store, &params);
        let eq = 1.0 / (1.0 - rho);
        let field = ConstField([eq, eq, eq]);
        // late roulette keeps the reference low-variance at this spp
        let opts = RenderOpts {
            spp: 64,
            max_depth: 64,
            rr_start_depth: 16,
            seed: 3,
            threads: 2,
            ..RenderOpts::default()
        };
        let rhs = render_rhs(view, &field, &scene.cameras[0], &opts);
        let pt = render_pt(view, &scene.cameras[0], &opts);
        let psnr = crate::inverse::psnr_images(&rhs, &pt, eq);
        assert!(psnr >= 35.0, "PSNR {psnr} below 35 dB");
    }

    #[test]
    fn constant_albedo_gradient_matches_finite_differences() {
        let scene = scenes::lit_cube(0.6, 5.0);
        let (mut store, params) = setup(&scene);
        let field = ConstField([0.8, 0.8, 0.8]);
        let pixel = (16, 24);
        let spp = 8;

        let eval = |store: &ParamStore, attach: bool, grads: Option<&mut GradientTable>| -> f64 {
            let view = SceneView::new(&scene, store, &params);
            let mut tape = Tape::new();
            let mut stats = RenderStats::default();
            let mut acc = Var::constant(0.0);
            for s in 0..spp {
                let mut rng = RandomStream::derive(123, &[s as u64]);
                let v = render_rhs_k_pixel(
                    view,
                    &field,
                    &mut tape,
                    &scene.cameras[0],
                    pixel,
                    s,
                    1,
                    spp,
                    &mut rng,
                    RhsAttach {
                        phi: attach,
                        ..RhsAttach::default()
                    },
                    &mut stats,
                );
                let lum = tape.lincomb(&v, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
                acc = tape.add(acc, lum);
            }
            let mean = tape.scale(acc, 1.0 / spp as f64);
            if let Some(g) = grads {
                tape.backward(mean, store, g);
            }
            mean.value()
        };

        let mut grads = GradientTable::new(store.len());
        eval(&store, true, Some(&mut grads));
        let albedo_range = match &params.materials[0].albedo {
            crate::materials::ParameterField::Constant { params, .. } => *params,
            _ => unreachable!(),
        };
        let mut checked = 0;
        for id in albedo_range.iter() {
            let h = 1e-4;
            let base = store.value(id);
            store.set(id, base + h);
            let vp = eval(&store, false, None);
            store.set(id, base - h);
            let vm = eval(&store, false, None);
            store.set(id, base);
            let fd = (vp - vm) / (2.0 * h);
            if fd.abs() > 1e-9 {
                approx::assert_relative_eq!(grads.get(id), fd, max_relative = 1e-3, epsilon = 1e-9);
                checked += 1;
            }
        }
        assert!(checked >= 2);
    }
}
