//! Reference forward path tracer (ground-truth generator) and the path
//! length statistics simulator.

use super::{render_image, rr_survival, ImageBuffer, RenderOpts, RenderStats, SceneView};
use crate::autodiff::{rgb_value, Tape};
use crate::geometry::{Ray, Scene};
use crate::materials::sample_brdf;
use crate::math::{rgb_add, rgb_mul, rgb_scale, vec3, Rgb};
use crate::rng::RandomStream;

/// One path-traced camera sample; cosine/BRDF sampling, emitters picked
/// up on hit, Russian roulette after `rr_start_depth` bounces.
fn trace_path(
    view: SceneView,
    tape: &mut Tape,
    mut ray: Ray,
    opts: &RenderOpts,
    rng: &mut RandomStream,
    stats: &mut RenderStats,
) -> Rgb {
    let mut radiance = [0.0, 0.0, 0.0];
    let mut beta = [1.0, 1.0, 1.0];
    for bounce in 0..=opts.max_depth {
        stats.ray_segments += 1;
        let hit = match view.scene.intersect(&ray) {
            Some(h) => h,
            None => {
                let env = rgb_value(view.environment(tape, ray.dir, false));
                radiance = rgb_add(radiance, rgb_mul(beta, env));
                break;
            }
        };
        radiance = rgb_add(radiance, rgb_mul(beta, view.emitted(&hit)));
        if bounce == opts.max_depth {
            break;
        }
        let wo_local = hit.frame.to_local(-ray.dir);
        let (model, albedo, rough) = view.material_at(tape, &hit, false);
        let sample = match sample_brdf(tape, model, albedo, rough, wo_local, rng) {
            Some(s) if s.pdf > 0.0 => s,
            _ => break,
        };
        let weight = sample.wi.z / sample.pdf;
        beta = rgb_mul(beta, rgb_scale(rgb_value(sample.value), weight));
        // bounces below rr_start_depth always continue
        if bounce >= opts.rr_start_depth {
            let s = rr_survival(
                beta[0].max(beta[1]).max(beta[2]),
                opts.rr_prob,
                opts.min_survival,
            );
            if rng.next_f64() >= s {
                break;
            }
            beta = rgb_scale(beta, 1.0 / s);
        }
        let wi_world = hit.frame.to_world(sample.wi);
        ray = view.scene.spawn_ray(hit.position, hit.n, wi_world);
    }
    radiance
}

/// Unbiased (up to the depth cap) forward path-traced image. Not
/// differentiable; this is the ground-truth generator.
pub fn render_pt(view: SceneView, camera: &crate::geometry::PinholeCamera, opts: &RenderOpts) -> ImageBuffer {
    render_image(camera, opts, |pixel, s, rng, tape, stats| {
        let (ray, _) = camera.sample_ray_stratified(pixel, s, opts.spp, rng);
        // trace_path counts the camera segment itself
        trace_path(view, tape, ray, opts, rng, stats)
    })
}

/// Fixed-length path-traced pixel estimate without Russian roulette;
/// smooth in the scene parameters under a frozen seed, which makes it
/// the finite-difference reference for gradient maps.
pub fn render_pt_pixel_fixed(
    view: SceneView,
    camera: &crate::geometry::PinholeCamera,
    pixel: (u32, u32),
    spp: u32,
    max_depth: u32,
    seed: u64,
) -> Rgb {
    let mut total = [0.0, 0.0, 0.0];
    let mut tape = Tape::new();
    let mut stats = RenderStats::default();
    let opts = RenderOpts {
        spp,
        max_depth,
        rr_prob: 1.0,
        rr_start_depth: u32::MAX,
        min_survival: 1.0,
        seed,
        threads: 1,
    };
    for s in 0..spp {
        let pix = pixel.1 as u64 * camera.width as u64 + pixel.0 as u64;
        let mut rng = RandomStream::derive(seed, &[0x9e11, pix, s as u64]);
        let (ray, _) = camera.sample_ray_stratified(pixel, s, spp, &mut rng);
        let v = trace_path(view, &mut tape, ray, &opts, &mut rng, &mut stats);
        total = rgb_add(total, v);
        tape.clear();
    }
    rgb_scale(total, 1.0 / spp as f64)
}

/// One differentiable path-traced camera sample (the AD-PT baseline):
/// full multi-bounce transport on the tape with detached sampling. The
/// recorded graph grows with the path length; that growth is the point
/// of the comparison against cache-based rendering.
#[allow(clippy::too_many_arguments)]
pub fn render_pt_pixel_diff(
    view: SceneView,
    tape: &mut Tape,
    camera: &crate::geometry::PinholeCamera,
    pixel: (u32, u32),
    sample: u32,
    spp: u32,
    rng: &mut RandomStream,
    opts: &RenderOpts,
    attach_phi: bool,
    stats: &mut RenderStats,
) -> crate::autodiff::RgbVar {
    use crate::autodiff::rgb_const;
    let (mut ray, _) = camera.sample_ray_stratified(pixel, sample, spp, rng);
    let mut beta = rgb_const([1.0, 1.0, 1.0]);
    let mut out = rgb_const([0.0, 0.0, 0.0]);
    for bounce in 0..=opts.max_depth {
        stats.ray_segments += 1;
        let hit = match view.scene.intersect(&ray) {
            Some(h) => h,
            None => {
                let env = view.environment(tape, ray.dir, attach_phi);
                let term = tape.rgb_mul(beta, env);
                out = tape.rgb_add(out, term);
                break;
            }
        };
        let emitted = rgb_const(view.emitted(&hit));
        let term = tape.rgb_mul(beta, emitted);
        out = tape.rgb_add(out, term);
        if bounce == opts.max_depth {
            break;
        }
        let wo_local = hit.frame.to_local(-ray.dir);
        if wo_local.z <= 0.0 {
            break;
        }
        let (model, albedo, rough) = view.material_at(tape, &hit, attach_phi);
        let bs = match sample_brdf(tape, model, albedo, rough, wo_local, rng) {
            Some(s) if s.pdf > 0.0 => s,
            _ => break,
        };
        let weight = bs.wi.z / bs.pdf;
        let fw = tape.rgb_scale(bs.value, weight);
        beta = tape.rgb_mul(beta, fw);
        if bounce >= opts.rr_start_depth {
            // roulette decisions use detached throughput values
            let bval = rgb_value(beta);
            let s = rr_survival(
                bval[0].max(bval[1]).max(bval[2]),
                opts.rr_prob,
                opts.min_survival,
            );
            if s <= 0.0 || rng.next_f64() >= s {
                break;
            }
            beta = tape.rgb_scale(beta, 1.0 / s);
        }
        let wi_world = hit.frame.to_world(bs.wi);
        ray = view.scene.spawn_ray(hit.position, hit.n, wi_world);
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub struct RoulettePolicy {
    pub max_survival: f64,
    pub min_survival: f64,
}

impl Default for RoulettePolicy {
    fn default() -> Self {
        // throughput-proportional survival, uncapped; reproduces the
        // measured Cube-scene means (survival == albedo per bounce)
        RoulettePolicy {
            max_survival: 1.0,
            min_survival: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PathLengthStats {
    /// Mean path length in segments, tail-capped at the 99.9 percentile.
    pub mean: f64,
    pub mean_uncapped: f64,
    pub p999: f64,
    pub max: u32,
}

/// Simulates throughput-proportional Russian roulette over the real
/// scene geometry at a given wall albedo and reports path-length
/// statistics (lengths counted in ray segments).
pub fn path_length_stats(
    scene: &Scene,
    albedo: f64,
    n_paths: usize,
    policy: RoulettePolicy,
    seed: u64,
) -> PathLengthStats {
    let mut lengths: Vec<u32> = Vec::with_capacity(n_paths);
    let lo = scene.bounds_min;
    let size = scene.bounds_max - scene.bounds_min;
    for i in 0..n_paths {
        let mut rng = RandomStream::derive(seed, &[0x7a7a, i as u64]);
        // random interior origin and direction
        let origin = vec3(
            lo.x + size.x * (0.05 + 0.9 * rng.next_f64()),
            lo.y + size.y * (0.05 + 0.9 * rng.next_f64()),
            lo.z + size.z * (0.05 + 0.9 * rng.next_f64()),
        );
        let dir = loop {
            let d = vec3(
                rng.next_f64() * 2.0 - 1.0,
                rng.next_f64() * 2.0 - 1.0,
                rng.next_f64() * 2.0 - 1.0,
            );
            let l2 = d.length_squared();
            if l2 > 1e-6 && l2 <= 1.0 {
                break d / l2.sqrt();
            }
        };
        let mut ray = Ray::new(origin, dir, 0.0, f64::INFINITY);
        let mut segments = 0u32;
        let mut throughput = 1.0f64;
        loop {
            segments += 1;
            let hit = match scene.intersect(&ray) {
                Some(h) => h,
                None => break,
            };
            throughput *= albedo;
            let s = rr_survival(throughput, policy.max_survival, policy.min_survival);
            if s <= 0.0 || rng.next_f64() >= s {
                break;
            }
            throughput /= s;
            // cosine-sampled continuation
            let (local, _) = crate::materials::cosine_sample_hemisphere(&mut rng);
            let w = hit.frame.to_world(local);
            ray = scene.spawn_ray(hit.position, hit.n, w);
        }
        lengths.push(segments);
    }
    lengths.sort_unstable();
    let max = *lengths.last().unwrap_or(&0);
    let idx = ((lengths.len() as f64) * 0.999).ceil() as usize - 1;
    let p999 = lengths[idx.min(lengths.len() - 1)] as f64;
    let mean_uncapped = lengths.iter().map(|&l| l as f64).sum::<f64>() / lengths.len() as f64;
    let mean = lengths
        .iter()
        .map(|&l| (l as f64).min(p999))
        .sum::<f64>()
        / lengths.len() as f64;
    PathLengthStats {
        mean,
        mean_uncapped,
        p999,
        max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamStore;
    use crate::geometry::SceneParams;
    use crate::scenes;

    fn view_of(scene: &Scene) -> (ParamStore, SceneParams) {
        let mut store = ParamStore::new();
        let mut rng = RandomStream::new(1);
        let params = SceneParams::build(scene, &mut store, &mut rng);
        (store, params)
    }

    #[test]
    fn staring_at_emitter_sees_its_radiance() {
        let scene = scenes::emitter_panel(5.0);
        let (store, params) = view_of(&scene);
        let view = SceneView::new(&scene, &store, &params);
        let img = render_pt(view, &scene.cameras[0], &RenderOpts::default().with_spp(8));
        // zero-bounce term: every sample hits the panel head-on
        for y in 0..img.height {
            for x in 0..img.width {
                let p = img.pixel(x, y);
                assert_eq!(p, [5.0, 5.0, 5.0]);
            }
        }
    }

    #[test]
    fn no_emitters_means_black() {
        let scene = scenes::unlit_cube(0.8);
        let (store, params) = view_of(&scene);
        let view = SceneView::new(&scene, &store, &params);
        let img = render_pt(view, &scene.cameras[0], &RenderOpts::default().with_spp(4));
        assert_eq!(img.mean_all(), 0.0);
    }

    #[test]
    fn furnace_reaches_equilibrium() {
        // all walls emit 1 with albedo 0.5: equilibrium radiance is
        // 1/(1-0.5) = 2 everywhere
        let scene = scenes::furnace_cube(0.5, 1.0);
        let (store, params) = view_of(&scene);
        let view = SceneView::new(&scene, &store, &params);
        let opts = RenderOpts {
            spp: 256,
            max_depth: 64,
            seed: 7,
            threads: 2,
            ..RenderOpts::default()
        };
        let img = render_pt(view, &scene.cameras[0], &opts);
        let mean = img.mean_all();
        assert!(
            (mean - 2.0).abs() < 0.04,
            "furnace mean {mean} not within 2% of 2.0"
        );
    }

    #[test]
    fn diff_path_tracer_matches_plain_path_tracer_in_expectation() {
        let scene = scenes::furnace_cube(0.5, 1.0);
        let (store, params) = view_of(&scene);
        let view = SceneView::new(&scene, &store, &params);
        let opts = RenderOpts {
            spp: 1,
            max_depth: 32,
            seed: 17,
            ..RenderOpts::default()
        };
        let mut tape = Tape::new();
        let mut stats = RenderStats::default();
        let n = 20_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for i in 0..n {
            let mut rng = RandomStream::derive(17, &[i]);
            let mark = tape.mark();
            let v = render_pt_pixel_diff(
                view,
                &mut tape,
                &scene.cameras[0],
                (16, 16),
                0,
                1,
                &mut rng,
                &opts,
                false,
                &mut stats,
            );
            let x = rgb_value(v)[0];
            sum += x;
            sum2 += x * x;
            tape.reset_to(mark);
        }
        let mean = sum / n as f64;
        let sigma = (((sum2 / n as f64 - mean * mean).max(0.0)) / n as f64).sqrt();
        // furnace equilibrium (slightly depressed by the depth cap)
        assert!(
            (mean - 2.0).abs() <= 3.0 * sigma + 0.01,
            "diff PT mean {mean}, 3 sigma {}",
            3.0 * sigma
        );
    }

    #[test]
    fn diff_path_tracer_gradient_matches_finite_differences() {
        // no roulette, short fixed depth: smooth in the albedo parameter;
        // the furnace gives every path emission at each vertex
        let scene = scenes::furnace_cube(0.6, 1.0);
        let (mut store, params) = view_of(&scene);
        let pixel = (20, 22);
        let opts = RenderOpts {
            spp: 4,
            max_depth: 3,
            rr_start_depth: u32::MAX,
            seed: 5,
            ..RenderOpts::default()
        };

        let eval = |store: &ParamStore,
                    attach: bool,
                    grads: Option<&mut crate::autodiff::GradientTable>|
         -> f64 {
            let view = SceneView::new(&scene, store, &params);
            let mut tape = Tape::new();
            let mut stats = RenderStats::default();
            let mut acc = crate::autodiff::Var::constant(0.0);
            for s in 0..opts.spp {
                let mut rng = RandomStream::derive(5, &[s as u64]);
                let v = render_pt_pixel_diff(
                    view,
                    &mut tape,
                    &scene.cameras[0],
                    pixel,
                    s,
                    opts.spp,
                    &mut rng,
                    &opts,
                    attach,
                    &mut stats,
                );
                let lum = tape.lincomb(&v, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
                acc = tape.add(acc, lum);
            }
            let mean = tape.scale(acc, 1.0 / opts.spp as f64);
            if let Some(g) = grads {
                tape.backward(mean, store, g);
            }
            mean.value()
        };

        let mut grads = crate::autodiff::GradientTable::new(store.len());
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

    #[test]
    fn path_length_zero_albedo_terminates_immediately() {
        let scene = scenes::furnace_cube(0.5, 1.0);
        let stats = path_length_stats(&scene, 0.0, 10_000, RoulettePolicy::default(), 3);
        assert_eq!(stats.mean, 1.0);
        assert_eq!(stats.max, 1);
    }

    #[test]
    fn path_length_mean_tracks_expected_series() {
        let scene = scenes::furnace_cube(0.5, 1.0);
        for (albedo, expect) in [(0.3, 1.43), (0.5, 1.98), (0.7, 3.30)] {
            let stats = path_length_stats(&scene, albedo, 200_000, RoulettePolicy::default(), 5);
            let rel = (stats.mean - expect).abs() / expect;
            assert!(
                rel < 0.03,
                "albedo {albedo}: mean {} vs expected {expect} (rel {rel})",
                stats.mean
            );
        }
    }
}
