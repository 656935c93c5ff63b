//! Loss assembly: photometric (RHS rendering vs ground truth),
//! radiometric prior (rendering-equation residual), and LHS
//! reconstruction, with per-term gradient routing and two-pass
//! decorrelation.
//!
//! Every term is split into a weight pass and a gradient pass with
//! independent RNG streams. The gradient-carrying objective of a term is
//! sum_j w_j * estimate2_j with w_j computed from the first pass and
//! treated as constants, so the tape gradient equals the finite
//! difference of the frozen-weight objective exactly.

use crate::autodiff::{rgb_stop_gradient, rgb_value, RgbVar, Tape, Var};
use crate::geometry::PinholeCamera;
use crate::materials::sample_brdf;
use crate::math::Rgb;
use crate::neuralfield::Radiance;
use crate::rng::RandomStream;
use crate::transport::{
    render_direct_pixel, render_pt_pixel_diff, render_rhs_k_pixel, RenderOpts, RenderStats,
    RhsAttach, SceneView,
};

pub const REL_L2_EPS: f64 = 0.01;

const TAG_BATCH: u64 = 0xBA7C;
const TAG_PHOTO_A: u64 = 0xA0;
const TAG_PHOTO_B: u64 = 0xB0;
const TAG_PRIOR_A: u64 = 0xA1;

#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub photometric: f64,
    pub prior: f64,
    pub lhs: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            photometric: 1.0,
            prior: 1.0,
            lhs: 1.0,
        }
    }
}

/// Which gradients each loss term is allowed to reach. The defaults
/// implement the stop-gradient scheme: the prior never updates scene
/// parameters, the photometric term never updates the cache.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct Routing {
    pub photo_to_phi: bool,
    pub photo_to_theta: bool,
    pub prior_to_theta: bool,
    pub prior_to_phi: bool,
    pub lhs_to_theta: bool,
}

impl Default for Routing {
    fn default() -> Self {
        Routing {
            photo_to_phi: true,
            photo_to_theta: false,
            prior_to_theta: true,
            prior_to_phi: false,
            lhs_to_theta: true,
        }
    }
}

impl Routing {
    pub fn all_off() -> Routing {
        Routing {
            photo_to_phi: false,
            photo_to_theta: false,
            prior_to_theta: false,
            prior_to_phi: false,
            lhs_to_theta: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BatchPixel {
    /// Pixel coordinates in the chosen view.
    pub pixel: (u32, u32),
    pub target: Rgb,
}

#[derive(Clone, Debug)]
pub struct Batch {
    pub view_index: usize,
    pub pixels: Vec<BatchPixel>,
}

/// One random view, one random square crop, `batch_pixels` pixels; with
/// a foreground mask and `foreground_min_frac` set, at least that
/// fraction of the batch comes from foreground pixels.
pub fn build_batch(
    dataset: &super::MultiViewDataset,
    batch_pixels: u32,
    foreground_min_frac: Option<f64>,
    seed: u64,
    step_tag: u64,
) -> Batch {
    let mut rng = RandomStream::derive(seed, &[TAG_BATCH, step_tag]);
    let view_index = rng.next_usize(dataset.views.len());
    let view = &dataset.views[view_index];
    let (w, h) = (dataset.width, dataset.height);
    let want = batch_pixels.min(w * h) as usize;
    let side = ((want as f64).sqrt().ceil() as u32).min(w).min(h);
    let ox = if w > side { rng.next_usize((w - side) as usize + 1) as u32 } else { 0 };
    let oy = if h > side { rng.next_usize((h - side) as usize + 1) as u32 } else { 0 };

    let mut window = Vec::with_capacity((side * side) as usize);
    for y in oy..oy + side {
        for x in ox..ox + side {
            window.push((x, y));
        }
    }
    let ordered: Vec<(u32, u32)> = match (view.mask.as_ref(), foreground_min_frac) {
        (Some(mask), Some(frac)) => {
            let (mut fg, mut bg) = (Vec::new(), Vec::new());
            for &(x, y) in &window {
                if mask[(y * w + x) as usize] {
                    fg.push((x, y));
                } else {
                    bg.push((x, y));
                }
            }
            let need_fg = ((want as f64) * frac).ceil() as usize;
            let mut out = Vec::with_capacity(want);
            let mut fi = 0;
            while out.len() < need_fg.min(want) && !fg.is_empty() {
                out.push(fg[fi % fg.len()]);
                fi += 1;
            }
            let mut rest: Vec<(u32, u32)> = fg.into_iter().skip(fi).collect();
            rest.extend(bg);
            out.extend(rest);
            out
        }
        _ => window,
    };
    let pixels = ordered
        .into_iter()
        .take(want)
        .map(|(x, y)| BatchPixel {
            pixel: (x, y),
            target: view.image[(y * w + x) as usize],
        })
        .collect();
    Batch { view_index, pixels }
}

/// Frozen first-pass weights for one pixel.
#[derive(Clone, Debug, Default)]
pub struct PixelWeights {
    pub photo: Vec<[f64; 3]>,
    pub prior: Vec<[f64; 3]>,
    pub lhs: Option<[f64; 3]>,
}

/// Taped gradient-pass terms for one pixel, each paired with its frozen
/// weight; seeding `backward` with these weights yields the step
/// gradient, summing weight * value yields the FD-able objective.
pub struct PixelComputation {
    pub photo: Vec<(RgbVar, [f64; 3])>,
    pub prior: Vec<(RgbVar, [f64; 3])>,
    pub lhs: Option<(RgbVar, [f64; 3])>,
    pub weights: PixelWeights,
    /// Raw (unweighted) per-term loss contributions of this pixel.
    pub report: [f64; 3],
    pub prior_segments: u64,
    pub prior_samples: u64,
    /// 1 when the pixel's prior chain found a primary hit.
    pub prior_chains: u64,
    pub photo_segments: u64,
}

/// Image formation model behind the photometric term.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhotoModel {
    /// k differentiable bounces, then the radiance cache.
    Cache,
    /// E + one next-event-estimation scattering (AD-Direct baseline).
    Direct,
    /// Fully differentiable path tracing (AD-PT baseline).
    PathTraced {
        max_depth: u32,
        rr_prob: f64,
        rr_start_depth: u32,
    },
}

impl Default for PhotoModel {
    fn default() -> Self {
        PhotoModel::Cache
    }
}

#[derive(Clone, Copy)]
pub struct LossConfig {
    pub spp: u32,
    pub k: u32,
    pub n_inner: u32,
    pub prior_bounces: u32,
    pub prior_samples_per_pixel: bool,
    pub attach_albedo_hint: bool,
    pub eps: f64,
    pub weights: LossWeights,
    pub routing: Routing,
    pub batch_size: usize,
    pub seed: u64,
    pub photo_model: PhotoModel,
}

fn pick<const N: usize>(attached: [Var; N], attach: bool) -> [Var; N] {
    if attach {
        attached
    } else {
        attached.map(crate::autodiff::stop_gradient)
    }
}

/// One photometric camera-sample estimate under the configured image
/// formation model.
#[allow(clippy::too_many_arguments)]
fn photo_estimate<R: Radiance + ?Sized>(
    view: SceneView,
    field: &R,
    tape: &mut Tape,
    camera: &PinholeCamera,
    pixel: (u32, u32),
    s: u32,
    cfg: &LossConfig,
    rng: &mut RandomStream,
    attach: RhsAttach,
    stats: &mut RenderStats,
) -> RgbVar {
    match cfg.photo_model {
        PhotoModel::Cache => render_rhs_k_pixel(
            view, field, tape, camera, pixel, s, cfg.k, cfg.spp, rng, attach, stats,
        ),
        PhotoModel::Direct => {
            render_direct_pixel(view, tape, camera, pixel, s, cfg.spp, rng, attach.phi, stats)
        }
        PhotoModel::PathTraced {
            max_depth,
            rr_prob,
            rr_start_depth,
        } => {
            let opts = RenderOpts {
                spp: cfg.spp,
                max_depth,
                rr_prob,
                rr_start_depth,
                ..RenderOpts::default()
            };
            render_pt_pixel_diff(
                view, tape, camera, pixel, s, cfg.spp, rng, &opts, attach.phi, stats,
            )
        }
    }
}

/// Builds every loss term for one batch pixel. `frozen` substitutes
/// previously computed first-pass weights (gradient-check contract).
#[allow(clippy::too_many_arguments)]
pub fn compute_pixel<R: Radiance + ?Sized>(
    view: SceneView,
    field: &R,
    tape: &mut Tape,
    camera: &PinholeCamera,
    px: &BatchPixel,
    cfg: &LossConfig,
    step_tag: u64,
    view_index: usize,
    frozen: Option<&PixelWeights>,
) -> PixelComputation {
    let routing = cfg.routing;
    let lw = cfg.weights;
    let pix_lin = px.pixel.1 as u64 * camera.width as u64 + px.pixel.0 as u64;
    let base_tags = [step_tag, view_index as u64, pix_lin];
    let spp = cfg.spp.max(1);
    let batch = cfg.batch_size.max(1) as f64;

    let mut out = PixelComputation {
        photo: Vec::with_capacity(spp as usize),
        prior: Vec::new(),
        lhs: None,
        weights: PixelWeights::default(),
        report: [0.0; 3],
        prior_segments: 0,
        prior_samples: 0,
        prior_chains: 0,
        photo_segments: 0,
    };

    if lw.photometric == 0.0 {
        if lw.prior > 0.0 || lw.lhs > 0.0 {
            prior_chain(view, field, tape, camera, px, cfg, &base_tags, frozen, &mut out);
        }
        return out;
    }

    // -- photometric: weight pass (independent estimate of the pixel) ----
    let photo_attach = RhsAttach {
        phi: routing.photo_to_phi,
        theta: routing.photo_to_theta,
        albedo_hint: cfg.attach_albedo_hint,
    };
    let mut stats_a = RenderStats::default();
    let mut i1 = [0.0; 3];
    for s in 0..spp {
        let mut rng = RandomStream::derive(
            cfg.seed,
            &[TAG_PHOTO_A, base_tags[0], base_tags[1], base_tags[2], s as u64],
        );
        let mark = tape.mark();
        let v = photo_estimate(
            view,
            field,
            tape,
            camera,
            px.pixel,
            s,
            cfg,
            &mut rng,
            RhsAttach::default(),
            &mut stats_a,
        );
        let v = rgb_value(v);
        tape.reset_to(mark);
        for c in 0..3 {
            i1[c] += v[c] / spp as f64;
        }
    }
    let photo_w = match frozen {
        Some(f) => f.photo.clone(),
        None => {
            // one weight per channel, shared by every gradient sample of
            // this pixel: 2 (I1 - t) / (sg(I1)^2 + eps), normalized over
            // channels, batch, and spp
            let mut w = [0.0; 3];
            for c in 0..3 {
                let den = i1[c] * i1[c] + cfg.eps;
                w[c] = lw.photometric * 2.0 * (i1[c] - px.target[c])
                    / (den * 3.0 * batch * spp as f64);
            }
            vec![w; spp as usize]
        }
    };
    out.weights.photo = photo_w.clone();
    for c in 0..3 {
        let den = i1[c] * i1[c] + cfg.eps;
        let d = i1[c] - px.target[c];
        out.report[0] += d * d / (den * 3.0 * batch);
    }

    // -- photometric: gradient pass -------------------------------------
    let mut stats_b = RenderStats::default();
    for s in 0..spp {
        let mut rng = RandomStream::derive(
            cfg.seed,
            &[TAG_PHOTO_B, base_tags[0], base_tags[1], base_tags[2], s as u64],
        );
        let est = photo_estimate(
            view,
            field,
            tape,
            camera,
            px.pixel,
            s,
            cfg,
            &mut rng,
            photo_attach,
            &mut stats_b,
        );
        out.photo.push((est, photo_w[s as usize]));
    }
    out.photo_segments = stats_b.ray_segments;

    // -- prior + lhs: reuse the first gradient-pass camera sample --------
    if lw.prior > 0.0 || lw.lhs > 0.0 {
        prior_chain(view, field, tape, camera, px, cfg, &base_tags, frozen, &mut out);
    }
    out
}

/// Prior chain for one pixel: primary hit shared with the first
/// photometric gradient sample, one residual per configured bounce,
/// and the LHS term sharing the bounce-0 cache query.
#[allow(clippy::too_many_arguments)]
fn prior_chain<R: Radiance + ?Sized>(
    view: SceneView,
    field: &R,
    tape: &mut Tape,
    camera: &PinholeCamera,
    px: &BatchPixel,
    cfg: &LossConfig,
    base_tags: &[u64; 3],
    frozen: Option<&PixelWeights>,
    out: &mut PixelComputation,
) {
    let routing = cfg.routing;
    let lw = cfg.weights;
    let spp = cfg.spp.max(1);
    let batch = cfg.batch_size.max(1) as f64;
    let n_prior_per_pixel = cfg.prior_bounces.max(1) as f64;

    // same stream tags as photometric gradient sample 0: identical
    // jitter and identical scattering directions, so the chain reuses
    // the very segments the measurement estimate traced
    let mut rng_g = RandomStream::derive(
        cfg.seed,
        &[TAG_PHOTO_B, base_tags[0], base_tags[1], base_tags[2], 0],
    );
    let mut rng_a = RandomStream::derive(
        cfg.seed,
        &[TAG_PRIOR_A, base_tags[0], base_tags[1], base_tags[2]],
    );
    let (ray0, _) = camera.sample_ray_stratified(px.pixel, 0, spp, &mut rng_g);
    out.prior_segments += 1;
    let hit1 = match view.scene.intersect(&ray0) {
        Some(h) => h,
        None => return,
    };
    out.prior_chains = 1;

    let attach_query = routing.prior_to_theta || routing.lhs_to_theta;
    let hint1 = view.albedo_hint(tape, &hit1, cfg.attach_albedo_hint && routing.prior_to_phi);
    let lq1 = field.radiance(
        tape,
        view.store,
        hit1.position,
        -ray0.dir,
        hit1.n,
        hint1,
        attach_query,
    );
    let lq1_val = rgb_value(lq1);

    // lhs term: the cache imaged at the primary hit vs ground truth
    if lw.lhs > 0.0 {
        let lhs_w = match frozen {
            Some(f) => f.lhs.unwrap_or([0.0; 3]),
            None => {
                let mut w = [0.0; 3];
                for c in 0..3 {
                    let den = lq1_val[c] * lq1_val[c] + cfg.eps;
                    w[c] = lw.lhs * 2.0 * (lq1_val[c] - px.target[c]) / (den * 3.0 * batch);
                }
                w
            }
        };
        let lq_for_lhs = pick(lq1, routing.lhs_to_theta);
        out.lhs = Some((lq_for_lhs, lhs_w));
        out.weights.lhs = Some(lhs_w);
        for c in 0..3 {
            let den = lq1_val[c] * lq1_val[c] + cfg.eps;
            let d = lq1_val[c] - px.target[c];
            out.report[2] += d * d / (den * 3.0 * batch);
        }
    }

    if lw.prior <= 0.0 {
        return;
    }

    // bounce 0 residual at (x1, wo0)
    let mut chain = ChainState {
        hit: hit1,
        wo: -ray0.dir,
        lq: lq1,
        lq_val: lq1_val,
    };
    for bounce in 0..cfg.prior_bounces.max(1) {
        let wo_local = chain.hit.frame.to_local(chain.wo);
        if wo_local.z <= 0.0 {
            break;
        }
        let (model, albedo, rough) = view.material_at(tape, &chain.hit, routing.prior_to_phi);
        // gradient-pass transport sample (reused as the chain extension)
        let bs_g = match sample_brdf(tape, model, albedo, rough, wo_local, &mut rng_g) {
            Some(s) if s.pdf > 0.0 => s,
            _ => break,
        };
        let wi_world = chain.hit.frame.to_world(bs_g.wi);
        let ray = view.scene.spawn_ray(chain.hit.position, chain.hit.n, wi_world);
        out.prior_segments += 1;
        let next_hit = view.scene.intersect(&ray);
        let inc_g = match &next_hit {
            Some(h2) => {
                let hint = view.albedo_hint(tape, h2, cfg.attach_albedo_hint && routing.prior_to_phi);
                field.radiance(
                    tape,
                    view.store,
                    h2.position,
                    -wi_world,
                    h2.n,
                    hint,
                    routing.prior_to_theta,
                )
            }
            None => view.environment(tape, wi_world, routing.prior_to_phi),
        };
        let w_g = bs_g.wi.z / bs_g.pdf;
        let t_term = tape.rgb_mul(bs_g.value, inc_g);
        let t_term = tape.rgb_scale(t_term, w_g);
        let emitted = view.emitted(&chain.hit);
        let lq_for_prior = pick(chain.lq, routing.prior_to_theta);
        let mut r2 = tape.rgb_sub(lq_for_prior, t_term);
        r2 = [
            tape.add_const(r2[0], -emitted[0]),
            tape.add_const(r2[1], -emitted[1]),
            tape.add_const(r2[2], -emitted[2]),
        ];

        // weight-pass residual: independent transport sample at the
        // same (x, wo)
        let r_a = {
            let albedo_c = rgb_stop_gradient(albedo);
            let rough_c = crate::autodiff::stop_gradient(rough);
            match sample_brdf(tape, model, albedo_c, rough_c, wo_local, &mut rng_a) {
                Some(bs_a) if bs_a.pdf > 0.0 => {
                    let wi_a = chain.hit.frame.to_world(bs_a.wi);
                    let ray_a = view.scene.spawn_ray(chain.hit.position, chain.hit.n, wi_a);
                    let inc_a = match view.scene.intersect(&ray_a) {
                        Some(h2) => {
                            let hint = view.albedo_hint(tape, &h2, false);
                            rgb_value(field.radiance(
                                tape,
                                view.store,
                                h2.position,
                                -wi_a,
                                h2.n,
                                hint,
                                false,
                            ))
                        }
                        None => rgb_value(view.environment(tape, wi_a, false)),
                    };
                    let w_a = bs_a.wi.z / bs_a.pdf;
                    let f_a = rgb_value(bs_a.value);
                    let mut r = [0.0; 3];
                    for c in 0..3 {
                        r[c] = chain.lq_val[c] - emitted[c] - f_a[c] * inc_a[c] * w_a;
                    }
                    r
                }
                _ => {
                    let mut r = [0.0; 3];
                    for c in 0..3 {
                        r[c] = chain.lq_val[c] - emitted[c];
                    }
                    r
                }
            }
        };

        let idx = out.prior.len();
        let w = match frozen {
            Some(f) => f.prior.get(idx).copied().unwrap_or([0.0; 3]),
            None => {
                let mut w = [0.0; 3];
                for c in 0..3 {
                    let den = chain.lq_val[c] * chain.lq_val[c] + cfg.eps;
                    w[c] = lw.prior * 2.0 * r_a[c] / (den * 3.0 * batch * n_prior_per_pixel);
                }
                w
            }
        };
        for c in 0..3 {
            let den = chain.lq_val[c] * chain.lq_val[c] + cfg.eps;
            out.report[1] += r_a[c] * r_a[c] / (den * 3.0 * batch * n_prior_per_pixel);
        }
        out.prior.push((r2, w));
        out.weights.prior.push(w);
        out.prior_samples += 1;

        // extend to the secondary hit for the extra-bounce prior
        match next_hit {
            Some(h2) if bounce + 1 < cfg.prior_bounces => {
                chain = ChainState {
                    hit: h2,
                    wo: -wi_world,
                    lq: inc_g,
                    lq_val: rgb_value(inc_g),
                };
            }
            _ => break,
        }
    }
}

struct ChainState {
    hit: crate::geometry::SurfaceHit,
    wo: crate::math::Vec3,
    lq: RgbVar,
    lq_val: Rgb,
}

/// Seeds every term of a pixel computation into one backward sweep.
pub fn backward_pixel(
    tape: &mut Tape,
    pc: &PixelComputation,
    store: &crate::autodiff::ParamStore,
    grads: &mut crate::autodiff::GradientTable,
) {
    let mut roots: Vec<(Var, f64)> = Vec::with_capacity(pc.photo.len() * 3 + pc.prior.len() * 3 + 3);
    for (est, w) in &pc.photo {
        for c in 0..3 {
            if w[c] != 0.0 {
                roots.push((est[c], w[c]));
            }
        }
    }
    for (r2, w) in &pc.prior {
        for c in 0..3 {
            if w[c] != 0.0 {
                roots.push((r2[c], w[c]));
            }
        }
    }
    if let Some((lq, w)) = &pc.lhs {
        for c in 0..3 {
            if w[c] != 0.0 {
                roots.push((lq[c], w[c]));
            }
        }
    }
    if !roots.is_empty() {
        tape.backward_seeded(&roots, store, grads);
    }
}

/// Frozen-weight objective values of a pixel: (photometric, prior, lhs).
/// These are the scalars whose parameter gradients the tape computes.
pub fn pixel_objectives(pc: &PixelComputation) -> [f64; 3] {
    let mut obj = [0.0; 3];
    for (est, w) in &pc.photo {
        for c in 0..3 {
            obj[0] += w[c] * est[c].value();
        }
    }
    for (r2, w) in &pc.prior {
        for c in 0..3 {
            obj[1] += w[c] * r2[c].value();
        }
    }
    if let Some((lq, w)) = &pc.lhs {
        for c in 0..3 {
            obj[2] += w[c] * lq[c].value();
        }
    }
    obj
}

/// Weighted-objective values and frozen weights for a whole batch;
/// single-threaded, used by the gradient-correctness checks.
#[allow(clippy::too_many_arguments)]
pub fn step_objectives<R: Radiance + ?Sized>(
    view: SceneView,
    field: &R,
    camera: &PinholeCamera,
    batch: &Batch,
    cfg: &LossConfig,
    step_tag: u64,
    frozen: Option<&Vec<PixelWeights>>,
) -> ([f64; 3], Vec<PixelWeights>) {
    let mut tape = Tape::new();
    let mut totals = [0.0; 3];
    let mut weights = Vec::with_capacity(batch.pixels.len());
    for (i, px) in batch.pixels.iter().enumerate() {
        let pc = compute_pixel(
            view,
            field,
            &mut tape,
            camera,
            px,
            cfg,
            step_tag,
            batch.view_index,
            frozen.map(|f| &f[i]),
        );
        let obj = pixel_objectives(&pc);
        for t in 0..3 {
            totals[t] += obj[t];
        }
        weights.push(pc.weights);
        tape.clear();
    }
    (totals, weights)
}

