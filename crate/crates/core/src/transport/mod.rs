//! Monte Carlo transport estimators: reference path tracer, direct
//! illumination, cache-based RHS rendering and its truncated-series
//! generalization, the rendering-equation residual, and LHS rendering.

mod direct;
mod lhs;
mod pt;
mod residual;
mod rhs;

pub use direct::{render_direct, render_direct_pixel};
pub use lhs::{render_lhs, render_lhs_pixel};
pub use pt::{
    path_length_stats, render_pt, render_pt_pixel_diff, render_pt_pixel_fixed, PathLengthStats,
    RoulettePolicy,
};
pub use residual::{residual_at, ResidualAttach};
pub use rhs::{estimate_rhs, render_rhs, render_rhs_k, render_rhs_k_pixel, RhsAttach};

use crate::autodiff::{rgb_const, ParamStore, RgbVar, Tape, Var};
use crate::geometry::{PinholeCamera, Ray, Scene, SceneParams, SurfaceHit};
use crate::materials::BrdfModel;
use crate::math::{Rgb, Vec3};
use crate::rng::RandomStream;

/// Borrowed bundle of everything estimators read: immutable scene,
/// parameter values, and field bindings.
#[derive(Clone, Copy)]
pub struct SceneView<'a> {
    pub scene: &'a Scene,
    pub store: &'a ParamStore,
    pub params: &'a SceneParams,
    /// Store the cache's albedo hints are read from. The cache's
    /// dependence on scene parameters is never differentiated, so
    /// finite-difference oracles freeze this at the base point while
    /// perturbing `store`.
    pub hint_store: &'a ParamStore,
}

impl<'a> SceneView<'a> {
    pub fn new(scene: &'a Scene, store: &'a ParamStore, params: &'a SceneParams) -> SceneView<'a> {
        SceneView {
            scene,
            store,
            params,
            hint_store: store,
        }
    }

    pub fn with_hint_store(mut self, hint_store: &'a ParamStore) -> SceneView<'a> {
        self.hint_store = hint_store;
        self
    }

    /// Material fields evaluated at a hit.
    pub fn material_at(
        &self,
        tape: &mut Tape,
        hit: &SurfaceHit,
        attach_phi: bool,
    ) -> (BrdfModel, RgbVar, Var) {
        let mat = self.params.material(&self.scene.shapes[hit.shape_id]);
        let mut albedo = Vec::with_capacity(3);
        mat.albedo
            .query(tape, self.store, hit.position, attach_phi, &mut albedo);
        let mut rough = Vec::with_capacity(1);
        mat.roughness
            .query(tape, self.store, hit.position, attach_phi, &mut rough);
        (mat.model, [albedo[0], albedo[1], albedo[2]], rough[0])
    }

    /// Albedo value fed to the radiance network as a hint; detached by
    /// default and read through `hint_store`.
    pub fn albedo_hint(&self, tape: &mut Tape, hit: &SurfaceHit, attach: bool) -> RgbVar {
        let mat = self.params.material(&self.scene.shapes[hit.shape_id]);
        let store = if attach { self.store } else { self.hint_store };
        let mut albedo = Vec::with_capacity(3);
        mat.albedo
            .query(tape, store, hit.position, attach, &mut albedo);
        [albedo[0], albedo[1], albedo[2]]
    }

    /// Emitted radiance at a hit (area emitters, front side).
    pub fn emitted(&self, hit: &SurfaceHit) -> Rgb {
        self.scene.emitted(hit)
    }

    /// Environment radiance for an escaped ray.
    pub fn environment(&self, tape: &mut Tape, dir: Vec3, attach_phi: bool) -> RgbVar {
        match &self.params.env {
            Some(env) => {
                let attach = attach_phi && env.optimizable;
                env.eval(tape, self.store, dir, attach)
            }
            None => rgb_const([0.0, 0.0, 0.0]),
        }
    }
}

/// One primary-hit shading record; the unit the RHS, residual, and
/// prior estimators operate on.
#[derive(Clone, Copy, Debug)]
pub struct ShadingSample {
    pub hit: SurfaceHit,
    /// Unit direction toward the previous path vertex (world space).
    pub wo: Vec3,
    pub throughput: Rgb,
    pub depth: u32,
}

impl ShadingSample {
    pub fn primary(hit: SurfaceHit, ray_dir: Vec3) -> ShadingSample {
        ShadingSample {
            hit,
            wo: -ray_dir,
            throughput: [1.0, 1.0, 1.0],
            depth: 0,
        }
    }

    /// Traces a camera ray; `None` when the ray escapes the scene.
    pub fn from_camera(
        view: SceneView,
        camera: &PinholeCamera,
        pixel: (u32, u32),
        sample: u32,
        spp: u32,
        rng: &mut RandomStream,
        stats: &mut RenderStats,
    ) -> (Ray, Option<ShadingSample>) {
        let (ray, _w) = camera.sample_ray_stratified(pixel, sample, spp, rng);
        stats.ray_segments += 1;
        let hit = view.scene.intersect(&ray);
        (ray, hit.map(|h| ShadingSample::primary(h, ray.dir)))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RenderStats {
    pub camera_samples: u64,
    pub ray_segments: u64,
}

impl RenderStats {
    pub fn merge(&mut self, o: &RenderStats) {
        self.camera_samples += o.camera_samples;
        self.ray_segments += o.ray_segments;
    }

    pub fn segments_per_sample(&self) -> f64 {
        self.ray_segments as f64 / self.camera_samples.max(1) as f64
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RenderOpts {
    pub spp: u32,
    /// Maximum number of scattering events.
    pub max_depth: u32,
    pub rr_prob: f64,
    /// Bounce index at which Russian roulette starts.
    pub rr_start_depth: u32,
    pub min_survival: f64,
    pub seed: u64,
    /// 0 = use all available cores.
    pub threads: usize,
}

impl Default for RenderOpts {
    fn default() -> Self {
        RenderOpts {
            spp: 16,
            max_depth: 15,
            rr_prob: 0.95,
            rr_start_depth: 3,
            min_survival: 0.05,
            seed: 0,
            threads: 1,
        }
    }
}

impl RenderOpts {
    pub fn with_spp(mut self, spp: u32) -> Self {
        self.spp = spp;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_max_depth(mut self, d: u32) -> Self {
        self.max_depth = d;
        self
    }

    pub(crate) fn resolve_threads(&self) -> usize {
        if self.threads == 0 {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        } else {
            self.threads
        }
    }
}

/// Pixel accumulators: RGB sums, squared sums, sample counts.
#[derive(Clone, Debug)]
pub struct ImageBuffer {
    pub width: u32,
    pub height: u32,
    sum: Vec<[f64; 3]>,
    sum_sq: Vec<[f64; 3]>,
    count: Vec<u32>,
    pub stats: RenderStats,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32) -> ImageBuffer {
        let n = (width * height) as usize;
        ImageBuffer {
            width,
            height,
            sum: vec![[0.0; 3]; n],
            sum_sq: vec![[0.0; 3]; n],
            count: vec![0; n],
            stats: RenderStats::default(),
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<Rgb>) -> ImageBuffer {
        assert_eq!(pixels.len(), (width * height) as usize);
        let sum_sq = pixels.iter().map(|p| [p[0] * p[0], p[1] * p[1], p[2] * p[2]]).collect();
        ImageBuffer {
            width,
            height,
            sum_sq,
            count: vec![1; pixels.len()],
            sum: pixels,
            stats: RenderStats::default(),
        }
    }

    fn index(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y * self.width + x) as usize
    }

    pub fn add_sample(&mut self, x: u32, y: u32, value: Rgb) {
        let i = self.index(x, y);
        for c in 0..3 {
            self.sum[i][c] += value[c];
            self.sum_sq[i][c] += value[c] * value[c];
        }
        self.count[i] += 1;
    }

    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        let i = self.index(x, y);
        let n = self.count[i].max(1) as f64;
        [self.sum[i][0] / n, self.sum[i][1] / n, self.sum[i][2] / n]
    }

    /// Standard error of the pixel mean, per channel.
    pub fn pixel_sigma(&self, x: u32, y: u32) -> Rgb {
        let i = self.index(x, y);
        let n = self.count[i].max(1) as f64;
        let mut out = [0.0; 3];
        for c in 0..3 {
            let mean = self.sum[i][c] / n;
            let var = (self.sum_sq[i][c] / n - mean * mean).max(0.0);
            out[c] = (var / n).sqrt();
        }
        out
    }

    /// Mean over all pixels and channels.
    pub fn mean_all(&self) -> f64 {
        let mut total = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                let p = self.pixel(x, y);
                total += (p[0] + p[1] + p[2]) / 3.0;
            }
        }
        total / (self.width * self.height) as f64
    }

    pub fn pixels(&self) -> Vec<Rgb> {
        let mut out = Vec::with_capacity(self.sum.len());
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(self.pixel(x, y));
            }
        }
        out
    }

    pub fn resolution(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

/// Runs `per_sample` for every (pixel, sample) pair over a static row
/// partition; per-sample RNG streams make the result independent of the
/// number of workers.
pub(crate) fn render_image<F>(camera: &PinholeCamera, opts: &RenderOpts, per_sample: F) -> ImageBuffer
where
    F: Fn((u32, u32), u32, &mut RandomStream, &mut Tape, &mut RenderStats) -> Rgb + Sync,
{
    let (w, h) = (camera.width, camera.height);
    let threads = opts.resolve_threads().min(h.max(1) as usize).max(1);
    let mut image = ImageBuffer::new(w, h);

    let rows_per = (h as usize).div_ceil(threads);
    let mut results: Vec<(Vec<[f64; 3]>, Vec<[f64; 3]>, RenderStats)> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for t in 0..threads {
            let per_sample = &per_sample;
            let row0 = t * rows_per;
            let row1 = ((t + 1) * rows_per).min(h as usize);
            handles.push(scope.spawn(move || {
                let mut sums = vec![[0.0f64; 3]; (row1 - row0) * w as usize];
                let mut sq = vec![[0.0f64; 3]; (row1 - row0) * w as usize];
                let mut stats = RenderStats::default();
                let mut tape = Tape::new();
                for y in row0..row1 {
                    for x in 0..w {
                        let pix = (y as u64 * w as u64 + x as u64) as usize;
                        for s in 0..opts.spp {
                            let mut rng = RandomStream::derive(
                                opts.seed,
                                &[0x9e11, pix as u64, s as u64],
                            );
                            stats.camera_samples += 1;
                            let mark = tape.mark();
                            let v = per_sample((x, y as u32), s, &mut rng, &mut tape, &mut stats);
                            tape.reset_to(mark);
                            let local = (y - row0) * w as usize + x as usize;
                            for c in 0..3 {
                                sums[local][c] += v[c];
                                sq[local][c] += v[c] * v[c];
                            }
                        }
                    }
                }
                (sums, sq, stats)
            }));
        }
        for handle in handles {
            results.push(handle.join().expect("render worker panicked"));
        }
    });

    for (t, (sums, sq, stats)) in results.iter().enumerate() {
        let row0 = t * rows_per;
        let row1 = ((t + 1) * rows_per).min(h as usize);
        for y in row0..row1 {
            for x in 0..w as usize {
                let local = (y - row0) * w as usize + x;
                let global = y * w as usize + x;
                image.sum[global] = sums[local];
                image.sum_sq[global] = sq[local];
                image.count[global] = opts.spp;
            }
        }
        image.stats.merge(stats);
    }
    image
}

/// Survival probability for throughput-proportional Russian roulette.
pub(crate) fn rr_survival(throughput_max: f64, max_survival: f64, min_survival: f64) -> f64 {
    if throughput_max <= 0.0 {
        0.0
    } else {
        throughput_max.clamp(min_survival, max_survival)
    }
}
