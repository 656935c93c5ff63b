//! bench-cube: path-length statistics and the constant-cost comparison
//! between cache-based and path-traced training wirings.

use crate::config::Globals;
use anyhow::{Context, Result};
use clap::Args as ClapArgs;
use radiprior::inverse::{
    self, DatasetOptions, LossWeights, MultiViewDataset, PhotoModel, TrainConfig, TrainSetup,
    TrainState,
};
use radiprior::neuralfield::RadianceFieldConfig;
use radiprior::scenes;
use radiprior::transport::{path_length_stats, RoulettePolicy, SceneView};
use std::io::Write;
use std::time::Instant;

#[derive(ClapArgs)]
pub struct Args {
    /// Wall albedos to sweep.
    #[arg(long, default_value = "0.3,0.5,0.7,0.9,0.95,0.97")]
    albedos: String,

    /// Paths per albedo for the length statistics.
    #[arg(long, default_value_t = 1_000_000)]
    paths: usize,

    /// Timed training steps per wiring (after one warmup).
    #[arg(long, default_value_t = 5)]
    steps: u32,

    #[arg(long, default_value_t = 1024)]
    batch: u32,
}

pub struct BenchRow {
    pub albedo: f64,
    pub mean_path_length: f64,
    pub p999: f64,
    pub ad_pt_segments: f64,
    pub ad_ours_prior_segments: f64,
    pub ad_ours_photo_segments: f64,
    pub ad_ours_seconds: f64,
    pub ad_pt_seconds: f64,
}

pub fn bench_albedo(
    albedo: f64,
    n_paths: usize,
    steps: u32,
    batch: u32,
    threads: usize,
    seed: u64,
) -> Result<BenchRow> {
    let scene = scenes::lit_cube(albedo, 5.0);
    let stats = path_length_stats(&scene, albedo, n_paths, RoulettePolicy::default(), seed);

    // shared ground truth for both training wirings (cost benchmark;
    // reconstruction quality is irrelevant here)
    let mut wb = super::build_workbench(scenes::lit_cube(albedo, 5.0), RadianceFieldConfig::desk(), seed);
    let dataset = {
        let view = SceneView::new(&wb.scene, &wb.store, &wb.params);
        MultiViewDataset::generate(
            view,
            &DatasetOptions {
                spp: 8,
                seed,
                threads,
                ..DatasetOptions::default()
            },
        )
    };

    let run_wiring = |wb: &mut super::Workbench, cfg: &TrainConfig| -> Result<(f64, f64, f64)> {
        let setup = TrainSetup::new(wb.field.theta_ranges(), wb.params.phi_ranges().to_vec());
        let mut state = TrainState::new(&setup, cfg);
        // warmup
        inverse::train_step(
            &wb.scene, &mut wb.store, &wb.params, &wb.field, &dataset, &setup, cfg, &mut state,
        )?;
        let mut prior_seg = 0.0;
        let mut photo_seg = 0.0;
        let t0 = Instant::now();
        for _ in 0..steps {
            let rep = inverse::train_step(
                &wb.scene, &mut wb.store, &wb.params, &wb.field, &dataset, &setup, cfg, &mut state,
            )?;
            prior_seg = rep.prior_segments_per_sample;
            photo_seg = rep.photo_segments_per_sample;
        }
        let secs = t0.elapsed().as_secs_f64() / steps as f64;
        Ok((photo_seg, prior_seg, secs))
    };

    let ours_cfg = TrainConfig {
        batch_pixels: batch,
        spp: 4,
        threads,
        seed,
        ..TrainConfig::default()
    };
    let (ours_photo, ours_prior, ours_secs) = run_wiring(&mut wb, &ours_cfg)?;

    // path-traced wiring: roulette from the first bounce, deep cap, so
    // the mean segment count tracks 1/(1 - albedo)
    let pt_cfg = TrainConfig {
        batch_pixels: batch,
        spp: 4,
        threads,
        seed,
        photo_model: PhotoModel::PathTraced {
            max_depth: 64,
            rr_prob: 0.95,
            rr_start_depth: 0,
        },
        weights: LossWeights {
            photometric: 1.0,
            prior: 0.0,
            lhs: 0.0,
        },
        ..TrainConfig::default()
    };
    let mut wb_pt = super::build_workbench(scenes::lit_cube(albedo, 5.0), RadianceFieldConfig::desk(), seed);
    let (pt_photo, _, pt_secs) = run_wiring(&mut wb_pt, &pt_cfg)?;

    Ok(BenchRow {
        albedo,
        mean_path_length: stats.mean,
        p999: stats.p999,
        ad_pt_segments: pt_photo,
        ad_ours_prior_segments: ours_prior,
        ad_ours_photo_segments: ours_photo,
        ad_ours_seconds: ours_secs,
        ad_pt_seconds: pt_secs,
    })
}

pub fn run(args: Args, globals: &Globals) -> Result<()> {
    let out = globals
        .out
        .clone()
        .ok_or_else(|| radiprior::Error::Config("--out CSV path is required".into()))?;
    let albedos: Vec<f64> = super::parse_list(&args.albedos)?;
    let seed = globals.seed.unwrap_or(7);
    let threads = globals.threads.unwrap_or(0);

    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).ok();
        }
    }
    let mut file = std::fs::File::create(&out).with_context(|| format!("creating {out:?}"))?;
    writeln!(
        file,
        "albedo,mean_path_length,p999_path_length,ad_pt_segments_per_sample,\
         ad_ours_prior_segments_per_sample,ad_ours_photo_segments_per_sample,\
         ad_ours_step_seconds,ad_pt_step_seconds"
    )?;
    for &albedo in &albedos {
        log::info!("benchmarking albedo {albedo}");
        let row = bench_albedo(albedo, args.paths, args.steps, args.batch, threads, seed)?;
        writeln!(
            file,
            "{},{:.4},{:.1},{:.4},{:.4},{:.4},{:.5},{:.5}",
            row.albedo,
            row.mean_path_length,
            row.p999,
            row.ad_pt_segments,
            row.ad_ours_prior_segments,
            row.ad_ours_photo_segments,
            row.ad_ours_seconds,
            row.ad_pt_seconds,
        )?;
        println!(
            "albedo {:>5}: mean len {:>6.3} | ad-pt {:>6.3} seg | ad-ours {:.1}+{:.1} seg | {:.3}s vs {:.3}s",
            row.albedo,
            row.mean_path_length,
            row.ad_pt_segments,
            row.ad_ours_photo_segments,
            row.ad_ours_prior_segments,
            row.ad_ours_seconds,
            row.ad_pt_seconds,
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
