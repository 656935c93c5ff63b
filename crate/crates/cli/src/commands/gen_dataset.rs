//! gen-dataset: path-trace ground-truth views plus poses to disk.

use crate::config::Globals;
use anyhow::{Context, Result};
use clap::Args as ClapArgs;
use radiprior::geometry::Scene;
use radiprior::inverse::{self, DatasetOptions, ForegroundMode, MultiViewDataset};
use radiprior::scenes;
use radiprior::transport::SceneView;
use std::path::PathBuf;

#[derive(ClapArgs)]
pub struct Args {
    /// Scene file (JSON).
    #[arg(long)]
    scene: PathBuf,

    /// Number of views; 0 keeps the scene's own cameras.
    #[arg(long, default_value_t = 0)]
    views: u32,

    /// Camera placement when --views > 0.
    #[arg(long, default_value = "scene", value_parser = ["scene", "hemisphere", "interior"])]
    placement: String,

    /// Hemisphere radius for --placement hemisphere.
    #[arg(long, default_value_t = 4.0)]
    radius: f64,

    /// View resolution override (square).
    #[arg(long)]
    resolution: Option<u32>,

    #[arg(long, default_value_t = 128)]
    spp: u32,

    #[arg(long, default_value_t = 15)]
    max_depth: u32,

    /// Foreground mask source: none | hit_test.
    #[arg(long, default_value = "none", value_parser = ["none", "hit_test"])]
    foreground: String,

    /// Also write ground-truth albedo/roughness maps per view.
    #[arg(long, default_value_t = false)]
    param_maps: bool,
}

pub fn run(args: Args, globals: &Globals) -> Result<()> {
    let out = globals
        .out
        .clone()
        .ok_or_else(|| radiprior::Error::Config("--out directory is required".into()))?;
    let seed = globals.seed.unwrap_or(1);
    let threads = globals.threads.unwrap_or(0);

    let mut scene = Scene::load(&args.scene)?;
    if args.views > 0 {
        let res = args
            .resolution
            .or_else(|| scene.cameras.first().map(|c| c.width))
            .unwrap_or(64);
        let fov = scene.cameras.first().map(|c| c.vfov_deg).unwrap_or(60.0);
        scene.cameras = match args.placement.as_str() {
            "hemisphere" => scenes::hemisphere_cameras(args.views as usize, args.radius, res, fov),
            "interior" => scenes::interior_cameras(args.views as usize, res, fov),
            _ => scene.cameras,
        };
    }
    if let Some(res) = args.resolution {
        for cam in &mut scene.cameras {
            cam.width = res;
            cam.height = res;
        }
    }

    let wb = super::build_workbench(
        scene,
        radiprior::neuralfield::RadianceFieldConfig::desk(),
        seed,
    );
    let view = SceneView::new(&wb.scene, &wb.store, &wb.params);
    let opts = DatasetOptions {
        spp: args.spp,
        max_depth: args.max_depth,
        seed,
        threads,
        foreground: match args.foreground.as_str() {
            "hit_test" => ForegroundMode::HitTest,
            _ => ForegroundMode::None,
        },
    };
    log::info!("rendering {} views at {} spp", wb.scene.cameras.len(), args.spp);
    let dataset = MultiViewDataset::generate(view, &opts);
    dataset.save(&out)?;

    if args.param_maps {
        for (i, v) in dataset.views.iter().enumerate() {
            let albedo = inverse::render_param_map(view, &v.camera, false);
            let rough = inverse::render_param_map(view, &v.camera, true);
            radiprior::io::write_pfm(
                &out.join(format!("albedo_{i:03}.pfm")),
                dataset.width,
                dataset.height,
                &albedo,
            )?;
            radiprior::io::write_pfm(
                &out.join(format!("roughness_{i:03}.pfm")),
                dataset.width,
                dataset.height,
                &rough,
            )?;
        }
    }

    let echo = serde_json::json!({
        "command": "gen-dataset",
        "scene": args.scene,
        "views": dataset.views.len(),
        "spp": args.spp,
        "max_depth": args.max_depth,
        "seed": seed,
        "foreground": args.foreground,
        "param_maps": args.param_maps,
    });
    std::fs::write(
        out.join("config.json"),
        serde_json::to_string_pretty(&echo)?,
    )
    .with_context(|| format!("writing config echo to {out:?}"))?;
    println!(
        "wrote {} views ({}x{}) to {}",
        dataset.views.len(),
        dataset.width,
        dataset.height,
        out.display()
    );
    Ok(())
}
