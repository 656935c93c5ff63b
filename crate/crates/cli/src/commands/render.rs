//! render: one view through a chosen estimator.

use crate::config::Globals;
use anyhow::Result;
use clap::Args as ClapArgs;
use radiprior::geometry::Scene;
use radiprior::io::{save_png, write_pfm};
use radiprior::transport::{
    render_direct, render_lhs, render_pt, render_rhs_k, RenderOpts, SceneView,
};
use std::path::PathBuf;

#[derive(ClapArgs)]
pub struct Args {
    #[arg(long)]
    scene: PathBuf,

    /// pt | direct | rhs | lhs
    #[arg(long, default_value = "pt", value_parser = ["pt", "direct", "rhs", "lhs"])]
    estimator: String,

    /// Differentiable bounces for the rhs estimator.
    #[arg(long, default_value_t = 1)]
    k: u32,

    #[arg(long, default_value_t = 0)]
    camera: usize,

    #[arg(long, default_value_t = 64)]
    spp: u32,

    #[arg(long, default_value_t = 15)]
    max_depth: u32,

    /// Cache checkpoint for rhs/lhs (fresh random init otherwise).
    #[arg(long)]
    checkpoint: Option<PathBuf>,

    /// Scene-parameter checkpoint.
    #[arg(long)]
    phi: Option<PathBuf>,

    /// Also write a tonemapped PNG next to the PFM.
    #[arg(long, default_value_t = false)]
    png: bool,
}

pub fn run(args: Args, globals: &Globals) -> Result<()> {
    let out = globals
        .out
        .clone()
        .ok_or_else(|| radiprior::Error::Config("--out file is required".into()))?;
    let seed = globals.seed.unwrap_or(0);
    let scene = Scene::load(&args.scene)?;
    anyhow::ensure!(
        args.camera < scene.cameras.len(),
        radiprior::Error::Config(format!("camera {} out of range", args.camera))
    );
    let mut wb = super::build_workbench(
        scene,
        radiprior::neuralfield::RadianceFieldConfig::desk(),
        seed,
    );
    if let Some(ckpt) = &args.checkpoint {
        super::load_field_checkpoint(ckpt, &wb.field, &mut wb.store)?;
    }
    if let Some(phi) = &args.phi {
        super::load_phi_checkpoint(phi, &wb.params, &mut wb.store)?;
    }
    let view = SceneView::new(&wb.scene, &wb.store, &wb.params);
    let camera = &wb.scene.cameras[args.camera];
    let opts = RenderOpts {
        spp: args.spp,
        max_depth: args.max_depth,
        seed,
        threads: globals.threads.unwrap_or(0),
        ..RenderOpts::default()
    };
    let image = match args.estimator.as_str() {
        "pt" => render_pt(view, camera, &opts),
        "direct" => render_direct(view, camera, &opts),
        "rhs" => render_rhs_k(view, &wb.field, camera, args.k.max(1), &opts),
        _ => render_lhs(view, &wb.field, camera, &opts),
    };
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| radiprior::Error::io(dir, e))?;
        }
    }
    write_pfm(&out, image.width, image.height, &image.pixels())?;
    if args.png {
        save_png(&out.with_extension("png"), image.width, image.height, &image.pixels())?;
    }
    println!(
        "{} render: {}x{} at {} spp, {:.2} segments/sample -> {}",
        args.estimator,
        image.width,
        image.height,
        args.spp,
        image.stats.segments_per_sample(),
        out.display()
    );
    Ok(())
}
