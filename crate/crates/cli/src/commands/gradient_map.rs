//! gradient-map: per-pixel parameter gradients as signed heatmaps, for
//! the direct baseline, cache rendering at several differentiable-bounce
//! counts, and a finite-difference reference.

use crate::config::Globals;
use anyhow::{bail, Result};
use clap::Args as ClapArgs;
use radiprior::autodiff::{GradientTable, Tape};
use radiprior::geometry::Scene;
use radiprior::io::{save_png, write_pfm};
use radiprior::materials::ParameterField;
use radiprior::math::Rgb;
use radiprior::rng::RandomStream;
use radiprior::transport::{
    render_direct_pixel, render_pt_pixel_fixed, render_rhs_k_pixel, RenderStats, RhsAttach,
    SceneView,
};
use std::path::PathBuf;

#[derive(ClapArgs)]
pub struct Args {
    #[arg(long)]
    scene: PathBuf,

    /// Parameter selector: <material>.albedo[.<channel>],
    /// <material>.roughness[.<index>], or env.<index>.
    #[arg(long)]
    param: String,

    #[arg(long, default_value_t = 0)]
    camera: usize,

    /// Pixel region "x,y,w,h" (defaults to the whole image).
    #[arg(long)]
    region: Option<String>,

    #[arg(long, default_value_t = 16)]
    spp: u32,

    /// Differentiable-bounce counts for the cache-based maps.
    #[arg(long, default_value = "1,2,4")]
    k_list: String,

    /// Cache checkpoint (fresh random init otherwise).
    #[arg(long)]
    checkpoint: Option<PathBuf>,

    /// Fixed path depth of the finite-difference reference.
    #[arg(long, default_value_t = 8)]
    fd_depth: u32,

    #[arg(long, default_value_t = 64)]
    fd_spp: u32,

    /// Raw-parameter finite-difference step.
    #[arg(long, default_value_t = 1e-3)]
    fd_h: f64,
}

/// Resolves "<material>.albedo.<c>" style selectors to a parameter id.
fn resolve_param(scene: &Scene, params: &radiprior::geometry::SceneParams, sel: &str) -> Result<u32> {
    let parts: Vec<&str> = sel.split('.').collect();
    if parts.is_empty() {
        bail!("empty parameter selector");
    }
    if parts[0] == "env" {
        let env = params
            .env
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("scene has no environment map"))?;
        let idx: u32 = parts.get(1).unwrap_or(&"0").parse()?;
        return Ok(env.params.start + idx.min(env.params.len - 1));
    }
    let mat_idx = scene
        .materials
        .iter()
        .position(|m| m.name == parts[0])
        .ok_or_else(|| anyhow::anyhow!("unknown material '{}'", parts[0]))?;
    let which = *parts.get(1).unwrap_or(&"albedo");
    let field: &ParameterField = match which {
        "albedo" => &params.materials[mat_idx].albedo,
        "roughness" => &params.materials[mat_idx].roughness,
        other => bail!("unknown parameter '{other}' (albedo|roughness)"),
    };
    let offset: u32 = parts.get(2).unwrap_or(&"0").parse()?;
    let range = field.param_ranges()[0];
    Ok(range.start + offset.min(range.len - 1))
}

fn parse_region(s: &Option<String>, w: u32, h: u32) -> Result<(u32, u32, u32, u32)> {
    match s {
        None => Ok((0, 0, w, h)),
        Some(text) => {
            let v: Vec<u32> = super::parse_list(text)?;
            if v.len() != 4 {
                bail!("--region expects x,y,w,h");
            }
            Ok((v[0], v[1], v[2].min(w - v[0]), v[3].min(h - v[1])))
        }
    }
}

/// Signed value to red-negative / blue-positive color.
fn signed_color(g: f64, scale: f64) -> Rgb {
    if scale <= 0.0 {
        return [0.0, 0.0, 0.0];
    }
    let t = (g / scale).clamp(-1.0, 1.0);
    if t >= 0.0 {
        [0.0, 0.0, t]
    } else {
        [-t, 0.0, 0.0]
    }
}

pub fn run(args: Args, globals: &Globals) -> Result<()> {
    let out = globals
        .out
        .clone()
        .ok_or_else(|| radiprior::Error::Config("--out directory is required".into()))?;
    std::fs::create_dir_all(&out).map_err(|e| radiprior::Error::io(&out, e))?;
    let seed = globals.seed.unwrap_or(3);
    let scene = Scene::load(&args.scene)?;
    anyhow::ensure!(args.camera < scene.cameras.len(), "camera index out of range");
    let mut wb = super::build_workbench(
        scene,
        radiprior::neuralfield::RadianceFieldConfig::desk(),
        seed,
    );
    if let Some(ckpt) = &args.checkpoint {
        super::load_field_checkpoint(ckpt, &wb.field, &mut wb.store)?;
    }
    let param_id = resolve_param(&wb.scene, &wb.params, &args.param)?;
    let camera = wb.scene.cameras[args.camera].clone();
    let (rx, ry, rw, rh) = parse_region(&args.region, camera.width, camera.height)?;
    let ks: Vec<u32> = super::parse_list(&args.k_list)?;

    let grad_of_pixel = |view: SceneView,
                         pixel: (u32, u32),
                         method: &str,
                         k: u32|
     -> f64 {
        let mut tape = Tape::new();
        let mut stats = RenderStats::default();
        let mut grads = GradientTable::new(view.store.len());
        let mut roots = Vec::new();
        for s in 0..args.spp {
            let mut rng = RandomStream::derive(
                seed,
                &[pixel.0 as u64, pixel.1 as u64, s as u64],
            );
            let v = match method {
                "direct" => render_direct_pixel(
                    view, &mut tape, &camera, pixel, s, args.spp, &mut rng, true, &mut stats,
                ),
                _ => render_rhs_k_pixel(
                    view,
                    &wb.field,
                    &mut tape,
                    &camera,
                    pixel,
                    s,
                    k,
                    args.spp,
                    &mut rng,
                    RhsAttach {
                        phi: true,
                        ..RhsAttach::default()
                    },
                    &mut stats,
                ),
            };
            for c in 0..3 {
                roots.push((v[c], 1.0 / (3.0 * args.spp as f64)));
            }
        }
        tape.backward_seeded(&roots, view.store, &mut grads);
        grads.get(param_id)
    };

    let mut maps: Vec<(String, Vec<f64>)> = Vec::new();

    // tape-based maps
    let view = SceneView::new(&wb.scene, &wb.store, &wb.params);
    let mut direct_map = Vec::with_capacity((rw * rh) as usize);
    for y in ry..ry + rh {
        for x in rx..rx + rw {
            direct_map.push(grad_of_pixel(view, (x, y), "direct", 1));
        }
    }
    maps.push(("ad_direct".into(), direct_map));
    for &k in &ks {
        let mut m = Vec::with_capacity((rw * rh) as usize);
        for y in ry..ry + rh {
            for x in rx..rx + rw {
                m.push(grad_of_pixel(view, (x, y), "ours", k));
            }
        }
        maps.push((format!("ours_k{k}"), m));
    }

    // finite-difference reference on the fixed-depth path tracer
    let mut fd_map = Vec::with_capacity((rw * rh) as usize);
    {
        let base = wb.store.value(param_id);
        for y in ry..ry + rh {
            for x in rx..rx + rw {
                wb.store.set(param_id, base + args.fd_h);
                let view_p = SceneView::new(&wb.scene, &wb.store, &wb.params);
                let vp = render_pt_pixel_fixed(view_p, &camera, (x, y), args.fd_spp, args.fd_depth, seed);
                wb.store.set(param_id, base - args.fd_h);
                let view_m = SceneView::new(&wb.scene, &wb.store, &wb.params);
                let vm = render_pt_pixel_fixed(view_m, &camera, (x, y), args.fd_spp, args.fd_depth, seed);
                wb.store.set(param_id, base);
                let g = ((vp[0] - vm[0]) + (vp[1] - vm[1]) + (vp[2] - vm[2]))
                    / (3.0 * 2.0 * args.fd_h);
                fd_map.push(g);
            }
        }
    }
    maps.push(("fd_reference".into(), fd_map));

    // shared color scale from the reference map
    let scale = maps
        .last()
        .map(|(_, m)| m.iter().fold(0.0f64, |a, g| a.max(g.abs())))
        .unwrap_or(1.0)
        .max(1e-12);
    let mut summary = serde_json::Map::new();
    summary.insert("param".into(), serde_json::json!(args.param));
    summary.insert("param_id".into(), serde_json::json!(param_id));
    summary.insert("region".into(), serde_json::json!([rx, ry, rw, rh]));
    summary.insert("color_scale".into(), serde_json::json!(scale));
    for (name, m) in &maps {
        let raw: Vec<Rgb> = m.iter().map(|&g| [g, g, g]).collect();
        write_pfm(&out.join(format!("map_{name}.pfm")), rw, rh, &raw)?;
        let colored: Vec<Rgb> = m.iter().map(|&g| signed_color(g, scale)).collect();
        save_png(&out.join(format!("map_{name}.png")), rw, rh, &colored)?;
        summary.insert(
            format!("max_abs_{name}"),
            serde_json::json!(m.iter().fold(0.0f64, |a, g| a.max(g.abs()))),
        );
    }
    std::fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&serde_json::Value::Object(summary))?,
    )?;
    println!("wrote {} gradient maps to {}", maps.len(), out.display());
    Ok(())
}
