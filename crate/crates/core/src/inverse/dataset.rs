//! Multi-view datasets: ground-truth renders plus camera poses, stored
//! as PFM images and a JSON manifest.

use crate::error::{Error, Result};
use crate::geometry::PinholeCamera;
use crate::io::{read_pfm, write_pfm};
use crate::math::{Mat4, Rgb};
use crate::transport::{render_pt, RenderOpts, SceneView};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForegroundMode {
    /// No masks (closed interior scenes).
    None,
    /// Foreground = primary camera ray hits geometry.
    HitTest,
    /// Foreground from an alpha image provided next to each view.
    Alpha,
}

#[derive(Clone, Debug)]
pub struct View {
    pub camera: PinholeCamera,
    pub image: Vec<Rgb>,
    pub mask: Option<Vec<bool>>,
}

#[derive(Clone, Debug)]
pub struct MultiViewDataset {
    pub views: Vec<View>,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Copy, Debug)]
pub struct DatasetOptions {
    pub spp: u32,
    pub max_depth: u32,
    pub seed: u64,
    pub threads: usize,
    pub foreground: ForegroundMode,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            spp: 128,
            max_depth: 15,
            seed: 1,
            threads: 0,
            foreground: ForegroundMode::None,
        }
    }
}

impl MultiViewDataset {
    /// Path-traces every camera into a ground-truth view set.
    pub fn generate(view: SceneView, opts: &DatasetOptions) -> MultiViewDataset {
        assert!(!view.scene.cameras.is_empty(), "scene has no cameras");
        let (w, h) = (view.scene.cameras[0].width, view.scene.cameras[0].height);
        let mut views = Vec::new();
        for (i, camera) in view.scene.cameras.iter().enumerate() {
            assert_eq!(
                (camera.width, camera.height),
                (w, h),
                "all views must share a resolution"
            );
            let ropts = RenderOpts {
                spp: opts.spp,
                max_depth: opts.max_depth,
                seed: opts.seed.wrapping_add(i as u64),
                threads: opts.threads,
                ..RenderOpts::default()
            };
            let img = render_pt(view, camera, &ropts);
            let mask = match opts.foreground {
                ForegroundMode::None | ForegroundMode::Alpha => None,
                ForegroundMode::HitTest => Some(hit_mask(view, camera)),
            };
            views.push(View {
                camera: camera.clone(),
                image: img.pixels(),
                mask,
            });
        }
        MultiViewDataset {
            views,
            width: w,
            height: h,
        }
    }

    pub fn resolution(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixel(&self, view: usize, x: u32, y: u32) -> Rgb {
        self.views[view].image[(y * self.width + x) as usize]
    }

    /// Writes per-view PFMs plus a manifest of poses and fields of view.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest_views = Vec::new();
        for (i, v) in self.views.iter().enumerate() {
            let name = format!("view_{i:03}.pfm");
            write_pfm(&dir.join(&name), self.width, self.height, &v.image)?;
            let mask_name = v.mask.as_ref().map(|m| {
                let name = format!("view_{i:03}_mask.pfm");
                let pixels: Vec<Rgb> = m
                    .iter()
                    .map(|&fg| if fg { [1.0, 1.0, 1.0] } else { [0.0, 0.0, 0.0] })
                    .collect();
                let _ = write_pfm(&dir.join(&name), self.width, self.height, &pixels);
                name
            });
            manifest_views.push(serde_json::json!({
                "image": name,
                "mask": mask_name,
                "pose": v.camera.pose.to_flat_row_major().to_vec(),
                "fov_deg": v.camera.vfov_deg,
                "resolution": [v.camera.width, v.camera.height],
            }));
        }
        let manifest = serde_json::json!({
            "views": manifest_views,
            "resolution": [self.width, self.height],
        });
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest).unwrap(),
        )
        .map_err(|e| Error::io(dir.join("manifest.json"), e))
    }

    pub fn load(dir: &Path) -> Result<MultiViewDataset> {
        let manifest_path = dir.join("manifest.json");
        let text =
            std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::format("manifest", e.to_string()))?;
        let views_json = manifest
            .get("views")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::format("manifest", "missing views"))?;
        let mut views = Vec::new();
        let (mut w, mut h) = (0, 0);
        for v in views_json {
            let image_name = v
                .get("image")
                .and_then(|s| s.as_str())
                .ok_or_else(|| Error::format("manifest", "view without image"))?;
            let (vw, vh, image) = read_pfm(&dir.join(image_name))?;
            w = vw;
            h = vh;
            let pose: Vec<f64> = v
                .get("pose")
                .and_then(|p| p.as_array())
                .map(|a| a.iter().filter_map(|x| x.as_f64()).collect())
                .ok_or_else(|| Error::format("manifest", "view without pose"))?;
            if pose.len() != 16 {
                return Err(Error::format("manifest", "pose must have 16 entries"));
            }
            let mut flat = [0.0; 16];
            flat.copy_from_slice(&pose);
            let fov = v.get("fov_deg").and_then(|f| f.as_f64()).unwrap_or(60.0);
            let mask = v
                .get("mask")
                .and_then(|m| m.as_str())
                .and_then(|name| read_pfm(&dir.join(name)).ok())
                .map(|(_, _, pixels)| pixels.iter().map(|p| p[0] > 0.5).collect());
            views.push(View {
                camera: PinholeCamera::new(Mat4::from_flat_row_major(&flat), fov, vw, vh),
                image,
                mask,
            });
        }
        Ok(MultiViewDataset {
            views,
            width: w,
            height: h,
        })
    }
}

fn hit_mask(view: SceneView, camera: &PinholeCamera) -> Vec<bool> {
    let mut mask = Vec::with_capacity((camera.width * camera.height) as usize);
    for y in 0..camera.height {
        for x in 0..camera.width {
            let (ray, _) = camera.ray_through((x, y), (0.0, 0.0));
            mask.push(view.scene.intersect(&ray).is_some());
        }
    }
    mask
}
