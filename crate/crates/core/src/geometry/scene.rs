//! Scene description, declarative JSON scene format, and parameter
//! bindings.

use super::{EmitterDesc, EnvMap, PinholeCamera, Ray, Shape, SurfaceHit};
use crate::autodiff::{ParamRange, ParamStore};
use crate::error::{Error, Result};
use crate::materials::{BrdfModel, FieldDesc, ParameterField};
use crate::math::{vec3, Mat4, Rgb, Vec3};
use crate::rng::RandomStream;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Debug)]
pub struct ShapeDesc {
    pub shape: Shape,
    pub material: usize,
    pub emitter: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct MaterialDesc {
    pub name: String,
    pub model: BrdfModel,
    pub albedo: FieldDesc,
    pub roughness: FieldDesc,
}

/// Immutable scene: geometry, emitters, cameras, and material/field
/// descriptors. Safe to share across rendering workers.
#[derive(Clone, Debug)]
pub struct Scene {
    pub shapes: Vec<ShapeDesc>,
    pub materials: Vec<MaterialDesc>,
    pub emitters: Vec<EmitterDesc>,
    pub cameras: Vec<PinholeCamera>,
    pub bounds_min: Vec3,
    pub bounds_max: Vec3,
    pub ray_epsilon: f64,
}

impl Scene {
    pub fn assemble(
        shapes: Vec<ShapeDesc>,
        materials: Vec<MaterialDesc>,
        emitters: Vec<EmitterDesc>,
        cameras: Vec<PinholeCamera>,
    ) -> Scene {
        let mut lo = vec3(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for s in &shapes {
            let (a, b) = s.shape.bounds();
            lo = vec3(lo.x.min(a.x), lo.y.min(a.y), lo.z.min(a.z));
            hi = vec3(hi.x.max(b.x), hi.y.max(b.y), hi.z.max(b.z));
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = Vec3::ZERO;
            hi = vec3(1.0, 1.0, 1.0);
        }
        let scale = (hi - lo).length().max(1e-6);
        Scene {
            shapes,
            materials,
            emitters,
            cameras,
            bounds_min: lo,
            bounds_max: hi,
            ray_epsilon: 1e-4 * scale,
        }
    }

    /// Nearest hit, or none if the ray escapes. Pure: identical inputs
    /// give identical results.
    pub fn intersect(&self, ray: &Ray) -> Option<SurfaceHit> {
        let mut best: Option<SurfaceHit> = None;
        let mut clipped = *ray;
        for (id, s) in self.shapes.iter().enumerate() {
            if let Some(hit) = s.shape.intersect(&clipped, id) {
                clipped.t_max = hit.t;
                best = Some(hit);
            }
        }
        best
    }

    /// Spawns a ray from a surface point, offset along the geometric
    /// normal to avoid self-intersection.
    pub fn spawn_ray(&self, p: Vec3, n: Vec3, dir: Vec3) -> Ray {
        let sign = if n.dot(dir) >= 0.0 { 1.0 } else { -1.0 };
        Ray::new(p + n * (self.ray_epsilon * sign), dir, 0.0, f64::INFINITY)
    }

    /// Shadow test from a surface point toward `dir` up to `dist`.
    pub fn unoccluded(&self, p: Vec3, n: Vec3, dir: Vec3, dist: f64) -> bool {
        let sign = if n.dot(dir) >= 0.0 { 1.0 } else { -1.0 };
        let origin = p + n * (self.ray_epsilon * sign);
        let t_max = if dist.is_finite() {
            dist - 2.0 * self.ray_epsilon
        } else {
            f64::INFINITY
        };
        if t_max <= 0.0 {
            return true;
        }
        let ray = Ray::new(origin, dir, 0.0, t_max);
        self.intersect(&ray).is_none()
    }

    /// Point-to-point visibility with matched epsilons at both ends.
    pub fn visible(&self, x: Vec3, y: Vec3) -> bool {
        let d = y - x;
        let dist = d.length();
        if dist <= 2.0 * self.ray_epsilon {
            return true;
        }
        let dir = d / dist;
        let ray = Ray::new(x, dir, self.ray_epsilon, dist - self.ray_epsilon);
        self.intersect(&ray).is_none()
    }

    /// Emitted radiance at a hit (front side only).
    pub fn emitted(&self, hit: &SurfaceHit) -> Rgb {
        if let Some(e) = self.shapes[hit.shape_id].emitter {
            if let EmitterDesc::Area { radiance, .. } = &self.emitters[e] {
                if hit.front_face {
                    return *radiance;
                }
            }
        }
        [0.0, 0.0, 0.0]
    }

    pub fn environment_index(&self) -> Option<usize> {
        self.emitters
            .iter()
            .position(|e| matches!(e, EmitterDesc::Environment { .. }))
    }

    pub fn has_emitters(&self) -> bool {
        !self.emitters.is_empty()
    }

    /// Domain used by fields and the radiance cache, slightly padded.
    pub fn field_domain(&self) -> (Vec3, Vec3) {
        let pad = (self.bounds_max - self.bounds_min) * 0.01 + vec3(1e-6, 1e-6, 1e-6);
        (self.bounds_min - pad, self.bounds_max + pad)
    }

    pub fn load(path: &Path) -> Result<Scene> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scene::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Scene> {
        let file: SceneFile =
            serde_json::from_str(text).map_err(|e| Error::format("scene file", e.to_string()))?;
        file.build()
    }

    pub fn to_json(&self) -> Result<String> {
        SceneFile::from_scene(self).map(|f| serde_json::to_string_pretty(&f).unwrap())
    }
}

/// Optimizable state bound to a scene: material parameter fields and the
/// environment texture, all living in one parameter store.
#[derive(Clone, Debug)]
pub struct SceneParams {
    pub materials: Vec<MaterialParams>,
    pub env: Option<EnvMap>,
    phi: Vec<ParamRange>,
}

#[derive(Clone, Debug)]
pub struct MaterialParams {
    pub model: BrdfModel,
    pub albedo: ParameterField,
    pub roughness: ParameterField,
}

impl SceneParams {
    pub fn build(scene: &Scene, store: &mut ParamStore, rng: &mut RandomStream) -> SceneParams {
        let domain = scene.field_domain();
        let mut phi = Vec::new();
        let mut materials = Vec::new();
        for m in &scene.materials {
            let albedo = ParameterField::build(&m.albedo, 3, domain, store, rng);
            let roughness = ParameterField::build(&m.roughness, 1, domain, store, rng);
            if m.albedo.is_optimizable() {
                phi.extend(albedo.param_ranges());
            }
            if m.roughness.is_optimizable() {
                phi.extend(roughness.param_ranges());
            }
            materials.push(MaterialParams {
                model: m.model,
                albedo,
                roughness,
            });
        }
        let mut env = None;
        for e in &scene.emitters {
            if let EmitterDesc::Environment {
                width,
                height,
                init,
                optimizable,
            } = e
            {
                let map = EnvMap::alloc(*width, *height, *init, *optimizable, store);
                if *optimizable {
                    phi.push(map.params);
                }
                env = Some(map);
            }
        }
        SceneParams {
            materials,
            env,
            phi,
        }
    }

    /// Ranges of the optimizable scene parameters (the phi group).
    pub fn phi_ranges(&self) -> &[ParamRange] {
        &self.phi
    }

    pub fn material(&self, shape: &ShapeDesc) -> &MaterialParams {
        &self.materials[shape.material]
    }
}

// -- declarative scene file ---------------------------------------------

#[derive(serde::Serialize, serde::Deserialize)]
struct SceneFile {
    shapes: Vec<ShapeFile>,
    materials: BTreeMap<String, MaterialFile>,
    #[serde(default)]
    emitters: BTreeMap<String, EmitterFile>,
    cameras: Vec<CameraFile>,
}

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ShapeFile {
    Sphere {
        center: [f64; 3],
        radius: f64,
        material: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        emitter: Option<String>,
    },
    BoxInterior {
        min: [f64; 3],
        max: [f64; 3],
        material: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        emitter: Option<String>,
    },
    Quad {
        corner: [f64; 3],
        edge_u: [f64; 3],
        edge_v: [f64; 3],
        material: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        emitter: Option<String>,
    },
    Mesh {
        vertices: Vec<[f64; 3]>,
        triangles: Vec<[u32; 3]>,
        material: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        emitter: Option<String>,
    },
}

#[derive(serde::Serialize, serde::Deserialize)]
struct MaterialFile {
    #[serde(default = "default_model")]
    model: BrdfModel,
    albedo: FieldDesc,
    roughness: FieldDesc,
}

fn default_model() -> BrdfModel {
    BrdfModel::Burley
}

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum EmitterFile {
    Area {
        radiance: [f64; 3],
    },
    Environment {
        resolution: [u32; 2],
        radiance: [f64; 3],
        #[serde(default)]
        optimizable: bool,
    },
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CameraFile {
    pose: PoseFile,
    fov_deg: f64,
    resolution: [u32; 2],
}

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
enum PoseFile {
    LookAt {
        look_from: [f64; 3],
        look_at: [f64; 3],
        #[serde(default = "default_up")]
        up: [f64; 3],
    },
    /// 4x4 world-from-camera matrix, row-major.
    Matrix(Vec<f64>),
}

fn default_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

fn to_vec3(a: [f64; 3]) -> Vec3 {
    vec3(a[0], a[1], a[2])
}

impl SceneFile {
    fn build(self) -> Result<Scene> {
        let mat_index: BTreeMap<&String, usize> = self
            .materials
            .keys()
            .enumerate()
            .map(|(i, k)| (k, i))
            .collect();
        let materials: Vec<MaterialDesc> = self
            .materials
            .iter()
            .map(|(name, m)| MaterialDesc {
                name: name.clone(),
                model: m.model,
                albedo: m.albedo.clone(),
                roughness: m.roughness.clone(),
            })
            .collect();

        let mut emitters = Vec::new();
        let mut shapes = Vec::new();
        for (shape_id, sf) in self.shapes.into_iter().enumerate() {
            let (shape, material, emitter_name) = match sf {
                ShapeFile::Sphere {
                    center,
                    radius,
                    material,
                    emitter,
                } => (
                    Shape::Sphere {
                        center: to_vec3(center),
                        radius,
                    },
                    material,
                    emitter,
                ),
                ShapeFile::BoxInterior {
                    min,
                    max,
                    material,
                    emitter,
                } => (
                    Shape::BoxInterior {
                        min: to_vec3(min),
                        max: to_vec3(max),
                    },
                    material,
                    emitter,
                ),
                ShapeFile::Quad {
                    corner,
                    edge_u,
                    edge_v,
                    material,
                    emitter,
                } => (
                    Shape::Quad {
                        corner: to_vec3(corner),
                        edge_u: to_vec3(edge_u),
                        edge_v: to_vec3(edge_v),
                    },
                    material,
                    emitter,
                ),
                ShapeFile::Mesh {
                    vertices,
                    triangles,
                    material,
                    emitter,
                } => (
                    Shape::TriangleMesh {
                        vertices: vertices.into_iter().map(to_vec3).collect(),
                        triangles,
                    },
                    material,
                    emitter,
                ),
            };
            let material = *mat_index
                .get(&material)
                .ok_or_else(|| Error::Scene(format!("unknown material '{material}'")))?;
            let emitter = match emitter_name {
                None => None,
                Some(name) => {
                    let ef = self
                        .emitters
                        .get(&name)
                        .ok_or_else(|| Error::Scene(format!("unknown emitter '{name}'")))?;
                    match ef {
                        EmitterFile::Area { radiance } => {
                            emitters.push(EmitterDesc::Area {
                                shape_id,
                                radiance: *radiance,
                            });
                            Some(emitters.len() - 1)
                        }
                        EmitterFile::Environment { .. } => {
                            return Err(Error::Scene(format!(
                                "environment emitter '{name}' cannot be attached to a shape"
                            )));
                        }
                    }
                }
            };
            shapes.push(ShapeDesc {
                shape,
                material,
                emitter,
            });
        }
        for ef in self.emitters.values() {
            if let EmitterFile::Environment {
                resolution,
                radiance,
                optimizable,
            } = ef
            {
                emitters.push(EmitterDesc::Environment {
                    width: resolution[0].max(1),
                    height: resolution[1].max(1),
                    init: *radiance,
                    optimizable: *optimizable,
                });
            }
        }

        let mut cameras = Vec::new();
        for c in self.cameras {
            let pose = match c.pose {
                PoseFile::Matrix(m) => {
                    if m.len() != 16 {
                        return Err(Error::Scene(format!(
                            "camera pose matrix needs 16 entries, got {}",
                            m.len()
                        )));
                    }
                    let mut flat = [0.0; 16];
                    flat.copy_from_slice(&m);
                    Mat4::from_flat_row_major(&flat)
                }
                PoseFile::LookAt {
                    look_from,
                    look_at,
                    up,
                } => Mat4::look_at(to_vec3(look_from), to_vec3(look_at), to_vec3(up)),
            };
            cameras.push(PinholeCamera::new(
                pose,
                c.fov_deg,
                c.resolution[0],
                c.resolution[1],
            ));
        }
        Ok(Scene::assemble(shapes, materials, emitters, cameras))
    }

    fn from_scene(scene: &Scene) -> Result<SceneFile> {
        let materials: BTreeMap<String, MaterialFile> = scene
            .materials
            .iter()
            .map(|m| {
                (
                    m.name.clone(),
                    MaterialFile {
                        model: m.model,
                        albedo: m.albedo.clone(),
                        roughness: m.roughness.clone(),
                    },
                )
            })
            .collect();
        let mut emitters = BTreeMap::new();
        let mut shape_emitter_name: Vec<Option<String>> = vec![None; scene.shapes.len()];
        for (i, e) in scene.emitters.iter().enumerate() {
            match e {
                EmitterDesc::Area { shape_id, radiance } => {
                    let name = format!("area_{i}");
                    emitters.insert(name.clone(), EmitterFile::Area { radiance: *radiance });
                    shape_emitter_name[*shape_id] = Some(name);
                }
                EmitterDesc::Environment {
                    width,
                    height,
                    init,
                    optimizable,
                } => {
                    emitters.insert(
                        format!("environment_{i}"),
                        EmitterFile::Environment {
                            resolution: [*width, *height],
                            radiance: *init,
                            optimizable: *optimizable,
                        },
                    );
                }
            }
        }
        let shapes = scene
            .shapes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let material = scene.materials[s.material].name.clone();
                let emitter = shape_emitter_name[i].clone();
                match &s.shape {
                    Shape::Sphere { center, radius } => ShapeFile::Sphere {
                        center: [center.x, center.y, center.z],
                        radius: *radius,
                        material,
                        emitter,
                    },
                    Shape::BoxInterior { min, max } => ShapeFile::BoxInterior {
                        min: [min.x, min.y, min.z],
                        max: [max.x, max.y, max.z],
                        material,
                        emitter,
                    },
                    Shape::Quad {
                        corner,
                        edge_u,
                        edge_v,
                    } => ShapeFile::Quad {
                        corner: [corner.x, corner.y, corner.z],
                        edge_u: [edge_u.x, edge_u.y, edge_u.z],
                        edge_v: [edge_v.x, edge_v.y, edge_v.z],
                        material,
                        emitter,
                    },
                    Shape::TriangleMesh {
                        vertices,
                        triangles,
                    } => ShapeFile::Mesh {
                        vertices: vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
                        triangles: triangles.clone(),
                        material,
                        emitter,
                    },
                }
            })
            .collect();
        let cameras = scene
            .cameras
            .iter()
            .map(|c| CameraFile {
                pose: PoseFile::Matrix(c.pose.to_flat_row_major().to_vec()),
                fov_deg: c.vfov_deg,
                resolution: [c.width, c.height],
            })
            .collect();
        Ok(SceneFile {
            shapes,
            materials,
            emitters,
            cameras,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenes;

    #[test]
    fn nearest_hit_rule() {
        let mat = MaterialDesc {
            name: "m".into(),
            model: BrdfModel::Lambert,
            albedo: FieldDesc::constant_rgb([0.5, 0.5, 0.5]),
            roughness: FieldDesc::constant_scalar(0.0),
        };
        let scene = Scene::assemble(
            vec![
                ShapeDesc {
                    shape: Shape::Sphere {
                        center: vec3(0.0, 0.0, 3.0),
                        radius: 0.5,
                    },
                    material: 0,
                    emitter: None,
                },
                ShapeDesc {
                    shape: Shape::Sphere {
                        center: vec3(0.0, 0.0, 1.0),
                        radius: 0.25,
                    },
                    material: 0,
                    emitter: None,
                },
            ],
            vec![mat],
            vec![],
            vec![],
        );
        let ray = Ray::new(Vec3::ZERO, vec3(0.0, 0.0, 1.0), 0.0, f64::INFINITY);
        let hit = scene.intersect(&ray).unwrap();
        assert_eq!(hit.shape_id, 1);
    }

    #[test]
    fn cube_is_watertight_for_a_million_interior_rays() {
        let scene = scenes::furnace_cube(0.5, 1.0);
        let mut rng = RandomStream::new(123);
        for _ in 0..1_000_000 {
            let p = vec3(
                rng.next_f64() * 1.8 - 0.9,
                rng.next_f64() * 1.8 - 0.9,
                rng.next_f64() * 1.8 - 0.9,
            );
            let d = vec3(
                rng.next_f64() * 2.0 - 1.0,
                rng.next_f64() * 2.0 - 1.0,
                rng.next_f64() * 2.0 - 1.0,
            );
            if d.length_squared() < 1e-9 {
                continue;
            }
            let ray = Ray::new(p, d.normalized(), 0.0, f64::INFINITY);
            assert!(scene.intersect(&ray).is_some(), "ray escaped the cube");
        }
    }

    #[test]
    fn intersect_is_pure() {
        let scene = scenes::furnace_cube(0.5, 1.0);
        let ray = Ray::new(vec3(0.1, -0.2, 0.3), vec3(0.3, 0.5, -0.8).normalized(), 0.0, f64::INFINITY);
        let a = scene.intersect(&ray).unwrap();
        let b = scene.intersect(&ray).unwrap();
        assert_eq!(a.position, b.position);
        assert_eq!(a.t.to_bits(), b.t.to_bits());
        assert_eq!(a.n, b.n);
        assert_eq!(a.shape_id, b.shape_id);
    }

    #[test]
    fn shadow_ray_reciprocity() {
        let scene = scenes::lit_cube(0.7, 5.0);
        let mut rng = RandomStream::new(31);
        for _ in 0..10_000 {
            let x = vec3(
                rng.next_f64() * 1.6 - 0.8,
                rng.next_f64() * 1.6 - 0.8,
                rng.next_f64() * 1.6 - 0.8,
            );
            let y = vec3(
                rng.next_f64() * 1.6 - 0.8,
                rng.next_f64() * 1.6 - 0.8,
                rng.next_f64() * 1.6 - 0.8,
            );
            assert_eq!(scene.visible(x, y), scene.visible(y, x));
        }
    }

    #[test]
    fn json_round_trip() {
        let scene = scenes::lit_cube(0.7, 5.0);
        let json = scene.to_json().unwrap();
        let back = Scene::from_json(&json).unwrap();
        assert_eq!(back.shapes.len(), scene.shapes.len());
        assert_eq!(back.materials.len(), scene.materials.len());
        assert_eq!(back.emitters.len(), scene.emitters.len());
        assert_eq!(back.cameras.len(), scene.cameras.len());
        let json2 = back.to_json().unwrap();
        assert_eq!(json, json2);
    }

    #[test]
    fn unknown_material_is_an_error() {
        let text = r#"{
            "shapes": [{"kind": "sphere", "center": [0,0,0], "radius": 1.0, "material": "nope"}],
            "materials": {},
            "emitters": {},
            "cameras": []
        }"#;
        assert!(Scene::from_json(text).is_err());
    }
}
