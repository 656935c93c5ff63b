//! Procedurally built desk-scale scenes shared by the benchmarks, the
//! test suites, and the CLI.

use crate::geometry::{EmitterDesc, MaterialDesc, PinholeCamera, Scene, Shape, ShapeDesc};
use crate::materials::{BrdfModel, FieldDesc};
use crate::math::{vec3, Mat4, Vec3};

fn lambert_material(name: &str, albedo: [f64; 3], optimizable: bool) -> MaterialDesc {
    let mut albedo_desc = FieldDesc::constant_rgb(albedo);
    if !optimizable {
        albedo_desc = albedo_desc.fixed();
    }
    MaterialDesc {
        name: name.to_string(),
        model: BrdfModel::Lambert,
        albedo: albedo_desc,
        roughness: FieldDesc::constant_scalar(0.0).fixed(),
    }
}

fn burley_material(name: &str, albedo: [f64; 3], roughness: f64, optimizable: bool) -> MaterialDesc {
    let mut albedo_desc = FieldDesc::constant_rgb(albedo);
    let mut rough_desc = FieldDesc::constant_scalar(roughness);
    if !optimizable {
        albedo_desc = albedo_desc.fixed();
        rough_desc = rough_desc.fixed();
    }
    MaterialDesc {
        name: name.to_string(),
        model: BrdfModel::Burley,
        albedo: albedo_desc,
        roughness: rough_desc,
    }
}

/// Cameras inside the unit cube near its corners, looking at the center.
pub fn interior_cameras(n: usize, res: u32, fov_deg: f64) -> Vec<PinholeCamera> {
    let corners = [
        vec3(0.8, 0.55, 0.8),
        vec3(-0.8, 0.55, 0.8),
        vec3(0.8, -0.55, -0.8),
        vec3(-0.8, 0.55, -0.8),
        vec3(0.8, -0.55, 0.8),
        vec3(-0.8, -0.55, -0.8),
        vec3(0.8, 0.55, -0.8),
        vec3(-0.8, -0.55, 0.8),
    ];
    (0..n)
        .map(|i| {
            let eye = corners[i % corners.len()];
            PinholeCamera::new(
                Mat4::look_at(eye, Vec3::ZERO, vec3(0.0, 1.0, 0.0)),
                fov_deg,
                res,
                res,
            )
        })
        .collect()
}

/// Cameras on the upper hemisphere of radius `r`, looking at the origin.
pub fn hemisphere_cameras(n: usize, r: f64, res: u32, fov_deg: f64) -> Vec<PinholeCamera> {
    (0..n)
        .map(|i| {
            let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            let frac = (i as f64 + 0.5) / n as f64;
            let y = 0.15 + 0.8 * frac;
            let rad = (1.0 - y * y).max(0.0).sqrt();
            let phi = golden * i as f64;
            let eye = vec3(rad * phi.cos(), y, rad * phi.sin()) * r;
            PinholeCamera::new(
                Mat4::look_at(eye, Vec3::ZERO, vec3(0.0, 1.0, 0.0)),
                fov_deg,
                res,
                res,
            )
        })
        .collect()
}

/// Closed [-1,1]^3 cube whose walls all emit `emission` and reflect with
/// a Lambert lobe of the given albedo; the radiance equilibrium is
/// emission / (1 - albedo) everywhere.
pub fn furnace_cube(albedo: f64, emission: f64) -> Scene {
    let shapes = vec![ShapeDesc {
        shape: Shape::BoxInterior {
            min: vec3(-1.0, -1.0, -1.0),
            max: vec3(1.0, 1.0, 1.0),
        },
        material: 0,
        emitter: Some(0),
    }];
    let materials = vec![lambert_material("walls", [albedo, albedo, albedo], true)];
    let emitters = vec![EmitterDesc::Area {
        shape_id: 0,
        radiance: [emission, emission, emission],
    }];
    Scene::assemble(shapes, materials, emitters, interior_cameras(4, 32, 70.0))
}

/// Closed cube with uniform Lambert walls and a ceiling area light; the
/// albedo-recovery benchmark scene.
pub fn lit_cube(wall_albedo: f64, light_radiance: f64) -> Scene {
    let shapes = vec![
        ShapeDesc {
            shape: Shape::BoxInterior {
                min: vec3(-1.0, -1.0, -1.0),
                max: vec3(1.0, 1.0, 1.0),
            },
            material: 0,
            emitter: None,
        },
        ShapeDesc {
            // slightly below the ceiling, radiating downward
            shape: Shape::Quad {
                corner: vec3(-0.3, 0.97, -0.3),
                edge_u: vec3(0.6, 0.0, 0.0),
                edge_v: vec3(0.0, 0.0, 0.6),
            },
            material: 1,
            emitter: Some(0),
        },
    ];
    let materials = vec![
        lambert_material("walls", [wall_albedo, wall_albedo, wall_albedo], true),
        lambert_material("light", [0.0, 0.0, 0.0], false),
    ];
    let emitters = vec![EmitterDesc::Area {
        shape_id: 1,
        radiance: [light_radiance, light_radiance, light_radiance],
    }];
    Scene::assemble(shapes, materials, emitters, interior_cameras(4, 32, 70.0))
}

/// Cube scene without any emitter (black renders).
pub fn unlit_cube(albedo: f64) -> Scene {
    let mut scene = furnace_cube(albedo, 0.0);
    scene.emitters.clear();
    scene.shapes[0].emitter = None;
    scene
}

/// A large emissive panel filling the camera's view; the zero-bounce
/// sanity scene.
pub fn emitter_panel(radiance: f64) -> Scene {
    let shapes = vec![ShapeDesc {
        shape: Shape::Quad {
            corner: vec3(-4.0, -4.0, -2.0),
            edge_u: vec3(8.0, 0.0, 0.0),
            edge_v: vec3(0.0, 8.0, 0.0),
        },
        material: 0,
        emitter: Some(0),
    }];
    let materials = vec![lambert_material("panel", [0.0, 0.0, 0.0], false)];
    let emitters = vec![EmitterDesc::Area {
        shape_id: 0,
        radiance: [radiance, radiance, radiance],
    }];
    let cameras = vec![PinholeCamera::new(Mat4::IDENTITY, 40.0, 16, 16)];
    Scene::assemble(shapes, materials, emitters, cameras)
}

/// Closed cube containing a diffuse sphere, lit from the ceiling; used
/// for cache-vs-path-tracer comparisons with occlusion and interreflection.
pub fn box_with_sphere(wall_albedo: f64, sphere_albedo: f64, light_radiance: f64) -> Scene {
    let mut scene = lit_cube(wall_albedo, light_radiance);
    scene.shapes.push(ShapeDesc {
        shape: Shape::Sphere {
            center: vec3(0.0, -0.55, 0.1),
            radius: 0.35,
        },
        material: 2,
        emitter: None,
    });
    scene.materials.push(lambert_material(
        "ball",
        [sphere_albedo, sphere_albedo * 0.6, sphere_albedo * 0.4],
        true,
    ));
    Scene::assemble(
        scene.shapes,
        scene.materials,
        scene.emitters,
        interior_cameras(4, 32, 70.0),
    )
}

/// Gradient-bias probe scene: a Burley panel on the far wall receives
/// direct light and bounces it onto the floor; the floor pixels depend on
/// the panel albedo only through that interreflection.
pub fn bias_probe_scene(panel_albedo: f64) -> Scene {
    let shapes = vec![
        ShapeDesc {
            shape: Shape::BoxInterior {
                min: vec3(-1.0, -1.0, -1.0),
                max: vec3(1.0, 1.0, 1.0),
            },
            material: 0,
            emitter: None,
        },
        ShapeDesc {
            // the optimizable panel, inset on the +z wall
            shape: Shape::Quad {
                corner: vec3(-0.85, -0.85, 0.98),
                edge_u: vec3(1.7, 0.0, 0.0),
                edge_v: vec3(0.0, 1.7, 0.0),
            },
            material: 1,
            emitter: None,
        },
        ShapeDesc {
            // ceiling light above the panel side
            shape: Shape::Quad {
                corner: vec3(-0.3, 0.97, 0.2),
                edge_u: vec3(0.6, 0.0, 0.0),
                edge_v: vec3(0.0, 0.0, 0.6),
            },
            material: 2,
            emitter: Some(0),
        },
    ];
    let materials = vec![
        lambert_material("walls", [0.35, 0.35, 0.35], false),
        burley_material("panel", [panel_albedo, panel_albedo, panel_albedo], 0.4, true),
        lambert_material("light", [0.0, 0.0, 0.0], false),
    ];
    let emitters = vec![EmitterDesc::Area {
        shape_id: 2,
        radiance: [6.0, 6.0, 6.0],
    }];
    // camera high on the -z side looking down at the floor patch in
    // front of the panel
    let cameras = vec![PinholeCamera::new(
        Mat4::look_at(vec3(0.0, 0.55, -0.8), vec3(0.0, -1.0, 0.35), vec3(0.0, 1.0, 0.0)),
        35.0,
        24,
        24,
    )];
    Scene::assemble(shapes, materials, emitters, cameras)
}

/// Diffuse sphere under an optimizable constant environment map.
pub fn sphere_under_env(albedo: f64, env_radiance: f64, env_res: (u32, u32)) -> Scene {
    let shapes = vec![ShapeDesc {
        shape: Shape::Sphere {
            center: Vec3::ZERO,
            radius: 1.0,
        },
        material: 0,
        emitter: None,
    }];
    let materials = vec![burley_material("ball", [albedo, albedo, albedo], 0.2, true)];
    let emitters = vec![EmitterDesc::Environment {
        width: env_res.0,
        height: env_res.1,
        init: [env_radiance, env_radiance, env_radiance],
        optimizable: true,
    }];
    Scene::assemble(
        shapes,
        materials,
        emitters,
        hemisphere_cameras(4, 4.0, 24, 40.0),
    )
}
