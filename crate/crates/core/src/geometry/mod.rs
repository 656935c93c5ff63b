//! Rays, surface interactions, shapes, cameras, emitters, and the scene.

mod camera;
mod emitter;
mod scene;
mod shape;

pub use camera::PinholeCamera;
pub use emitter::{eval_environment, sample_emitter, EmitterDesc, EmitterSample, EnvMap};
pub use scene::{MaterialDesc, MaterialParams, Scene, SceneParams, ShapeDesc};
pub use shape::{Shape, ShapeSample};

use crate::math::{Frame, Vec3};

#[derive(Clone, Copy, Debug)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
    pub t_min: f64,
    pub t_max: f64,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Ray {
        debug_assert!(dir.is_unit(), "ray direction must be unit length");
        debug_assert!(t_min >= 0.0 && t_min < t_max);
        Ray {
            origin,
            dir,
            t_min,
            t_max,
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

/// Closest surface interaction of a ray.
#[derive(Clone, Copy, Debug)]
pub struct SurfaceHit {
    pub position: Vec3,
    /// Geometric normal, oriented toward the ray origin side.
    pub n: Vec3,
    /// Orthonormal shading frame; its third axis equals `n`.
    pub frame: Frame,
    /// Whether the intrinsic (unflipped) shape normal faced the ray;
    /// area emitters radiate only when this is true.
    pub front_face: bool,
    pub shape_id: usize,
    pub uv: [f64; 2],
    pub t: f64,
}

impl SurfaceHit {
    pub(crate) fn from_raw(
        ray: &Ray,
        t: f64,
        intrinsic_n: Vec3,
        shape_id: usize,
        uv: [f64; 2],
    ) -> SurfaceHit {
        let front_face = intrinsic_n.dot(ray.dir) < 0.0;
        let n = if front_face { intrinsic_n } else { -intrinsic_n };
        SurfaceHit {
            position: ray.at(t),
            n,
            frame: Frame::from_normal(n),
            front_face,
            shape_id,
            uv,
            t,
        }
    }
}
