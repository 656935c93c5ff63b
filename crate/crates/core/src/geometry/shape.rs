//! Analytic shapes with brute-force intersection (desk scale).

use super::{Ray, SurfaceHit};
use crate::math::{vec3, Vec3};
use crate::rng::RandomStream;

#[derive(Clone, Debug)]
pub enum Shape {
    Sphere {
        center: Vec3,
        radius: f64,
    },
    /// Closed axis-aligned box seen from inside; intrinsic normals face
    /// inward (interior scenes such as the Cube).
    BoxInterior {
        min: Vec3,
        max: Vec3,
    },
    /// Parallelogram spanned by two edges from a corner.
    Quad {
        corner: Vec3,
        edge_u: Vec3,
        edge_v: Vec3,
    },
    TriangleMesh {
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
    },
}

/// A point sampled on a shape's surface (area measure).
#[derive(Clone, Copy, Debug)]
pub struct ShapeSample {
    pub position: Vec3,
    /// Intrinsic surface normal at the sample.
    pub n: Vec3,
    pub pdf_area: f64,
}

impl Shape {
    pub fn intersect(&self, ray: &Ray, shape_id: usize) -> Option<SurfaceHit> {
        match self {
            Shape::Sphere { center, radius } => {
                let oc = ray.origin - *center;
                let b = oc.dot(ray.dir);
                let c = oc.length_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let mut t = -b - sq;
                if t < ray.t_min || t > ray.t_max {
                    t = -b + sq;
                    if t < ray.t_min || t > ray.t_max {
                        return None;
                    }
                }
                let p = ray.at(t);
                let n = (p - *center) / *radius;
                let uv = [
                    0.5 + n.x.atan2(-n.z) / (2.0 * std::f64::consts::PI),
                    n.y.clamp(-1.0, 1.0).acos() / std::f64::consts::PI,
                ];
                Some(SurfaceHit::from_raw(ray, t, n, shape_id, uv))
            }
            Shape::BoxInterior { min, max } => {
                // Slab test; an interior origin hits the exit face, an
                // exterior origin the entry face. Normals are inward.
                let mut t_enter = f64::NEG_INFINITY;
                let mut t_exit = f64::INFINITY;
                let mut axis_enter = 0;
                let mut axis_exit = 0;
                for axis in 0..3 {
                    let o = ray.origin.component(axis);
                    let d = ray.dir.component(axis);
                    let (lo, hi) = (min.component(axis), max.component(axis));
                    if d.abs() < 1e-15 {
                        if o < lo || o > hi {
                            return None;
                        }
                        continue;
                    }
                    let (mut t0, mut t1) = ((lo - o) / d, (hi - o) / d);
                    if t0 > t1 {
                        std::mem::swap(&mut t0, &mut t1);
                    }
                    if t0 > t_enter {
                        t_enter = t0;
                        axis_enter = axis;
                    }
                    if t1 < t_exit {
                        t_exit = t1;
                        axis_exit = axis;
                    }
                }
                if t_enter > t_exit {
                    return None;
                }
                let (t, axis) = if t_enter >= ray.t_min && t_enter <= ray.t_max {
                    (t_enter, axis_enter)
                } else if t_exit >= ray.t_min && t_exit <= ray.t_max {
                    (t_exit, axis_exit)
                } else {
                    return None;
                };
                let p = ray.at(t);
                let center = (*min + *max) * 0.5;
                let side = if p.component(axis) > center.component(axis) {
                    1.0
                } else {
                    -1.0
                };
                // inward
                let mut n = Vec3::ZERO;
                match axis {
                    0 => n.x = -side,
                    1 => n.y = -side,
                    _ => n.z = -side,
                }
                let size = *max - *min;
                let (ua, va) = match axis {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                let uv = [
                    (p.component(ua) - min.component(ua)) / size.component(ua),
                    (p.component(va) - min.component(va)) / size.component(va),
                ];
                Some(SurfaceHit::from_raw(ray, t, n, shape_id, uv))
            }
            Shape::Quad {
                corner,
                edge_u,
                edge_v,
            } => {
                let n_raw = edge_u.cross(*edge_v);
                let area2 = n_raw.length();
                if area2 == 0.0 {
                    return None;
                }
                let n = n_raw / area2;
                let denom = n.dot(ray.dir);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = n.dot(*corner - ray.origin) / denom;
                if t < ray.t_min || t > ray.t_max {
                    return None;
                }
                let local = ray.at(t) - *corner;
                // decompose onto (possibly non-orthogonal) edges
                let (uu, uvd, vv) = (
                    edge_u.length_squared(),
                    edge_u.dot(*edge_v),
                    edge_v.length_squared(),
                );
                let det = uu * vv - uvd * uvd;
                let (lu, lv) = (local.dot(*edge_u), local.dot(*edge_v));
                let u = (lu * vv - lv * uvd) / det;
                let v = (lv * uu - lu * uvd) / det;
                if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
                    return None;
                }
                Some(SurfaceHit::from_raw(ray, t, n, shape_id, [u, v]))
            }
            Shape::TriangleMesh {
                vertices,
                triangles,
            } => {
                let mut best: Option<SurfaceHit> = None;
                let mut t_max = ray.t_max;
                for tri in triangles {
                    let (a, b, c) = (
                        vertices[tri[0] as usize],
                        vertices[tri[1] as usize],
                        vertices[tri[2] as usize],
                    );
                    if let Some((t, u, v)) = intersect_triangle(ray, a, b, c, t_max) {
                        let n = (b - a).cross(c - a).normalized();
                        best = Some(SurfaceHit::from_raw(ray, t, n, shape_id, [u, v]));
                        t_max = t;
                    }
                }
                best
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Shape::Sphere { radius, .. } => 4.0 * std::f64::consts::PI * radius * radius,
            Shape::BoxInterior { min, max } => {
                let s = *max - *min;
                2.0 * (s.x * s.y + s.y * s.z + s.x * s.z)
            }
            Shape::Quad { edge_u, edge_v, .. } => edge_u.cross(*edge_v).length(),
            Shape::TriangleMesh {
                vertices,
                triangles,
            } => triangles
                .iter()
                .map(|t| {
                    let (a, b, c) = (
                        vertices[t[0] as usize],
                        vertices[t[1] as usize],
                        vertices[t[2] as usize],
                    );
                    0.5 * (b - a).cross(c - a).length()
                })
                .sum(),
        }
    }

    /// Uniform-area sample of the surface.
    pub fn sample_point(&self, rng: &mut RandomStream) -> ShapeSample {
        match self {
            Shape::Sphere { center, radius } => {
                let z = 1.0 - 2.0 * rng.next_f64();
                let phi = 2.0 * std::f64::consts::PI * rng.next_f64();
                let r = (1.0 - z * z).max(0.0).sqrt();
                let n = vec3(r * phi.cos(), r * phi.sin(), z);
                ShapeSample {
                    position: *center + n * *radius,
                    n,
                    pdf_area: 1.0 / self.area(),
                }
            }
            Shape::BoxInterior { min, max } => {
                let s = *max - *min;
                let face_areas = [s.y * s.z, s.y * s.z, s.x * s.z, s.x * s.z, s.x * s.y, s.x * s.y];
                let total: f64 = face_areas.iter().sum();
                let mut pick = rng.next_f64() * total;
                let mut face = 5;
                for (i, a) in face_areas.iter().enumerate() {
                    if pick < *a {
                        face = i;
                        break;
                    }
                    pick -= a;
                }
                let (u, v) = rng.next_2d();
                let (position, n) = match face {
                    0 => (vec3(min.x, min.y + u * s.y, min.z + v * s.z), vec3(1.0, 0.0, 0.0)),
                    1 => (vec3(max.x, min.y + u * s.y, min.z + v * s.z), vec3(-1.0, 0.0, 0.0)),
                    2 => (vec3(min.x + u * s.x, min.y, min.z + v * s.z), vec3(0.0, 1.0, 0.0)),
                    3 => (vec3(min.x + u * s.x, max.y, min.z + v * s.z), vec3(0.0, -1.0, 0.0)),
                    4 => (vec3(min.x + u * s.x, min.y + v * s.y, min.z), vec3(0.0, 0.0, 1.0)),
                    _ => (vec3(min.x + u * s.x, min.y + v * s.y, max.z), vec3(0.0, 0.0, -1.0)),
                };
                ShapeSample {
                    position,
                    n,
                    pdf_area: 1.0 / total,
                }
            }
            Shape::Quad {
                corner,
                edge_u,
                edge_v,
            } => {
                let (u, v) = rng.next_2d();
                ShapeSample {
                    position: *corner + *edge_u * u + *edge_v * v,
                    n: edge_u.cross(*edge_v).normalized(),
                    pdf_area: 1.0 / self.area(),
                }
            }
            Shape::TriangleMesh {
                vertices,
                triangles,
            } => {
                let total = self.area();
                let mut pick = rng.next_f64() * total;
                let mut chosen = triangles.len() - 1;
                for (i, t) in triangles.iter().enumerate() {
                    let (a, b, c) = (
                        vertices[t[0] as usize],
                        vertices[t[1] as usize],
                        vertices[t[2] as usize],
                    );
                    let area = 0.5 * (b - a).cross(c - a).length();
                    if pick < area {
                        chosen = i;
                        break;
                    }
                    pick -= area;
                }
                let t = triangles[chosen];
                let (a, b, c) = (
                    vertices[t[0] as usize],
                    vertices[t[1] as usize],
                    vertices[t[2] as usize],
                );
                let (mut u, mut v) = rng.next_2d();
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                ShapeSample {
                    position: a + (b - a) * u + (c - a) * v,
                    n: (b - a).cross(c - a).normalized(),
                    pdf_area: 1.0 / total,
                }
            }
        }
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        match self {
            Shape::Sphere { center, radius } => (
                *center - vec3(*radius, *radius, *radius),
                *center + vec3(*radius, *radius, *radius),
            ),
            Shape::BoxInterior { min, max } => (*min, *max),
            Shape::Quad {
                corner,
                edge_u,
                edge_v,
            } => {
                let pts = [
                    *corner,
                    *corner + *edge_u,
                    *corner + *edge_v,
                    *corner + *edge_u + *edge_v,
                ];
                bounds_of(&pts)
            }
            Shape::TriangleMesh { vertices, .. } => bounds_of(vertices),
        }
    }
}

fn bounds_of(pts: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = vec3(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = -lo;
    for p in pts {
        lo = vec3(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = vec3(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    (lo, hi)
}

fn intersect_triangle(ray: &Ray, a: Vec3, b: Vec3, c: Vec3, t_max: f64) -> Option<(f64, f64, f64)> {
    let e1 = b - a;
    let e2 = c - a;
    let p = ray.dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - a;
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.dir.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    if t < ray.t_min || t > t_max {
        return None;
    }
    Some((t, u, v))
}
