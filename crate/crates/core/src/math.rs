//! Small fixed-size vector math used throughout the renderer.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub};

pub const EPS_UNIT: f64 = 1e-6;

/// Linear RGB triple.
pub type Rgb = [f64; 3];

pub fn rgb_add(a: Rgb, b: Rgb) -> Rgb {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn rgb_sub(a: Rgb, b: Rgb) -> Rgb {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn rgb_mul(a: Rgb, b: Rgb) -> Rgb {
    [a[0] * b[0], a[1] * b[1], a[2] * b[2]]
}

pub fn rgb_scale(a: Rgb, s: f64) -> Rgb {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn rgb_max_channel(a: Rgb) -> f64 {
    a[0].max(a[1]).max(a[2])
}

pub fn rgb_mean(a: Rgb) -> f64 {
    (a[0] + a[1] + a[2]) / 3.0
}

pub fn rgb_is_finite(a: Rgb) -> bool {
    a.iter().all(|c| c.is_finite())
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub const fn vec3(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3 { x, y, z }
}

impl Vec3 {
    pub const ZERO: Vec3 = vec3(0.0, 0.0, 0.0);

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        vec3(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn length(self) -> f64 {
        self.length_squared().sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self / self.length()
    }

    pub fn is_unit(self) -> bool {
        (self.length() - 1.0).abs() <= EPS_UNIT
    }

    pub fn min_component(self) -> f64 {
        self.x.min(self.y).min(self.z)
    }

    pub fn max_component(self) -> f64 {
        self.x.max(self.y).max(self.z)
    }

    pub fn abs(self) -> Vec3 {
        vec3(self.x.abs(), self.y.abs(), self.z.abs())
    }

    pub fn component(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        vec3(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        vec3(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        vec3(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        vec3(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl MulAssign<f64> for Vec3 {
    fn mul_assign(&mut self, s: f64) {
        *self = *self * s;
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        vec3(self.x / s, self.y / s, self.z / s)
    }
}

/// Orthonormal shading frame; `n` is the third axis.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub t: Vec3,
    pub b: Vec3,
    pub n: Vec3,
}

impl Frame {
    /// Builds a frame around a unit normal (Duff et al. branchless basis).
    pub fn from_normal(n: Vec3) -> Frame {
        let sign = if n.z >= 0.0 { 1.0 } else { -1.0 };
        let a = -1.0 / (sign + n.z);
        let b = n.x * n.y * a;
        Frame {
            t: vec3(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x),
            b: vec3(b, sign + n.y * n.y * a, -n.y),
            n,
        }
    }

    /// World direction from local (frame) coordinates.
    pub fn to_world(&self, v: Vec3) -> Vec3 {
        self.t * v.x + self.b * v.y + self.n * v.z
    }

    /// Local (frame) coordinates of a world direction.
    pub fn to_local(&self, v: Vec3) -> Vec3 {
        vec3(v.dot(self.t), v.dot(self.b), v.dot(self.n))
    }
}

/// Row-major 4x4 rigid transform (+scale) used for camera poses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4 {
    pub m: [[f64; 4]; 4],
}

impl Mat4 {
    pub const IDENTITY: Mat4 = Mat4 {
        m: [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ],
    };

    pub fn from_rows(rows: [[f64; 4]; 4]) -> Mat4 {
        Mat4 { m: rows }
    }

    pub fn from_flat_row_major(v: &[f64; 16]) -> Mat4 {
        let mut m = [[0.0; 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                m[r][c] = v[r * 4 + c];
            }
        }
        Mat4 { m }
    }

    pub fn to_flat_row_major(&self) -> [f64; 16] {
        let mut v = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                v[r * 4 + c] = self.m[r][c];
            }
        }
        v
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        let m = &self.m;
        vec3(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3],
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3],
        )
    }

    pub fn transform_dir(&self, d: Vec3) -> Vec3 {
        let m = &self.m;
        vec3(
            m[0][0] * d.x + m[0][1] * d.y + m[0][2] * d.z,
            m[1][0] * d.x + m[1][1] * d.y + m[1][2] * d.z,
            m[2][0] * d.x + m[2][1] * d.y + m[2][2] * d.z,
        )
    }

    /// Camera pose looking from `eye` toward `target` with `up` hint
    /// (world-from-camera; camera looks along its local -z).
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Mat4 {
        let fwd = (target - eye).normalized();
        let right = fwd.cross(up).normalized();
        let true_up = right.cross(fwd);
        Mat4::from_rows([
            [right.x, true_up.x, -fwd.x, eye.x],
            [right.y, true_up.y, -fwd.y, eye.y],
            [right.z, true_up.z, -fwd.z, eye.z],
            [0.0, 0.0, 0.0, 1.0],
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn frame_is_orthonormal() {
        for n in [
            vec3(0.0, 0.0, 1.0),
            vec3(0.0, 0.0, -1.0),
            vec3(1.0, 0.0, 0.0),
            vec3(0.3, -0.5, 0.8).normalized(),
        ] {
            let f = Frame::from_normal(n);
            assert_relative_eq!(f.t.length(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(f.b.length(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(f.t.dot(f.b), 0.0, epsilon = 1e-12);
            assert_relative_eq!(f.t.dot(f.n), 0.0, epsilon = 1e-12);
            assert_relative_eq!(f.b.dot(f.n), 0.0, epsilon = 1e-12);
            let v = vec3(0.2, -0.7, 0.4);
            let roundtrip = f.to_local(f.to_world(v));
            assert_relative_eq!(roundtrip.x, v.x, epsilon = 1e-12);
            assert_relative_eq!(roundtrip.y, v.y, epsilon = 1e-12);
            assert_relative_eq!(roundtrip.z, v.z, epsilon = 1e-12);
        }
    }

    #[test]
    fn look_at_points_at_target() {
        let m = Mat4::look_at(vec3(0.0, 0.0, 2.0), Vec3::ZERO, vec3(0.0, 1.0, 0.0));
        // camera local -z maps to the forward direction
        let fwd = m.transform_dir(vec3(0.0, 0.0, -1.0));
        assert_relative_eq!(fwd.z, -1.0, epsilon = 1e-12);
        assert_relative_eq!(m.transform_point(Vec3::ZERO).z, 2.0, epsilon = 1e-12);
    }
}
