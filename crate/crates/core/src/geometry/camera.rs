//! Pinhole camera with a box pixel filter.

use super::Ray;
use crate::math::{vec3, Mat4, Vec3};
use crate::rng::RandomStream;

#[derive(Clone, Debug)]
pub struct PinholeCamera {
    /// World-from-camera transform; the camera looks along its local -z,
    /// +y is up, +x is right.
    pub pose: Mat4,
    pub vfov_deg: f64,
    pub width: u32,
    pub height: u32,
}

impl PinholeCamera {
    pub fn new(pose: Mat4, vfov_deg: f64, width: u32, height: u32) -> PinholeCamera {
        PinholeCamera {
            pose,
            vfov_deg,
            width,
            height,
        }
    }

    pub fn position(&self) -> Vec3 {
        self.pose.transform_point(Vec3::ZERO)
    }

    /// Camera ray through pixel (x, y) with an explicit jitter offset in
    /// [-0.5, 0.5]^2 around the pixel center. Pixel (0,0) is top-left.
    /// The importance weight is 1 under the box-filter convention.
    pub fn ray_through(&self, pixel: (u32, u32), jitter: (f64, f64)) -> (Ray, f64) {
        assert!(
            pixel.0 < self.width && pixel.1 < self.height,
            "pixel out of range"
        );
        let tan_half = (self.vfov_deg.to_radians() * 0.5).tan();
        let aspect = self.width as f64 / self.height as f64;
        let u = (pixel.0 as f64 + 0.5 + jitter.0) / self.width as f64;
        let v = (pixel.1 as f64 + 0.5 + jitter.1) / self.height as f64;
        let x = (2.0 * u - 1.0) * tan_half * aspect;
        let y = (1.0 - 2.0 * v) * tan_half;
        let dir_cam = vec3(x, y, -1.0).normalized();
        let dir = self.pose.transform_dir(dir_cam).normalized();
        (
            Ray::new(self.position(), dir, 0.0, f64::INFINITY),
            1.0,
        )
    }

    /// Stratified-jittered camera ray; jitter drawn from `rng`.
    pub fn sample_ray(&self, pixel: (u32, u32), rng: &mut RandomStream) -> (Ray, f64) {
        let (jx, jy) = rng.next_2d();
        self.ray_through(pixel, (jx - 0.5, jy - 0.5))
    }

    /// Stratified jitter for sample `s` of `spp` (sqrt-grid strata).
    pub fn sample_ray_stratified(
        &self,
        pixel: (u32, u32),
        s: u32,
        spp: u32,
        rng: &mut RandomStream,
    ) -> (Ray, f64) {
        let grid = (spp as f64).sqrt().floor() as u32;
        let (jx, jy) = rng.next_2d();
        let (ox, oy) = if grid * grid == spp && grid > 0 {
            let cell = s % spp;
            let (cx, cy) = (cell % grid, cell / grid);
            (
                (cx as f64 + jx) / grid as f64 - 0.5,
                (cy as f64 + jy) / grid as f64 - 0.5,
            )
        } else {
            (jx - 0.5, jy - 0.5)
        };
        self.ray_through(pixel, (ox, oy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn symmetric_camera() -> PinholeCamera {
        PinholeCamera::new(Mat4::IDENTITY, 60.0, 5, 5)
    }

    #[test]
    fn center_pixel_zero_jitter_is_optical_axis() {
        let cam = symmetric_camera();
        let (ray, w) = cam.ray_through((2, 2), (0.0, 0.0));
        assert_relative_eq!(ray.dir.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(ray.dir.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(ray.dir.z, -1.0, epsilon = 1e-12);
        assert_eq!(w, 1.0);
    }

    #[test]
    fn weight_is_one_everywhere() {
        let cam = symmetric_camera();
        let mut rng = RandomStream::new(3);
        for x in 0..5 {
            for y in 0..5 {
                let (_, w) = cam.sample_ray((x, y), &mut rng);
                assert_eq!(w, 1.0);
            }
        }
    }

    #[test]
    fn same_seed_gives_identical_rays() {
        let cam = symmetric_camera();
        let mut a = RandomStream::new(9);
        let mut b = RandomStream::new(9);
        let (ra, _) = cam.sample_ray((1, 3), &mut a);
        let (rb, _) = cam.sample_ray((1, 3), &mut b);
        assert_eq!(ra.dir, rb.dir);
        assert_eq!(ra.origin, rb.origin);
    }

    #[test]
    #[should_panic(expected = "pixel out of range")]
    fn pixel_out_of_range_is_a_usage_error() {
        symmetric_camera().ray_through((5, 0), (0.0, 0.0));
    }

    #[test]
    fn top_left_pixel_points_up_left() {
        let cam = symmetric_camera();
        let (ray, _) = cam.ray_through((0, 0), (0.0, 0.0));
        assert!(ray.dir.x < 0.0 && ray.dir.y > 0.0);
    }
}
