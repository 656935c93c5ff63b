//! LDR previews: fixed tonemap (clamp, gamma 2.2) to 8-bit PNG.

use crate::error::{Error, Result};
use crate::math::Rgb;
use std::path::Path;

/// Clamp to [0,1] then gamma-encode.
pub fn tonemap(v: f64) -> u8 {
    let clamped = v.clamp(0.0, 1.0);
    (clamped.powf(1.0 / 2.2) * 255.0 + 0.5) as u8
}

pub fn save_png(path: &Path, width: u32, height: u32, pixels: &[Rgb]) -> Result<()> {
    assert_eq!(pixels.len(), (width * height) as usize);
    let mut data = Vec::with_capacity(pixels.len() * 3);
    for p in pixels {
        data.push(tonemap(p[0]));
        data.push(tonemap(p[1]));
        data.push(tonemap(p[2]));
    }
    let img: image::RgbImage =
        image::ImageBuffer::from_raw(width, height, data).expect("buffer size checked above");
    img.save(path)
        .map_err(|e| Error::format("png", format!("{path:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tonemap_endpoints() {
        assert_eq!(tonemap(0.0), 0);
        assert_eq!(tonemap(1.0), 255);
        assert_eq!(tonemap(2.5), 255);
        assert_eq!(tonemap(-1.0), 0);
        // gamma brightens mid-tones
        assert!(tonemap(0.5) > 127);
    }

    #[test]
    fn writes_a_readable_png() {
        let dir = std::env::temp_dir().join("radiprior-png-test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("x.png");
        let pixels = vec![[0.2, 0.5, 1.5]; 16];
        save_png(&p, 4, 4, &pixels).unwrap();
        let img = image::open(&p).unwrap().to_rgb8();
        assert_eq!(img.dimensions(), (4, 4));
        assert_eq!(img.get_pixel(0, 0).0[2], 255);
    }
}
