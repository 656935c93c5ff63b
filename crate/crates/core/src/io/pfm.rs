//! Portable float map (PF, color): text header, then little-endian f32
//! triples, rows bottom-to-top. Write -> read -> write is bit-exact.

use crate::error::{Error, Result};
use crate::math::Rgb;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub fn write_pfm(path: &Path, width: u32, height: u32, pixels: &[Rgb]) -> Result<()> {
    assert_eq!(pixels.len(), (width * height) as usize, "pixel count mismatch");
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write!(w, "PF\n{width} {height}\n-1.0\n").map_err(|e| Error::io(path, e))?;
    for row in (0..height).rev() {
        for col in 0..width {
            let p = pixels[(row * width + col) as usize];
            for c in 0..3 {
                w.write_all(&(p[c] as f32).to_le_bytes())
                    .map_err(|e| Error::io(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_pfm(path: &Path) -> Result<(u32, u32, Vec<Rgb>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let magic = read_header_line(&mut r, path)?;
    if magic != "PF" {
        return Err(Error::format("pfm", format!("bad magic '{magic}'")));
    }
    let dims = read_header_line(&mut r, path)?;
    let mut it = dims.split_whitespace();
    let width: u32 = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::format("pfm", "bad width"))?;
    let height: u32 = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::format("pfm", "bad height"))?;
    let scale: f64 = read_header_line(&mut r, path)?
        .parse()
        .map_err(|_| Error::format("pfm", "bad scale"))?;
    let little_endian = scale < 0.0;

    let mut data = vec![0u8; (width * height * 12) as usize];
    r.read_exact(&mut data).map_err(|e| Error::io(path, e))?;
    let mut pixels = vec![[0.0; 3]; (width * height) as usize];
    let mut offset = 0;
    for row in (0..height).rev() {
        for col in 0..width {
            let mut p = [0.0; 3];
            for slot in p.iter_mut() {
                let b = [data[offset], data[offset + 1], data[offset + 2], data[offset + 3]];
                offset += 4;
                *slot = if little_endian {
                    f32::from_le_bytes(b) as f64
                } else {
                    f32::from_be_bytes(b) as f64
                };
            }
            pixels[(row * width + col) as usize] = p;
        }
    }
    Ok((width, height, pixels))
}

fn read_header_line<R: Read>(r: &mut R, path: &Path) -> Result<String> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte).map_err(|e| Error::io(path, e))?;
        if byte[0] == b'\n' {
            break;
        }
        line.push(byte[0]);
    }
    String::from_utf8(line).map_err(|_| Error::format("pfm", "non-ascii header"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join("radiprior-pfm-test");
        std::fs::create_dir_all(&dir).unwrap();
        let p1 = dir.join("a.pfm");
        let p2 = dir.join("b.pfm");
        let (w, h) = (7u32, 5u32);
        let pixels: Vec<crate::math::Rgb> = (0..w * h)
            .map(|i| {
                [
                    (i as f64 * 0.37).sin().abs() * 10.0,
                    i as f64 * 1e-3,
                    ((i * 13 % 7) as f64).exp(),
                ]
            })
            .collect();
        write_pfm(&p1, w, h, &pixels).unwrap();
        let (w2, h2, back) = read_pfm(&p1).unwrap();
        assert_eq!((w2, h2), (w, h));
        write_pfm(&p2, w2, h2, &back).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        // values survive at f32 precision
        for (a, b) in pixels.iter().zip(&back) {
            for c in 0..3 {
                assert_eq!(a[c] as f32, b[c] as f32);
            }
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = std::env::temp_dir().join("radiprior-pfm-test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("bad.pfm");
        std::fs::write(&p, b"Pf\n1 1\n-1.0\n\0\0\0\0").unwrap();
        assert!(read_pfm(&p).is_err());
    }
}
