//! Image I/O: PFM for HDR data, tonemapped PNG previews.

mod pfm;
mod png;

pub use pfm::{read_pfm, write_pfm};
pub use png::{save_png, tonemap};
