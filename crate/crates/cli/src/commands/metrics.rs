//! metrics: PSNR and MAPE between two PFM images.

use crate::config::Globals;
use anyhow::Result;
use clap::Args as ClapArgs;
use radiprior::inverse::{mape, psnr};
use radiprior::io::read_pfm;
use std::path::PathBuf;

#[derive(ClapArgs)]
pub struct Args {
    /// Image under test.
    image_a: PathBuf,
    /// Reference image.
    image_b: PathBuf,

    #[arg(long, default_value_t = 1.0)]
    peak: f64,

    #[arg(long, default_value_t = 0.01)]
    eps: f64,
}

pub fn run(args: Args, _globals: &Globals) -> Result<()> {
    let (wa, ha, a) = read_pfm(&args.image_a)?;
    let (wb, hb, b) = read_pfm(&args.image_b)?;
    if (wa, ha) != (wb, hb) {
        return Err(radiprior::Error::Config(format!(
            "resolution mismatch: {wa}x{ha} vs {wb}x{hb}"
        ))
        .into());
    }
    println!("PSNR: {:.4} dB", psnr(&a, &b, args.peak));
    println!("MAPE: {:.6}", mape(&a, &b, args.eps));
    Ok(())
}
