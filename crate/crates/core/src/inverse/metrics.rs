//! Reconstruction metrics: PSNR and MAPE, plus the relative-L2 loss
//! kernel shared by every loss term.

use crate::autodiff::{stop_gradient, RgbVar, Tape, Var};
use crate::math::Rgb;
use crate::transport::ImageBuffer;

/// Documented cap returned when the MSE is exactly zero.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Mean over channels of (prediction - target)^2 / (sg(prediction)^2 + eps).
pub fn relative_l2(tape: &mut Tape, prediction: RgbVar, target: Rgb, eps: f64) -> Var {
    let mut acc = Var::constant(0.0);
    for c in 0..3 {
        let p = prediction[c];
        let diff = tape.add_const(p, -target[c]);
        let num = tape.mul(diff, diff);
        let sg = stop_gradient(p);
        let den = sg.value() * sg.value() + eps;
        let term = tape.scale(num, 1.0 / den);
        acc = tape.add(acc, term);
    }
    tape.scale(acc, 1.0 / 3.0)
}

/// Plain-value relative L2 (no tape).
pub fn relative_l2_value(prediction: Rgb, target: Rgb, eps: f64) -> f64 {
    let mut acc = 0.0;
    for c in 0..3 {
        let diff = prediction[c] - target[c];
        acc += diff * diff / (prediction[c] * prediction[c] + eps);
    }
    acc / 3.0
}

/// 10 log10(peak^2 / MSE) over flat pixel arrays.
pub fn psnr(a: &[Rgb], b: &[Rgb], peak: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "psnr: resolution mismatch");
    let mut mse = 0.0;
    for (pa, pb) in a.iter().zip(b) {
        for c in 0..3 {
            let d = pa[c] - pb[c];
            mse += d * d;
        }
    }
    mse /= (a.len() * 3) as f64;
    if mse == 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB)
}

/// Mean over pixels/channels of |a - b| / (b + eps).
pub fn mape(a: &[Rgb], b: &[Rgb], eps: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "mape: resolution mismatch");
    let mut total = 0.0;
    for (pa, pb) in a.iter().zip(b) {
        for c in 0..3 {
            total += (pa[c] - pb[c]).abs() / (pb[c] + eps);
        }
    }
    total / (a.len() * 3) as f64
}

pub fn psnr_images(a: &ImageBuffer, b: &ImageBuffer, peak: f64) -> f64 {
    assert_eq!(a.resolution(), b.resolution(), "psnr: resolution mismatch");
    psnr(&a.pixels(), &b.pixels(), peak)
}

pub fn mape_images(a: &ImageBuffer, b: &ImageBuffer, eps: f64) -> f64 {
    assert_eq!(a.resolution(), b.resolution(), "mape: resolution mismatch");
    mape(&a.pixels(), &b.pixels(), eps)
}
