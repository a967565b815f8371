//! PSNR and SSIM for 8-bit grey-level images.

use std::fmt;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::Image;

const PEAK: f64 = 255.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn same_shape(x: &Image, y: &Image) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::InvalidParameter(format!(
            "image sizes differ: {:?} vs {:?}",
            x.dim(),
            y.dim()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB; `+inf` when the images are equal.
pub fn psnr(x: &Image, y: &Image) -> Result<f64> {
    same_shape(x, y)?;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (x.len() as f64 * PEAK * PEAK / sse).log10())
}

/// Normalized 1D Gaussian taps of the SSIM window.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut g = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, t) in g.iter_mut().enumerate() {
        let d = i as f64 - c;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|t| *t /= s);
    g
}

/// Separable weighted sum over all fully-contained windows.
fn filter_valid(a: &Image, g: &[f64; SSIM_WINDOW]) -> Image {
    let (r, c) = a.dim();
    let w = SSIM_WINDOW;
    let horiz: Image = Array2::from_shape_fn((r, c + 1 - w), |(i, j)| (0..w).map(|t| g[t] * a[[i, j + t]]).sum());
    Array2::from_shape_fn((r + 1 - w, c + 1 - w), |(i, j)| (0..w).map(|t| g[t] * horiz[[i + t, j]]).sum())
}

/// Mean structural similarity over valid 11×11 Gaussian windows.
pub fn ssim(x: &Image, y: &Image) -> Result<f64> {
    same_shape(x, y)?;
    let (r, c) = x.dim();
    if r < SSIM_WINDOW || c < SSIM_WINDOW {
        return Err(Error::InvalidParameter(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {r}x{c}"
        )));
    }
    let g = gaussian_taps();
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let mx = filter_valid(x, &g);
    let my = filter_valid(y, &g);
    let xx = filter_valid(&(x * x), &g);
    let yy = filter_valid(&(y * y), &g);
    let xy = filter_valid(&(x * y), &g);
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx.as_slice().unwrap()[i], my.as_slice().unwrap()[i]);
        let sx = xx.as_slice().unwrap()[i] - ux * ux;
        let sy = yy.as_slice().unwrap()[i] - uy * uy;
        let sxy = xy.as_slice().unwrap()[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * sxy + c2)) / ((ux * ux + uy * uy + c1) * (sx + sy + c2));
    }
    Ok(total / mx.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub psnr: f64,
    pub ssim: f64,
}

impl QualityReport {
    pub fn compute(reference: &Image, test: &Image) -> Result<Self> {
        Ok(Self { psnr: psnr(reference, test)?, ssim: ssim(reference, test)? })
    }

    /// `key=value` pairs, one per line.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![("psnr", fmt_value(self.psnr)), ("ssim", fmt_value(self.ssim))]
    }
}

fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v:.6}")
    }
}

/// One-line form: `psnr=<v> ssim=<v>`.
impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "psnr={} ssim={}", fmt_value(self.psnr), fmt_value(self.ssim))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_cases() {
        let x = Image::from_elem((4, 4), 10.0);
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
        let y = Image::from_elem((4, 4), 265.0);
        assert!(psnr(&x, &y).unwrap().abs() < 1e-12);
        let z = &x + 1.0;
        assert!((psnr(&x, &z).unwrap() - 48.1308).abs() < 1e-4);
        assert!(psnr(&x, &Image::zeros((2, 2))).is_err());
    }

    #[test]
    fn ssim_identity_and_constants() {
        let x = Image::from_shape_fn((20, 17), |(i, j)| ((i * 7 + j * 13) % 256) as f64);
        assert_eq!(ssim(&x, &x).unwrap(), 1.0);
        let c = Image::from_elem((12, 12), 90.0);
        assert_eq!(ssim(&c, &c).unwrap(), 1.0);
        assert!(ssim(&Image::zeros((10, 10)), &Image::zeros((10, 10))).is_err());
    }

    #[test]
    fn report_line() {
        let r = QualityReport { psnr: f64::INFINITY, ssim: 1.0 };
        assert_eq!(r.to_string(), "psnr=inf ssim=1.0");
        let r = QualityReport { psnr: 30.25, ssim: 0.5 };
        assert_eq!(r.to_string(), "psnr=30.250000 ssim=0.500000");
    }
}
