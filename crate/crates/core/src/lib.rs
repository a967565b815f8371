//! Directional quasi-analytic wavelet packets built from polynomial splines,
//! and two iterative inpainting schemes built on top of them.
//!
//! The crate is organised bottom-up:
//!
//! * [`spline_filters`] samples periodic B-splines and derives every
//!   frequency response the transforms need.
//! * [`transform1d`] and [`transform2d`] run the double-tree (`+`/`-`)
//!   quasi-analytic packet transforms entirely in the DFT domain.
//! * [`shrinkage`] holds the bivariate shrinkage operator and the
//!   threshold schedule with its select/stop controller.
//! * [`inpaint`] implements the plain iterative-thresholding scheme (M1) and
//!   the split Bregman variant (M2).
//! * [`metrics`] and [`imageio`] cover PSNR/SSIM, PGM files, degradation
//!   synthesis and run configuration.

pub mod error;
pub mod imageio;
pub mod inpaint;
pub mod metrics;
pub mod shrinkage;
pub mod spectral;
pub mod spline_filters;
pub mod transform1d;
pub mod transform2d;

pub use error::{Error, Result};
pub use inpaint::{m1_inpaint, m2_inpaint, InpaintConfig, MaskedImage, Method};
pub use spline_filters::FilterBank;
pub use transform1d::CoefficientTree1D;
pub use transform2d::CoefficientTree2D;

pub use num_complex::Complex64;

/// Real-valued image, indexed `[row, column]`.
pub type Image = ndarray::Array2<f64>;
/// Complex-valued image.
pub type ComplexImage = ndarray::Array2<Complex64>;

/// Which of the two trees a block or waveform belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];
}
