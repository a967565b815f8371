#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use qwp::{imageio, Image};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn camera(n: usize) -> Image {
    imageio::load_image(data_path(&format!("camera{n}.pgm"))).expect("test image")
}

/// Two crossing oriented sinusoid gratings.
pub fn texture(n: usize) -> Image {
    Image::from_shape_fn((n, n), |(k, j)| {
        let (k, j) = (k as f64, j as f64);
        128.0 + 50.0 * (2.0 * PI * (0.8 * k + 0.6 * j) / 9.0).sin()
            + 40.0 * (2.0 * PI * (-0.5 * k + 0.866 * j) / 14.0).sin()
    })
}

/// Smooth blob-and-ramp image.
pub fn smooth(n: usize) -> Image {
    let c = n as f64 / 2.0;
    Image::from_shape_fn((n, n), |(k, j)| {
        let (x, y) = ((k as f64 - c) / n as f64, (j as f64 - c) / n as f64);
        60.0 + 120.0 * (-(x * x + y * y) * 12.0).exp() + 40.0 * x + 30.0 * (2.0 * PI * y).cos()
    })
}

pub fn uniform(rows: usize, cols: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_shape_fn((rows, cols), |_| rng.gen_range(0.0..255.0))
}

pub fn uniform_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn max_abs_diff(a: &Image, b: &Image) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
