//! Binary PGM images and masks, synthetic degradation and run configuration.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inpaint::{InpaintConfig, Method};
use crate::Image;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

/// Parse a binary `P5` graymap with maxval 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("incomplete PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(Error::Format(format!("expected magic P5, found {:?}", fields[0])));
    }
    let num = |s: &str, what: &str| -> Result<usize> {
        s.parse().map_err(|_| Error::Format(format!("bad {what} {s:?} in PGM header")))
    };
    let (width, height, maxval) = (num(&fields[1], "width")?, num(&fields[2], "height")?, num(&fields[3], "maxval")?);
    if maxval != 255 {
        return Err(Error::Format(format!("unsupported maxval {maxval}, only 255 is handled")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format("PGM has zero size".into()));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format("missing whitespace after PGM header".into()));
    }
    pos += 1;
    let need = width * height;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(Error::Format(format!(
            "truncated PGM raster: expected {need} bytes, found {}",
            raster.len()
        )));
    }
    Ok(Array2::from_shape_fn((height, width), |(i, j)| raster[i * width + j] as f64))
}

/// Encode with values rounded and clamped to `0..=255`.
pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let (h, w) = img.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(img.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    out
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    decode_pgm(&fs::read(path).map_err(io_err(path))?)
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(io_err(path))
}

/// Masks are stored as 0/255 graymaps; any nonzero pixel counts as present.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Image> {
    Ok(load_image(path)?.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }))
}

pub fn save_mask(mask: &Image, path: impl AsRef<Path>) -> Result<()> {
    save_image(&mask.mapv(|v| if v > 0.0 { 255.0 } else { 0.0 }), path)
}

/// `n × n` mask with exactly `⌊rho_missing·n²⌋` zeros at seeded positions.
pub fn make_random_mask(n: usize, rho_missing: f64, seed: u64) -> Result<Image> {
    if !(0.0..1.0).contains(&rho_missing) {
        return Err(Error::InvalidParameter(format!("rho_missing must be in [0, 1), got {rho_missing}")));
    }
    let total = n * n;
    let zeros = (rho_missing * total as f64).floor() as usize;
    let mut idx: Vec<usize> = (0..total).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut mask = vec![1.0; total];
    for &i in &idx[..zeros] {
        mask[i] = 0.0;
    }
    Ok(Array2::from_shape_vec((n, n), mask).expect("shape matches"))
}

/// Add seeded zero-mean Gaussian noise with standard deviation `sigma`.
pub fn add_noise(img: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidParameter(format!("noise sigma {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(img.mapv(|v| v + normal.sample(&mut rng)))
}

/// Degradation model: `Θ·(X + n)`.
pub fn degrade(clean: &Image, mask: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if clean.dim() != mask.dim() {
        return Err(Error::InvalidParameter(format!(
            "mask {:?} does not match image {:?}",
            mask.dim(),
            clean.dim()
        )));
    }
    Ok(add_noise(clean, sigma, seed)? * mask)
}

/// Where the inpainting mask comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskSource {
    File(PathBuf),
    Random { rho_missing: f64 },
}

/// Everything needed for one command-line run, stored as flat `key = value`
/// TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Mask image file; takes precedence over `rho_missing`.
    pub mask: Option<PathBuf>,
    pub rho_missing: Option<f64>,
    pub sigma: f64,
    pub seed: u64,
    pub method: Method,
    #[serde(flatten)]
    pub inpaint: InpaintConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            output: None,
            mask: None,
            rho_missing: None,
            sigma: 0.0,
            seed: 0,
            method: Method::M2,
            inpaint: InpaintConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let known = Self::known_keys();
        if let Some(bad) = table.keys().find(|k| !known.contains(k.as_str())) {
            return Err(Error::Config(format!("unknown key {bad:?}")));
        }
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(format!("{e}")))?;
        cfg.inpaint.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("{e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_toml_str(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml_string()?).map_err(io_err(path))
    }

    pub fn known_keys() -> BTreeSet<String> {
        let mut keys: BTreeSet<String> =
            ["input", "output", "mask", "rho_missing", "sigma", "seed", "method"].map(String::from).into();
        keys.extend(InpaintConfig::KEYS.iter().map(|k| k.to_string()));
        keys
    }

    pub fn mask_source(&self) -> Option<MaskSource> {
        match (&self.mask, self.rho_missing) {
            (Some(p), _) => Some(MaskSource::File(p.clone())),
            (None, Some(rho_missing)) => Some(MaskSource::Random { rho_missing }),
            (None, None) => None,
        }
    }
}
