//! 2D double-tree transform with the tensor-product qWPs `Ψ+ ⊗ Ψ±`.
//!
//! Columns (axis 0) always use the `Ψ+` packets, rows (axis 1) use `Ψ+` for
//! the `+` tree and `Ψ-` for the `-` tree. The real parts of the 2D atoms are
//! the directional waveforms `θ±`, whose spectra live in the quadrant pairs
//! `q0 ∪ q2` and `q1 ∪ q3`. An image is restored as `Re(X+ + X-)/8`.

use ndarray::{Array2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{self, AxisPlan, BlockMap};
use crate::{ComplexImage, FilterBank, Image, Sign};

/// Level-`level` blocks of both trees; block `(j, l)` is stored at
/// `j * 2^level + l` and is `(side >> level)` square.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTree2D {
    pub side: usize,
    pub level: usize,
    pub plus: Vec<ComplexImage>,
    pub minus: Vec<ComplexImage>,
}

impl CoefficientTree2D {
    pub fn zeros(side: usize, level: usize) -> Self {
        let b = side >> level;
        let blocks = vec![Array2::zeros((b, b)); 1 << (2 * level)];
        Self { side, level, plus: blocks.clone(), minus: blocks }
    }

    pub fn blocks_per_side(&self) -> usize {
        1 << self.level
    }

    pub fn block_count(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    pub fn index(&self, j: usize, l: usize) -> usize {
        j * self.blocks_per_side() + l
    }

    pub fn block(&self, sign: Sign, j: usize, l: usize) -> &ComplexImage {
        &self.blocks(sign)[self.index(j, l)]
    }

    pub fn blocks(&self, sign: Sign) -> &[ComplexImage] {
        match sign {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }

    pub fn blocks_mut(&mut self, sign: Sign) -> &mut Vec<ComplexImage> {
        match sign {
            Sign::Plus => &mut self.plus,
            Sign::Minus => &mut self.minus,
        }
    }

    pub fn energy(&self) -> f64 {
        self.plus
            .iter()
            .chain(&self.minus)
            .flat_map(|b| b.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }

    /// Element-wise combination of two congruent trees.
    pub fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex64, Complex64) -> Complex64 + Copy,
    ) -> Self {
        let combine = |a: &[ComplexImage], b: &[ComplexImage]| -> Vec<ComplexImage> {
            a.iter()
                .zip(b)
                .map(|(x, y)| {
                    let mut out = x.clone();
                    out.zip_mut_with(y, |p, &q| *p = f(*p, q));
                    out
                })
                .collect()
        };
        Self {
            side: self.side,
            level: self.level,
            plus: combine(&self.plus, &other.plus),
            minus: combine(&self.minus, &other.minus),
        }
    }

    fn validate_sign(&self, sign: Sign) -> Result<()> {
        let count = 1usize << (2 * self.level);
        let b = self.side >> self.level;
        let blocks = self.blocks(sign);
        if blocks.len() != count {
            return Err(Error::IncompleteTree(format!(
                "{sign:?} tree has {} blocks, expected {count}",
                blocks.len()
            )));
        }
        if let Some(bad) = blocks.iter().find(|x| x.dim() != (b, b)) {
            return Err(Error::IncompleteTree(format!(
                "block of shape {:?}, expected {b}x{b}",
                bad.dim()
            )));
        }
        Ok(())
    }
}

fn plans(fb: &FilterBank, sign: Sign) -> [AxisPlan<'_>; 2] {
    [
        AxisPlan { axis: Axis(0), first: [fb.first.q(Sign::Plus, 0), fb.first.q(Sign::Plus, 1)] },
        AxisPlan { axis: Axis(1), first: [fb.first.q(sign, 0), fb.first.q(sign, 1)] },
    ]
}

fn check_image(x: &Image, fb: &FilterBank) -> Result<()> {
    let (r, c) = x.dim();
    if r != c {
        return Err(Error::InvalidParameter(format!("image must be square, got {r}x{c}")));
    }
    if r != fb.len {
        return Err(Error::LengthMismatch { expected: fb.len, got: r });
    }
    Ok(())
}

fn check_level(fb: &FilterBank, level: usize) -> Result<()> {
    if level == 0 || level > fb.max_level {
        return Err(Error::LevelTooDeep { level, len: fb.len, max: fb.max_level });
    }
    Ok(())
}

/// Forward transform to several levels at once; the trees share one FFT of
/// the input and the whole filtering cascade.
pub fn qwp_forward_2d_levels(
    x: &Image,
    fb: &FilterBank,
    levels: &[usize],
) -> Result<Vec<CoefficientTree2D>> {
    check_image(x, fb)?;
    for &m in levels {
        check_level(fb, m)?;
    }
    let mut xhat = spectral::to_complex(x);
    spectral::fft2(&mut xhat);
    let mut trees: Vec<CoefficientTree2D> =
        levels.iter().map(|&m| CoefficientTree2D::zeros(fb.len, m)).collect();
    for sign in Sign::BOTH {
        let maps = spectral::analysis_tree(xhat.clone(), fb, &plans(fb, sign), levels);
        for (tree, map) in trees.iter_mut().zip(maps) {
            let per_side = tree.blocks_per_side();
            let dst = tree.blocks_mut(sign);
            for (key, mut spec) in map {
                spectral::ifft2(&mut spec);
                dst[key[0] * per_side + key[1]] = spec;
            }
        }
    }
    Ok(trees)
}

pub fn qwp_forward_2d(x: &Image, fb: &FilterBank, level: usize) -> Result<CoefficientTree2D> {
    Ok(qwp_forward_2d_levels(x, fb, &[level])?.remove(0))
}

fn synthesis_spectrum(tree: &CoefficientTree2D, fb: &FilterBank, sign: Sign) -> Result<ComplexImage> {
    tree.validate_sign(sign)?;
    check_level(fb, tree.level)?;
    if tree.side != fb.len {
        return Err(Error::LengthMismatch { expected: fb.len, got: tree.side });
    }
    let per_side = tree.blocks_per_side();
    let map: BlockMap = tree
        .blocks(sign)
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let mut spec = b.clone();
            spectral::fft2(&mut spec);
            (vec![i / per_side, i % per_side], spec)
        })
        .collect();
    Ok(spectral::synthesis_tree(map, fb, &plans(fb, sign), tree.level))
}

/// `X+` or `X-` alone: the complex synthesis of one tree.
pub fn partial_reconstruction(
    tree: &CoefficientTree2D,
    fb: &FilterBank,
    sign: Sign,
) -> Result<ComplexImage> {
    let mut spec = synthesis_spectrum(tree, fb, sign)?;
    spectral::ifft2(&mut spec);
    Ok(spec)
}

pub fn qwp_inverse_2d(tree: &CoefficientTree2D, fb: &FilterBank) -> Result<Image> {
    let plus = partial_reconstruction(tree, fb, Sign::Plus)?;
    let minus = partial_reconstruction(tree, fb, Sign::Minus)?;
    Ok(ndarray::Zip::from(&plus).and(&minus).map_collect(|a, b| (a + b).re / 8.0))
}

/// Real part of a 2D qWP at the origin, normalized to unit norm.
#[derive(Debug, Clone)]
pub struct DirectionalWaveform {
    pub level: usize,
    pub j: usize,
    pub l: usize,
    pub sign: Sign,
    pub values: Image,
}

pub fn directional_waveform_2d(
    fb: &FilterBank,
    m: usize,
    j: usize,
    l: usize,
    sign: Sign,
) -> Result<DirectionalWaveform> {
    check_level(fb, m)?;
    if j >= 1 << m || l >= 1 << m {
        return Err(Error::IndexOutOfRange(format!("block ({j}, {l}) at level {m}")));
    }
    let mut tree = CoefficientTree2D::zeros(fb.len, m);
    let idx = tree.index(j, l);
    tree.blocks_mut(sign)[idx][[0, 0]] = Complex64::new(1.0, 0.0);
    let x = partial_reconstruction(&tree, fb, sign)?;
    let mut values = x.mapv(|z| z.re);
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    values /= norm;
    Ok(DirectionalWaveform { level: m, j, l, sign, values })
}

impl DirectionalWaveform {
    /// Unnormalized 2D DFT of the waveform.
    pub fn spectrum(&self) -> ComplexImage {
        let mut s = spectral::to_complex(&self.values);
        spectral::fft2(&mut s);
        s
    }

    /// Orientation of the dominant spectral peak, in degrees within
    /// `[0, 180)`: the angle of the peak frequency vector `(row, column)`,
    /// measured from the column-frequency axis. Ties are broken towards the
    /// lowest bin index.
    pub fn peak_angle(&self) -> f64 {
        let spec = self.spectrum();
        let n = spec.nrows() as isize;
        let mut best = (f64::MIN, 0isize, 0isize);
        for ((a, b), z) in spec.indexed_iter() {
            let mag = z.norm();
            if mag > best.0 * (1.0 + 1e-9) {
                let signed = |k: usize| {
                    let k = k as isize;
                    if k > n / 2 {
                        k - n
                    } else {
                        k
                    }
                };
                best = (mag, signed(a), signed(b));
            }
        }
        let deg = (best.1 as f64).atan2(best.2 as f64).to_degrees();
        deg.rem_euclid(180.0)
    }
}

/// Number of distinct orientations among level-`m` waveforms of both trees,
/// with peak angles rounded to whole degrees.
pub fn orientation_classes(fb: &FilterBank, m: usize) -> Result<usize> {
    let mut classes = std::collections::BTreeSet::new();
    for sign in Sign::BOTH {
        for j in 0..1 << m {
            for l in 0..1 << m {
                let w = directional_waveform_2d(fb, m, j, l, sign)?;
                classes.insert((w.peak_angle().round() as i64).rem_euclid(180));
            }
        }
    }
    Ok(classes.len())
}

/// Fraction of spectral energy outside the quadrant pair the waveform should
/// occupy (`q0 ∪ q2` for `θ+`, `q1 ∪ q3` for `θ-`), with the axes counted as
/// belonging to both pairs.
pub fn quadrant_leakage(w: &DirectionalWaveform) -> f64 {
    let spec = w.spectrum();
    let n = spec.nrows();
    let half = n / 2;
    let side = |k: usize| -> i8 {
        if k == 0 || k == half {
            0
        } else if k < half {
            1
        } else {
            -1
        }
    };
    let (mut total, mut outside) = (0.0, 0.0);
    for ((a, b), z) in spec.indexed_iter() {
        let e = z.norm_sqr();
        total += e;
        let prod = side(a) * side(b);
        let wrong = match w.sign {
            Sign::Plus => prod < 0,
            Sign::Minus => prod > 0,
        };
        if wrong {
            outside += e;
        }
    }
    outside / total
}

/// Write a real array as an 8-bit PGM, linearly rescaled to `[0, 255]`.
pub fn gallery_image(values: &Image) -> Image {
    let (lo, hi) = values
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    values.mapv(|v| (v - lo) / span * 255.0)
}

/// Centered log-magnitude spectrum, for display.
pub fn log_spectrum(w: &DirectionalWaveform) -> Image {
    let spec = w.spectrum();
    let n = spec.nrows();
    let h = n / 2;
    Array2::from_shape_fn((n, n), |(a, b)| (1.0 + spec[[(a + h) % n, (b + h) % n]].norm()).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(n: usize, seed: u64) -> Image {
        // Small LCG; only needs to be deterministic.
        let mut s = seed;
        Array2::from_shape_fn((n, n), |_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 255.0
        })
    }

    #[test]
    fn block_counts() {
        let fb = FilterBank::new(3, 64, 3).unwrap();
        let x = noise(64, 1);
        let trees = qwp_forward_2d_levels(&x, &fb, &[1, 2]).unwrap();
        assert_eq!(trees[0].block_count(), 8);
        assert_eq!(trees[1].block_count(), 32);
        assert_eq!(trees[1].plus[0].dim(), (16, 16));
    }

    #[test]
    fn roundtrip_noise_all_levels() {
        let fb = FilterBank::new(5, 64, 3).unwrap();
        let x = noise(64, 7);
        for m in 1..=3 {
            let t = qwp_forward_2d(&x, &fb, m).unwrap();
            let back = qwp_inverse_2d(&t, &fb).unwrap();
            let err = (&back - &x).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(err < 1e-9 * 255.0, "m={m} err={err}");
            let e: f64 = x.iter().map(|v| v * v).sum();
            assert!((t.energy() - 8.0 * e).abs() < 1e-9 * e);
        }
    }

    #[test]
    fn zero_tree() {
        let fb = FilterBank::new(3, 32, 2).unwrap();
        let t = qwp_forward_2d(&Image::zeros((32, 32)), &fb, 2).unwrap();
        assert_eq!(t.energy(), 0.0);
        let x = qwp_inverse_2d(&CoefficientTree2D::zeros(32, 2), &fb).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
        let p = partial_reconstruction(&CoefficientTree2D::zeros(32, 2), &fb, Sign::Minus).unwrap();
        assert!(p.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn errors() {
        let fb = FilterBank::new(3, 32, 2).unwrap();
        assert!(qwp_forward_2d(&Image::zeros((16, 16)), &fb, 1).is_err());
        assert!(qwp_forward_2d(&Image::zeros((32, 16)), &fb, 1).is_err());
        assert!(qwp_forward_2d(&Image::zeros((32, 32)), &fb, 3).is_err());
        let mut t = CoefficientTree2D::zeros(32, 2);
        t.plus.truncate(3);
        assert!(matches!(qwp_inverse_2d(&t, &fb), Err(Error::IncompleteTree(_))));
        assert!(directional_waveform_2d(&fb, 2, 4, 0, Sign::Plus).is_err());
    }
}
