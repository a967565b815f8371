//! Periodic analytic signals and the 1D quasi-analytic packet transform.
//!
//! Level-`m` coefficients are `z±[m],l[k] = <x, Ψ±[m],l[· - 2^m k]>`, where
//! `Ψ± = ψ ± iφ`. Every level holds `2·2^m` blocks of `N/2^m` coefficients
//! and the signal is recovered as `Re(S+ + S-)/4`, with `S±` the synthesis of
//! each tree.

use std::io::Write;

use ndarray::{Array2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{self, AxisPlan, BlockMap};
use crate::{FilterBank, Sign};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn spectrum(x: &[Complex64]) -> Array2<Complex64> {
    let mut a = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row vector");
    spectral::fft2(&mut a);
    a
}

fn inverse_spectrum(mut a: Array2<Complex64>) -> Vec<Complex64> {
    spectral::ifft2(&mut a);
    a.into_raw_vec_and_offset().0
}

fn check_signal(len: usize) -> Result<()> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo { got: len, min: 2 });
    }
    Ok(())
}

/// Discrete periodic Hilbert transform: `-i` on positive frequencies, `+i` on
/// negative ones, DC and Nyquist removed.
pub fn hilbert_periodic(x: &[f64]) -> Result<Vec<f64>> {
    check_signal(x.len())?;
    let len = x.len();
    let half = len / 2;
    // Project out DC and Nyquist first so that signals made only of those
    // map to exact zeros.
    let dc = x.iter().sum::<f64>() / len as f64;
    let alt = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    let ny = x.iter().enumerate().map(|(k, &v)| alt(k) * v).sum::<f64>() / len as f64;
    let rest: Vec<Complex64> =
        x.iter().enumerate().map(|(k, &v)| Complex64::new(v - dc - ny * alt(k), 0.0)).collect();
    let mut xh = spectrum(&rest);
    for (n, z) in xh.iter_mut().enumerate() {
        *z *= match n {
            0 => Complex64::new(0.0, 0.0),
            n if n == half => Complex64::new(0.0, 0.0),
            n if n < half => -I,
            _ => I,
        };
    }
    Ok(inverse_spectrum(xh).into_iter().map(|z| z.re).collect())
}

/// `x± = x ± i·H(x)`.
pub fn analytic_parts(x: &[f64]) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let t = hilbert_periodic(x)?;
    let plus = x.iter().zip(&t).map(|(&a, &b)| Complex64::new(a, b)).collect();
    let minus = x.iter().zip(&t).map(|(&a, &b)| Complex64::new(a, -b)).collect();
    Ok((plus, minus))
}

/// Level-`level` coefficients of both trees.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTree1D {
    pub len: usize,
    pub level: usize,
    /// `plus[l]` holds `z+[m],l`, length `len >> level`.
    pub plus: Vec<Vec<Complex64>>,
    pub minus: Vec<Vec<Complex64>>,
}

impl CoefficientTree1D {
    pub fn zeros(len: usize, level: usize) -> Self {
        let blocks = vec![vec![Complex64::new(0.0, 0.0); len >> level]; 1 << level];
        Self { len, level, plus: blocks.clone(), minus: blocks }
    }

    pub fn blocks(&self, sign: Sign) -> &[Vec<Complex64>] {
        match sign {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }

    pub fn blocks_mut(&mut self, sign: Sign) -> &mut Vec<Vec<Complex64>> {
        match sign {
            Sign::Plus => &mut self.plus,
            Sign::Minus => &mut self.minus,
        }
    }

    /// Sum of `|z|²` over both trees.
    pub fn energy(&self) -> f64 {
        self.plus
            .iter()
            .chain(&self.minus)
            .flat_map(|b| b.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }

    fn validate(&self) -> Result<()> {
        let count = 1usize << self.level;
        let blen = self.len >> self.level;
        for sign in Sign::BOTH {
            let blocks = self.blocks(sign);
            if blocks.len() != count {
                return Err(Error::IncompleteTree(format!(
                    "{sign:?} tree has {} blocks, expected {count}",
                    blocks.len()
                )));
            }
            if let Some(b) = blocks.iter().find(|b| b.len() != blen) {
                return Err(Error::IncompleteTree(format!(
                    "block of length {}, expected {blen}",
                    b.len()
                )));
            }
        }
        Ok(())
    }
}

fn check_level(fb: &FilterBank, level: usize) -> Result<()> {
    if level == 0 || level > fb.max_level {
        return Err(Error::LevelTooDeep { level, len: fb.len, max: fb.max_level });
    }
    Ok(())
}

fn plan<'a>(first: [&'a [Complex64]; 2]) -> [AxisPlan<'a>; 1] {
    [AxisPlan { axis: Axis(1), first }]
}

fn blocks_from_map(map: BlockMap, level: usize) -> Vec<Vec<Complex64>> {
    let mut blocks = vec![Vec::new(); 1 << level];
    for (key, spec) in map {
        blocks[key[0]] = inverse_spectrum(spec);
    }
    blocks
}

/// Decompose a real signal down to every level in `levels`.
pub fn qwp_forward_1d_levels(
    x: &[f64],
    fb: &FilterBank,
    levels: &[usize],
) -> Result<Vec<CoefficientTree1D>> {
    if x.len() != fb.len {
        return Err(Error::LengthMismatch { expected: fb.len, got: x.len() });
    }
    for &m in levels {
        check_level(fb, m)?;
    }
    let xhat = spectrum(&x.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>());
    let mut out: Vec<CoefficientTree1D> =
        levels.iter().map(|&m| CoefficientTree1D::zeros(fb.len, m)).collect();
    for sign in Sign::BOTH {
        let plans = plan([fb.first.q(sign, 0), fb.first.q(sign, 1)]);
        let maps = spectral::analysis_tree(xhat.clone(), fb, &plans, levels);
        for (tree, map) in out.iter_mut().zip(maps) {
            *tree.blocks_mut(sign) = blocks_from_map(map, tree.level);
        }
    }
    Ok(out)
}

pub fn qwp_forward_1d(x: &[f64], fb: &FilterBank, level: usize) -> Result<CoefficientTree1D> {
    Ok(qwp_forward_1d_levels(x, fb, &[level])?.remove(0))
}

fn synthesize_with(
    blocks: &[Vec<Complex64>],
    level: usize,
    fb: &FilterBank,
    first: [&[Complex64]; 2],
) -> Vec<Complex64> {
    let map: BlockMap = blocks
        .iter()
        .enumerate()
        .map(|(l, b)| (vec![l], spectrum(b)))
        .collect();
    let root = spectral::synthesis_tree(map, fb, &plan(first), level);
    inverse_spectrum(root)
}

/// `S± = Σ z±[m],l[k] Ψ±[m],l[· - 2^m k]` for one tree.
pub fn partial_synthesis_1d(
    tree: &CoefficientTree1D,
    fb: &FilterBank,
    sign: Sign,
) -> Result<Vec<Complex64>> {
    tree.validate()?;
    check_level(fb, tree.level)?;
    if tree.len != fb.len {
        return Err(Error::LengthMismatch { expected: fb.len, got: tree.len });
    }
    Ok(synthesize_with(
        tree.blocks(sign),
        tree.level,
        fb,
        [fb.first.q(sign, 0), fb.first.q(sign, 1)],
    ))
}

pub fn qwp_inverse_1d(tree: &CoefficientTree1D, fb: &FilterBank) -> Result<Vec<f64>> {
    let plus = partial_synthesis_1d(tree, fb, Sign::Plus)?;
    let minus = partial_synthesis_1d(tree, fb, Sign::Minus)?;
    Ok(plus.iter().zip(&minus).map(|(a, b)| (a + b).re / 4.0).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveformKind {
    /// Orthonormal spline packet `ψ`.
    Psi,
    /// Complementary packet `φ`.
    Phi,
    /// `Ψ+ = ψ + iφ`.
    QPlus,
    /// `Ψ- = ψ - iφ`.
    QMinus,
}

impl std::str::FromStr for WaveformKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psi" => Ok(Self::Psi),
            "phi" => Ok(Self::Phi),
            "qplus" => Ok(Self::QPlus),
            "qminus" => Ok(Self::QMinus),
            other => Err(Error::InvalidParameter(format!("unknown waveform kind {other:?}"))),
        }
    }
}

/// Waveform of packet `(m, l)` at shift zero, synthesized from a unit
/// coefficient. `ψ` and `φ` come out real with unit norm.
pub fn waveform_1d(
    fb: &FilterBank,
    m: usize,
    l: usize,
    kind: WaveformKind,
) -> Result<Vec<Complex64>> {
    check_level(fb, m)?;
    if l >= 1 << m {
        return Err(Error::IndexOutOfRange(format!("packet {l} at level {m}")));
    }
    let f = &fb.first;
    let first: [&[Complex64]; 2] = match kind {
        WaveformKind::Psi => [&f.beta, &f.alpha],
        WaveformKind::Phi => [&f.f0, &f.f1],
        WaveformKind::QPlus => [&f.qplus0, &f.qplus1],
        WaveformKind::QMinus => [&f.qminus0, &f.qminus1],
    };
    let blen = fb.len >> m;
    let mut blocks = vec![vec![Complex64::new(0.0, 0.0); blen]; 1 << m];
    blocks[l][0] = Complex64::new(1.0, 0.0);
    let mut w = synthesize_with(&blocks, m, fb, first);
    if matches!(kind, WaveformKind::Psi | WaveformKind::Phi) {
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut w {
            *z = Complex64::new(z.re / norm, 0.0);
        }
    }
    Ok(w)
}

/// CSV dump of all level-`m` waveforms of one kind plus their magnitude
/// spectra: `l,k,re,im,spectrum_magnitude`.
pub fn write_waveforms_csv<W: Write>(
    fb: &FilterBank,
    m: usize,
    kind: WaveformKind,
    mut out: W,
) -> Result<()> {
    let io = |e| Error::Io { path: "<csv>".into(), source: e };
    writeln!(out, "l,k,re,im,spectrum_magnitude").map_err(io)?;
    for l in 0..1usize << m {
        let w = waveform_1d(fb, m, l, kind)?;
        let spec = spectrum(&w);
        for (k, (z, s)) in w.iter().zip(spec.iter()).enumerate() {
            writeln!(out, "{l},{k},{:.12e},{:.12e},{:.12e}", z.re, z.im, s.norm()).map_err(io)?;
        }
    }
    Ok(())
}
