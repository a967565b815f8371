//! Frequency responses of the spline wavelet-packet filter banks.
//!
//! Everything here is expressed with the DFT convention
//! `x̂[n] = Σ_k x[k]·e^{-2πikn/N}`, which is also what `rustfft` computes in
//! the forward direction.
//!
//! The lowpass response is
//!
//! ```text
//! β[n] = (u[2n] + v[2n]) / sqrt(u[2n]² + v[2n]²)
//! α[n] = e^{2πin/N} (u[2n] - v[2n]) / sqrt(u[2n]² + v[2n]²)
//! ```
//!
//! with unit prefactor. With this choice `|β[n]|² + |α[n]|² = 2`, the two-sample
//! shifts of both first-level packets are orthonormal, `β[0] = √2` and
//! `α[N/2] = -√2`, and one analysis/synthesis level is exactly the identity.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MIN_ORDER: usize = 2;
pub const MAX_ORDER: usize = 9;
pub const DEFAULT_ORDER: usize = 5;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Centered cardinal B-spline of order `p` at `t`, from the truncated-power
/// (divided difference) form.
pub fn bspline(p: usize, t: f64) -> f64 {
    let half = p as f64 / 2.0;
    if t <= -half || t >= half {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut binom = 1.0;
    for k in 0..=p {
        let x = t + half - k as f64;
        if x > 0.0 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * binom * x.powi(p as i32 - 1);
        }
        binom = binom * (p - k) as f64 / (k + 1) as f64;
    }
    let fact: f64 = (1..p).map(|k| k as f64).product();
    sum / fact
}

pub(crate) fn check_len(n: usize) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo { got: n, min: 8 });
    }
    Ok(())
}

/// DFTs of the B-spline sampled at the integers (`u`) and at the
/// half-integers (`v`).
#[derive(Debug, Clone)]
pub struct SplineSpectra {
    pub order: usize,
    pub len: usize,
    pub u: Vec<f64>,
    pub v: Vec<Complex64>,
}

impl SplineSpectra {
    /// `u[m]` for any non-negative argument; `u` has period `N`.
    pub fn u_at(&self, m: usize) -> f64 {
        self.u[m % self.len]
    }

    /// Real part of `v[m]` for any non-negative argument. Because of the
    /// `ω^{-n/2}` factor, `v[m + N] = -v[m]`.
    pub fn v_at(&self, m: usize) -> f64 {
        let r = m % (2 * self.len);
        if r < self.len {
            self.v[r].re
        } else {
            -self.v[r - self.len].re
        }
    }
}

pub fn sample_bspline(p: usize, len: usize) -> Result<SplineSpectra> {
    if !(MIN_ORDER..=MAX_ORDER).contains(&p) {
        return Err(Error::InvalidOrder(p));
    }
    check_len(len)?;
    let nf = len as f64;
    let half = len as i64 / 2;
    let ks: Vec<i64> = (-half..half).collect();
    let at_int: Vec<f64> = ks.iter().map(|&k| bspline(p, k as f64)).collect();
    let at_half: Vec<f64> = ks.iter().map(|&k| bspline(p, k as f64 + 0.5)).collect();

    let mut u = Vec::with_capacity(len);
    let mut v = Vec::with_capacity(len);
    for n in 0..len {
        let mut su = Complex64::new(0.0, 0.0);
        let mut sv = Complex64::new(0.0, 0.0);
        for (i, &k) in ks.iter().enumerate() {
            let w = Complex64::from_polar(1.0, -2.0 * PI * (k * n as i64) as f64 / nf);
            su += w * at_int[i];
            sv += w * at_half[i];
        }
        u.push(su.re);
        v.push(Complex64::from_polar(1.0, -PI * n as f64 / nf) * sv);
    }
    Ok(SplineSpectra { order: p, len, u, v })
}

/// First-level responses: DTSWP filters `β`, `α`, their complementary
/// counterparts `f0`, `f1`, and the quasi-analytic pairs `q±s = h_s ± i f_s`.
#[derive(Debug, Clone)]
pub struct FirstLevelFilters {
    pub beta: Vec<Complex64>,
    pub alpha: Vec<Complex64>,
    pub f0: Vec<Complex64>,
    pub f1: Vec<Complex64>,
    pub qplus0: Vec<Complex64>,
    pub qplus1: Vec<Complex64>,
    pub qminus0: Vec<Complex64>,
    pub qminus1: Vec<Complex64>,
}

/// Complementary response: `-i·h` on positive frequencies, `+i·h` on negative
/// ones, and the original DC and Nyquist values kept.
fn complementary(h: &[Complex64]) -> Vec<Complex64> {
    let len = h.len();
    let half = len / 2;
    h.iter()
        .enumerate()
        .map(|(n, &x)| match n {
            0 => x,
            n if n == half => x,
            n if n < half => -I * x,
            _ => I * x,
        })
        .collect()
}

impl FirstLevelFilters {
    /// Lowpass/highpass DTSWP response for `s ∈ {0, 1}`.
    pub fn h(&self, s: usize) -> &[Complex64] {
        if s == 0 {
            &self.beta
        } else {
            &self.alpha
        }
    }

    pub fn f(&self, s: usize) -> &[Complex64] {
        if s == 0 {
            &self.f0
        } else {
            &self.f1
        }
    }

    pub fn q(&self, sign: crate::Sign, s: usize) -> &[Complex64] {
        match (sign, s) {
            (crate::Sign::Plus, 0) => &self.qplus0,
            (crate::Sign::Plus, _) => &self.qplus1,
            (crate::Sign::Minus, 0) => &self.qminus0,
            (crate::Sign::Minus, _) => &self.qminus1,
        }
    }
}

pub fn first_level_filters(s: &SplineSpectra) -> FirstLevelFilters {
    let len = s.len;
    let nf = len as f64;
    let mut beta = Vec::with_capacity(len);
    let mut alpha = Vec::with_capacity(len);
    for n in 0..len {
        let u = s.u_at(2 * n);
        let v = s.v_at(2 * n);
        let den = (u * u + v * v).sqrt();
        assert!(den > 0.0, "zero spline norm at bin {n}");
        beta.push(Complex64::new((u + v) / den, 0.0));
        alpha.push(Complex64::from_polar(1.0, 2.0 * PI * n as f64 / nf) * ((u - v) / den));
    }
    let f0 = complementary(&beta);
    let f1 = complementary(&alpha);
    let combine = |h: &[Complex64], f: &[Complex64], sign: f64| -> Vec<Complex64> {
        h.iter().zip(f).map(|(&h, &f)| h + I * f * sign).collect()
    };
    FirstLevelFilters {
        qplus0: combine(&beta, &f0, 1.0),
        qplus1: combine(&alpha, &f1, 1.0),
        qminus0: combine(&beta, &f0, -1.0),
        qminus1: combine(&alpha, &f1, -1.0),
        beta,
        alpha,
        f0,
        f1,
    }
}

/// All filters of a depth-`max_level` transform on length-`len` signals.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct FilterBank {
    pub order: usize,
    pub len: usize,
    pub max_level: usize,
    pub first: FirstLevelFilters,
    /// `levels[m][s][n] = ĥ_s[2^m n mod N]`, full length `N`, for `m = 0..=max_level`.
    levels: Vec<[Vec<Complex64>; 2]>,
}

/// Deepest level allowed for length `len`: `2^M <= len / 8`.
pub fn max_level_for(len: usize) -> usize {
    (len / 8).max(1).trailing_zeros() as usize
}

pub fn build_filter_bank(p: usize, len: usize, max_level: usize) -> Result<FilterBank> {
    let spectra = sample_bspline(p, len)?;
    let bound = max_level_for(len);
    if max_level == 0 || max_level > bound {
        return Err(Error::LevelTooDeep { level: max_level, len, max: bound });
    }
    let first = first_level_filters(&spectra);
    let levels = (0..=max_level)
        .map(|m| {
            let dilate = |h: &[Complex64]| -> Vec<Complex64> {
                (0..len).map(|n| h[(n << m) % len]).collect()
            };
            [dilate(&first.beta), dilate(&first.alpha)]
        })
        .collect();
    Ok(FilterBank { order: p, len, max_level, first, levels })
}

/// One filter-bank stage expressed as 2×2 matrices coupling bins `n` and
/// `n + L/2` at level length `L = N/2^m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationMatrices {
    /// `M̃[n] = M[n]^T`.
    pub analysis: [[Complex64; 2]; 2],
    /// `M[n]`: rows are `n` and `n + L/2`, columns are `s = 0, 1`.
    pub synthesis: [[Complex64; 2]; 2],
}

impl FilterBank {
    pub fn new(p: usize, len: usize, max_level: usize) -> Result<Self> {
        build_filter_bank(p, len, max_level)
    }

    /// Dilated response `ĥ_{[m],s}` over the full length `N` (period `N/2^m`).
    pub fn response(&self, m: usize, s: usize) -> &[Complex64] {
        &self.levels[m][s]
    }

    /// One period of `ĥ_{[m],s}`, i.e. the length-`N/2^m` filter applied to
    /// level-`m` coefficient blocks.
    pub fn dilated(&self, m: usize, s: usize) -> &[Complex64] {
        &self.levels[m][s][..self.len >> m]
    }

    pub fn modulation_matrix(&self, m: usize, n: usize) -> Result<ModulationMatrices> {
        if m > self.max_level {
            return Err(Error::IndexOutOfRange(format!("level {m} > {}", self.max_level)));
        }
        let l = self.len >> m;
        if n >= l {
            return Err(Error::IndexOutOfRange(format!("bin {n} >= {l} at level {m}")));
        }
        let at = |k: usize| [self.levels[m][0][k % l], self.levels[m][1][k % l]];
        let synthesis = [at(n), at(n + l / 2)];
        let analysis = [
            [synthesis[0][0], synthesis[1][0]],
            [synthesis[0][1], synthesis[1][1]],
        ];
        Ok(ModulationMatrices { analysis, synthesis })
    }

    /// Dump every first-level response as CSV rows `n,name,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,filter,re,im")?;
        let f = &self.first;
        let named: [(&str, &[Complex64]); 8] = [
            ("beta", &f.beta),
            ("alpha", &f.alpha),
            ("f0", &f.f0),
            ("f1", &f.f1),
            ("qplus0", &f.qplus0),
            ("qplus1", &f.qplus1),
            ("qminus0", &f.qminus0),
            ("qminus1", &f.qminus1),
        ];
        for (name, resp) in named {
            for (n, z) in resp.iter().enumerate() {
                writeln!(w, "{n},{name},{:.17e},{:.17e}", z.re, z.im)?;
            }
        }
        Ok(())
    }
}

impl ModulationMatrices {
    /// `(1/2)·M̃[-n]` applied to `(x̂[n], x̂[n + L/2])`, given the matrices at
    /// `-n`.
    pub fn analyze(at_neg: &ModulationMatrices, x: [Complex64; 2]) -> [Complex64; 2] {
        let a = &at_neg.analysis;
        [
            (a[0][0] * x[0] + a[0][1] * x[1]) * 0.5,
            (a[1][0] * x[0] + a[1][1] * x[1]) * 0.5,
        ]
    }

    pub fn synthesize(&self, y: [Complex64; 2]) -> [Complex64; 2] {
        let m = &self.synthesis;
        [m[0][0] * y[0] + m[0][1] * y[1], m[1][0] * y[0] + m[1][1] * y[1]]
    }
}
