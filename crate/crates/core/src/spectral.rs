//! DFT-domain multirate machinery shared by the 1D and 2D transforms.
//!
//! A coefficient block is carried as its DFT. Filtering with the time-reversed
//! filter followed by decimation by two along one axis maps a length-`L`
//! spectrum `X` to the length-`L/2` spectrum
//!
//! ```text
//! Y[n] = ( conj(G[n]) X[n] + conj(G[n + L/2]) X[n + L/2] ) / 2
//! ```
//!
//! and the adjoint (upsampling followed by filtering, summed over the two
//! channels) is `X[n] = Σ_s G_s[n] Y_s[n mod L/2]`. A whole tree is therefore
//! decomposed from a single forward FFT of the input.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

fn fft_axis(a: &mut Array2<Complex64>, axis: Axis, inverse: bool) {
    let len = a.len_of(axis);
    if len <= 1 {
        return;
    }
    let fft = plan(len, inverse);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for mut lane in a.lanes_mut(axis) {
        if let Some(s) = lane.as_slice_mut() {
            fft.process_with_scratch(s, &mut scratch);
            continue;
        }
        for (b, x) in buf.iter_mut().zip(lane.iter()) {
            *b = *x;
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (x, b) in lane.iter_mut().zip(&buf) {
            *x = *b;
        }
    }
}

/// Unnormalized forward 2D DFT, in place.
pub fn fft2(a: &mut Array2<Complex64>) {
    fft_axis(a, Axis(1), false);
    fft_axis(a, Axis(0), false);
}

/// Inverse 2D DFT including the `1/(rows·cols)` factor, in place.
pub fn ifft2(a: &mut Array2<Complex64>) {
    fft_axis(a, Axis(1), true);
    fft_axis(a, Axis(0), true);
    let scale = 1.0 / a.len() as f64;
    a.mapv_inplace(|z| z * scale);
}

pub fn to_complex(x: &Array2<f64>) -> Array2<Complex64> {
    x.mapv(|v| Complex64::new(v, 0.0))
}

/// Time-reversed filtering plus decimation by two along `axis`.
pub fn analyze_axis(src: &Array2<Complex64>, axis: Axis, g: &[Complex64]) -> Array2<Complex64> {
    let len = src.len_of(axis);
    debug_assert_eq!(g.len(), len);
    let half = len / 2;
    let mut shape = src.raw_dim();
    shape[axis.index()] = half;
    let mut out = Array2::zeros(shape);
    for n in 0..half {
        let (g0, g1) = (g[n].conj() * 0.5, g[n + half].conj() * 0.5);
        Zip::from(out.index_axis_mut(axis, n))
            .and(src.index_axis(axis, n))
            .and(src.index_axis(axis, n + half))
            .for_each(|o, &a, &b| *o = g0 * a + g1 * b);
    }
    out
}

/// Upsampling plus filtering along `axis`, summed over the two channels.
pub fn synthesize_axis(
    children: [&Array2<Complex64>; 2],
    axis: Axis,
    g: [&[Complex64]; 2],
) -> Array2<Complex64> {
    let half = children[0].len_of(axis);
    let len = 2 * half;
    debug_assert_eq!(g[0].len(), len);
    let mut shape = children[0].raw_dim();
    shape[axis.index()] = len;
    let mut out = Array2::zeros(shape);
    for n in 0..len {
        let (g0, g1) = (g[0][n], g[1][n]);
        Zip::from(out.index_axis_mut(axis, n))
            .and(children[0].index_axis(axis, n % half))
            .and(children[1].index_axis(axis, n % half))
            .for_each(|o, &a, &b| *o = g0 * a + g1 * b);
    }
    out
}

/// Index of the child reached from packet `l` through filter `s`; children are
/// kept in frequency order.
pub fn child_index(l: usize, s: usize) -> usize {
    if l % 2 == 0 {
        2 * l + s
    } else {
        2 * l + 1 - s
    }
}

/// Inverse of [`child_index`]: `(parent, s)`.
pub fn parent_of(r: usize) -> (usize, usize) {
    let l = r / 2;
    let s = if l % 2 == 0 { r % 2 } else { 1 - r % 2 };
    (l, s)
}

/// Filter pair used on one axis at the first level; deeper levels always use
/// the dilated `β`/`α` responses.
#[derive(Clone, Copy)]
pub struct AxisPlan<'a> {
    pub axis: Axis,
    pub first: [&'a [Complex64]; 2],
}

pub type BlockMap = BTreeMap<Vec<usize>, Array2<Complex64>>;

fn level_filters<'a>(
    fb: &'a crate::FilterBank,
    plan: &AxisPlan<'a>,
    m: usize,
) -> [&'a [Complex64]; 2] {
    if m == 0 {
        plan.first
    } else {
        [fb.dilated(m, 0), fb.dilated(m, 1)]
    }
}

/// Decompose the spectrum `xhat` down to every level in `wanted`; returns the
/// block spectra per wanted level, keyed by per-axis packet index.
pub fn analysis_tree(
    xhat: Array2<Complex64>,
    fb: &crate::FilterBank,
    plans: &[AxisPlan<'_>],
    wanted: &[usize],
) -> Vec<BlockMap> {
    let deepest = wanted.iter().copied().max().unwrap_or(0);
    let mut current: BlockMap = BTreeMap::new();
    current.insert(vec![0; plans.len()], xhat);
    let mut out: Vec<Option<BlockMap>> = vec![None; wanted.len()];
    for m in 0..deepest {
        for (pos, plan) in plans.iter().enumerate() {
            let g = level_filters(fb, plan, m);
            current = current
                .into_par_iter()
                .flat_map_iter(|(key, block)| {
                    (0..2).map(move |s| {
                        let mut k = key.clone();
                        k[pos] = child_index(key[pos], s);
                        (k, analyze_axis(&block, plan.axis, g[s]))
                    })
                    .collect::<Vec<_>>()
                })
                .collect();
        }
        for (i, &w) in wanted.iter().enumerate() {
            if w == m + 1 {
                out[i] = Some(current.clone());
            }
        }
    }
    out.into_iter().map(|b| b.unwrap_or_default()).collect()
}

/// Merge level-`level` block spectra back into the root spectrum.
pub fn synthesis_tree(
    mut current: BlockMap,
    fb: &crate::FilterBank,
    plans: &[AxisPlan<'_>],
    level: usize,
) -> Array2<Complex64> {
    for m in (0..level).rev() {
        for (pos, plan) in plans.iter().enumerate().rev() {
            let g = level_filters(fb, plan, m);
            let mut groups: BTreeMap<Vec<usize>, [Option<Array2<Complex64>>; 2]> = BTreeMap::new();
            for (key, block) in current {
                let (parent, s) = parent_of(key[pos]);
                let mut k = key;
                k[pos] = parent;
                groups.entry(k).or_default()[s] = Some(block);
            }
            current = groups
                .into_par_iter()
                .map(|(key, [a, b])| {
                    let a = a.expect("tree is complete");
                    let b = b.expect("tree is complete");
                    (key, synthesize_axis([&a, &b], plan.axis, g))
                })
                .collect();
        }
    }
    current.into_iter().next().map(|(_, v)| v).expect("non-empty tree")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn child_parent_roundtrip() {
        for l in 0..64 {
            for s in 0..2 {
                assert_eq!(parent_of(child_index(l, s)), (l, s));
            }
        }
        // Second-level order: (0,0)->0 (0,1)->1 (1,1)->2 (1,0)->3.
        assert_eq!(child_index(1, 1), 2);
        assert_eq!(child_index(1, 0), 3);
    }

    #[test]
    fn fft_roundtrip() {
        let mut a = Array2::from_shape_fn((8, 16), |(i, j)| Complex64::new(i as f64, (j * j) as f64));
        let orig = a.clone();
        fft2(&mut a);
        assert!((a[[0, 0]].re - orig.iter().map(|z| z.re).sum::<f64>()).abs() < 1e-9);
        ifft2(&mut a);
        for (x, y) in a.iter().zip(orig.iter()) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn decimation_matches_time_domain() {
        // Correlate with g then keep even samples; compare to the spectral form.
        let len = 16;
        let x: Vec<Complex64> = (0..len).map(|k| Complex64::new((k as f64 * 0.7).sin(), 0.2 * k as f64)).collect();
        let g: Vec<Complex64> = (0..len).map(|k| Complex64::new(1.0 / (1 + k) as f64, (k % 3) as f64)).collect();
        let mut direct = vec![Complex64::new(0.0, 0.0); len / 2];
        for (k, d) in direct.iter_mut().enumerate() {
            for j in 0..len {
                *d += g[(j + len - 2 * k) % len].conj() * x[j];
            }
        }
        let mut xh = Array2::from_shape_vec((1, len), x).unwrap();
        fft2(&mut xh);
        let mut gh = Array2::from_shape_vec((1, len), g).unwrap();
        fft2(&mut gh);
        let mut y = analyze_axis(&xh, Axis(1), gh.as_slice().unwrap());
        ifft2(&mut y);
        for (a, b) in y.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
