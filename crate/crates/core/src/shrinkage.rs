//! Bivariate shrinkage, the decreasing threshold schedule and the select/stop
//! controller shared by both inpainting methods.

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::child_index;
use crate::transform2d::CoefficientTree2D;
use crate::{ComplexImage, Sign};

pub const LAMBDA_MAX: f64 = 512.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSchedule {
    pub sigma: f64,
    pub rho: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub lambda_mid: f64,
    pub r1: f64,
    pub r2: f64,
    pub big_r1: usize,
    pub big_r2: usize,
    /// `Λ1[1..=R1]`, stored from index 0.
    pub lambda1: Vec<f64>,
    /// `Λ2[1..=R2]`, stored from index 0.
    pub lambda2: Vec<f64>,
}

/// Build the two decreasing threshold sequences. Out-of-range inputs are
/// clamped: `sigma` to `>= 0`, `rho` to `[0, 1]`, `R1`/`R2` to `>= 2`.
pub fn make_schedule(sigma: f64, rho: f64, big_r1: usize, big_r2: usize) -> ThresholdSchedule {
    let sigma = if sigma.is_finite() { sigma.max(0.0) } else { 0.0 };
    let rho = if rho.is_finite() { rho.clamp(0.0, 1.0) } else { 0.0 };
    let (big_r1, big_r2) = (big_r1.max(2), big_r2.max(2));
    let lambda_min = (sigma * (1.0 - rho * rho / 2.0)).max(1.0);
    let lambda_mid = (2.0 * lambda_min + 10.0).min(20.0);
    let r1 = lambda_mid / LAMBDA_MAX;
    let r2 = lambda_min / lambda_mid;
    let s2 = std::f64::consts::SQRT_2;
    let lambda1 = (1..=big_r1)
        .map(|j| {
            let e = (j as f64 - big_r1 as f64) / (big_r1 as f64 - 1.0);
            s2 * r1.powf(e) * lambda_mid
        })
        .collect();
    let lambda2 = (1..=big_r2)
        .map(|j| {
            let e = (j as f64 - big_r2 as f64) / big_r2 as f64;
            s2 * r2.powf(e) * lambda_min
        })
        .collect();
    ThresholdSchedule {
        sigma,
        rho,
        lambda_max: LAMBDA_MAX,
        lambda_min,
        lambda_mid,
        r1,
        r2,
        big_r1,
        big_r2,
        lambda1,
        lambda2,
    }
}

impl ThresholdSchedule {
    /// Threshold for the 1-based schedule index `nu` in `1..=R1+R2`.
    pub fn lambda(&self, nu: usize) -> f64 {
        assert!((1..=self.len()).contains(&nu), "schedule index {nu} out of range");
        if nu <= self.big_r1 {
            self.lambda1[nu - 1]
        } else {
            self.lambda2[nu - self.big_r1 - 1]
        }
    }

    pub fn len(&self) -> usize {
        self.big_r1 + self.big_r2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// One `nu=<i> lambda=<v>` line per schedule step.
    pub fn log_lines(&self) -> Vec<String> {
        (1..=self.len()).map(|nu| format!("nu={nu} lambda={:.6}", self.lambda(nu))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopLimits {
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
    pub tol1: f64,
    pub tol2: f64,
}

impl Default for StopLimits {
    fn default() -> Self {
        Self { l1: 15, l2: 10, l3: 10, tol1: 0.05, tol2: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopState {
    pub nu: usize,
    pub k_nu: usize,
    pub limits: StopLimits,
    pub last_delta: f64,
}

impl StopState {
    pub fn new(limits: StopLimits) -> Self {
        Self { nu: 1, k_nu: 0, limits, last_delta: f64::INFINITY }
    }

    /// Upper bound on the number of `select_stop` calls before `Stop`.
    pub fn step_bound(&self, schedule: &ThresholdSchedule) -> usize {
        let l = &self.limits;
        schedule.big_r1 * l.l1 + schedule.big_r2 * l.l2 + l.l3 + schedule.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopDecision {
    Continue(f64),
    Stop,
}

/// Advance the controller by one iteration given the latest change `delta`.
///
/// The iteration counter is bumped first; then, for the current phase, the
/// index `nu` advances (and the counter resets) once the counter exceeds the
/// phase's limit or `delta` drops below its tolerance. In the last step the
/// same test stops the iteration.
pub fn select_stop(state: &mut StopState, delta: f64, schedule: &ThresholdSchedule) -> StopDecision {
    let l = state.limits;
    let (r1, total) = (schedule.big_r1, schedule.len());
    state.k_nu += 1;
    state.last_delta = delta;
    if state.nu < r1 {
        if state.k_nu > l.l1 || delta < l.tol1 {
            state.nu += 1;
            state.k_nu = 0;
        }
    } else if state.nu < total {
        if state.k_nu > l.l2 || delta < l.tol2 {
            state.nu += 1;
            state.k_nu = 0;
        }
    } else if state.k_nu > l.l3 || delta < l.tol2 {
        return StopDecision::Stop;
    }
    StopDecision::Continue(schedule.lambda(state.nu))
}

/// Local mean of `|c|²` over the `2W × 2W` window `[k−W, k+W−1] × [n−W, n+W−1]`,
/// with periodic wrap.
pub fn averaged_variance(c: &ComplexImage, w: usize) -> Result<Array2<f64>> {
    let (rows, cols) = c.dim();
    if w == 0 || 2 * w > rows || 2 * w > cols {
        return Err(Error::InvalidParameter(format!(
            "window span {w} does not fit a {rows}x{cols} block"
        )));
    }
    let sq = c.mapv(|z| z.norm_sqr());
    // Separable box sums: along rows, then along columns.
    let wi = w as isize;
    let boxed = |src: &Array2<f64>, along_rows: bool| -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |(k, n)| {
            (-wi..wi)
                .map(|d| {
                    if along_rows {
                        src[[(k as isize + d).rem_euclid(rows as isize) as usize, n]]
                    } else {
                        src[[k, (n as isize + d).rem_euclid(cols as isize) as usize]]
                    }
                })
                .sum()
        })
    };
    let out = boxed(&boxed(&sq, true), false);
    Ok(out / (4 * w * w) as f64)
}

fn soft(c: Complex64, t: f64) -> Complex64 {
    let mag = c.norm();
    if mag > t {
        c * ((mag - t) / mag)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Bivariate shrinkage of `child` with the coarser `parent` block (half the
/// side), window span `w` and noise level `lambda`.
pub fn bsa_apply(child: &ComplexImage, parent: &ComplexImage, w: usize, lambda: f64) -> Result<ComplexImage> {
    let (rows, cols) = child.dim();
    if parent.dim() != (rows / 2, cols / 2) || rows % 2 != 0 || cols % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "parent block {:?} does not match child {:?}",
            parent.dim(),
            child.dim()
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let var = averaged_variance(child, w)?;
    let lam2 = lambda * lambda;
    let k3 = 3f64.sqrt() * lam2;
    let mut out = Array2::zeros((rows, cols));
    Zip::indexed(&mut out).and(child).and(&var).for_each(|(k, n), o, &c, &v| {
        let sig = (v - lam2).max(0.0).sqrt();
        let mag = c.norm();
        if sig == 0.0 || mag == 0.0 {
            return;
        }
        let ratio = parent[[k / 2, n / 2]].norm() / mag;
        let t = k3 / (sig * (1.0 + ratio * ratio).sqrt());
        *o = soft(c, t);
    });
    Ok(out)
}

/// Index in a level-`m+1` tree of the block holding the parents of block
/// `(j, l)` at level `m`: the lowpass children along both axes.
pub fn parent_block(level: usize, j: usize, l: usize) -> usize {
    child_index(j, 0) * (1 << (level + 1)) + child_index(l, 0)
}

/// Apply [`bsa_apply`] to every block of both trees of `child`, taking parents
/// from the next level `parent`.
pub fn bsa_tree(
    child: &CoefficientTree2D,
    parent: &CoefficientTree2D,
    w: usize,
    lambda: f64,
) -> Result<CoefficientTree2D> {
    if parent.level != child.level + 1 || parent.side != child.side {
        return Err(Error::InvalidParameter(format!(
            "parent tree at level {} does not follow level {}",
            parent.level, child.level
        )));
    }
    let per_side = child.blocks_per_side();
    let shrink = |sign: Sign| -> Result<Vec<ComplexImage>> {
        child
            .blocks(sign)
            .par_iter()
            .enumerate()
            .map(|(i, block)| {
                let p = &parent.blocks(sign)[parent_block(child.level, i / per_side, i % per_side)];
                bsa_apply(block, p, w, lambda)
            })
            .collect()
    };
    Ok(CoefficientTree2D {
        side: child.side,
        level: child.level,
        plus: shrink(Sign::Plus)?,
        minus: shrink(Sign::Minus)?,
    })
}
