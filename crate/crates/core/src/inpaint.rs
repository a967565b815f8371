//! The two restoration methods: iterative bivariate-shrinkage thresholding
//! (M1) and its split Bregman variant (M2).
//!
//! Both work on a mirror-extended copy of the input whose side is a power of
//! two large enough for the deepest transform level, and crop at the end.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shrinkage::{bsa_tree, make_schedule, select_stop, StopDecision, StopLimits, StopState};
use crate::spline_filters::{MAX_ORDER, MIN_ORDER};
use crate::transform2d::{qwp_forward_2d_levels, qwp_inverse_2d, CoefficientTree2D};
use crate::{FilterBank, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    M1,
    M2,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(Method::M1),
            "m2" => Ok(Method::M2),
            _ => Err(Error::InvalidParameter(format!("unknown method {s:?}, expected m1 or m2"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::M1 => "m1",
            Method::M2 => "m2",
        })
    }
}

/// Observed data: `degraded = mask · (clean + noise)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedImage {
    pub degraded: Image,
    pub mask: Image,
    pub sigma: f64,
}

impl MaskedImage {
    pub fn new(degraded: Image, mask: Image, sigma: f64) -> Result<Self> {
        if degraded.dim() != mask.dim() {
            return Err(Error::InvalidParameter(format!(
                "mask {:?} does not match image {:?}",
                mask.dim(),
                degraded.dim()
            )));
        }
        if mask.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidParameter("mask entries must be 0 or 1".into()));
        }
        if !(sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be non-negative, got {sigma}")));
        }
        let (r, c) = degraded.dim();
        if r == 0 || c == 0 {
            return Err(Error::InvalidParameter("empty image".into()));
        }
        Ok(Self { degraded, mask, sigma })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InpaintConfig {
    /// Spline order of the filter bank.
    pub order: usize,
    /// Consecutive fusion levels, ascending.
    pub levels: Vec<usize>,
    /// Level used only as a source of parents; `max(levels) + 1`.
    pub parent_level: usize,
    /// Fusion weight per level.
    pub weights: Vec<f64>,
    /// Window span per level.
    pub windows: Vec<usize>,
    /// Extension margin; `None` means an eighth of the larger side.
    pub margin: Option<usize>,
    pub mu: f64,
    pub r1: usize,
    pub r2: usize,
    pub tol1: f64,
    pub tol2: f64,
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
    /// Divide the iterate change by the padded side before comparing with
    /// the tolerances.
    pub normalized_delta: bool,
    /// Solve the data step with conjugate gradients instead of the direct
    /// division.
    pub use_cg: bool,
}

impl Default for InpaintConfig {
    fn default() -> Self {
        let l = StopLimits::default();
        Self {
            order: 5,
            levels: vec![3, 4],
            parent_level: 5,
            weights: vec![1.0, 1.0],
            windows: vec![3, 2],
            margin: None,
            mu: 1.0,
            r1: 5,
            r2: 8,
            tol1: l.tol1,
            tol2: l.tol2,
            l1: l.l1,
            l2: l.l2,
            l3: l.l3,
            normalized_delta: false,
            use_cg: false,
        }
    }
}

impl InpaintConfig {
    pub const KEYS: &'static [&'static str] = &[
        "order",
        "levels",
        "parent_level",
        "weights",
        "windows",
        "margin",
        "mu",
        "r1",
        "r2",
        "tol1",
        "tol2",
        "l1",
        "l2",
        "l3",
        "normalized_delta",
        "use_cg",
    ];

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(MIN_ORDER..=MAX_ORDER).contains(&self.order) {
            return bad(format!("order must be in {MIN_ORDER}..={MAX_ORDER}, got {}", self.order));
        }
        if self.levels.is_empty() || self.levels[0] == 0 {
            return bad("levels must be a non-empty list of positive levels".into());
        }
        if self.levels.windows(2).any(|w| w[1] != w[0] + 1) {
            return bad(format!("levels must be consecutive and ascending, got {:?}", self.levels));
        }
        let deepest = *self.levels.last().unwrap();
        if self.parent_level != deepest + 1 {
            return bad(format!("parent_level must be {}, got {}", deepest + 1, self.parent_level));
        }
        if self.weights.len() != self.levels.len() || self.weights.iter().any(|&w| !(w > 0.0)) {
            return bad("weights must be positive, one per level".into());
        }
        if self.windows.len() != self.levels.len() || self.windows.contains(&0) {
            return bad("windows must be positive, one per level".into());
        }
        if !(self.mu > 0.0) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if self.r1 < 2 || self.r2 < 2 {
            return bad("r1 and r2 must be at least 2".into());
        }
        if !(self.tol1 >= 0.0 && self.tol2 >= 0.0) {
            return bad("tolerances must be non-negative".into());
        }
        Ok(())
    }

    pub fn limits(&self) -> StopLimits {
        StopLimits { l1: self.l1, l2: self.l2, l3: self.l3, tol1: self.tol1, tol2: self.tol2 }
    }

    /// All transform levels computed per iteration.
    pub fn all_levels(&self) -> Vec<usize> {
        let mut v = self.levels.clone();
        v.push(self.parent_level);
        v
    }

    pub fn margin_for(&self, rows: usize, cols: usize) -> usize {
        self.margin.unwrap_or(rows.max(cols) / 8)
    }

    /// Side of the extended image for an input of `rows × cols`.
    pub fn padded_side(&self, rows: usize, cols: usize) -> usize {
        let t = self.margin_for(rows, cols);
        (rows.max(cols) + 2 * t).next_power_of_two().max(8 << self.parent_level)
    }

    /// Filter bank matching the extended size of `mi`.
    pub fn filter_bank_for(&self, mi: &MaskedImage) -> Result<FilterBank> {
        self.validate()?;
        let (r, c) = mi.degraded.dim();
        FilterBank::new(self.order, self.padded_side(r, c), self.parent_level)
    }
}

/// Extended image and mask plus the window holding the original pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Extended {
    pub y: Image,
    pub theta: Image,
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Extended {
    pub fn crop(&self, x: &Image) -> Image {
        x.slice(ndarray::s![self.row0..self.row0 + self.rows, self.col0..self.col0 + self.cols])
            .to_owned()
    }
}

fn reflect(i: isize, n: usize) -> usize {
    let n2 = 2 * n as isize;
    let s = i.rem_euclid(n2) as usize;
    if s < n {
        s
    } else {
        2 * n - 1 - s
    }
}

/// Mirror-extend `a` into a `side × side` array with the original placed at
/// `(t, t)`; reflection is about pixel edges and repeats with period `2n`.
pub fn mirror_extend(a: &Image, t: usize, side: usize) -> Image {
    let (r, c) = a.dim();
    Array2::from_shape_fn((side, side), |(i, j)| {
        a[[reflect(i as isize - t as isize, r), reflect(j as isize - t as isize, c)]]
    })
}

/// Mirror-extend image and mask by margin `t`, then further to the next
/// admissible power-of-two side (see [`InpaintConfig::padded_side`]).
pub fn extend_symmetric(mi: &MaskedImage, t: usize, side: usize) -> Result<Extended> {
    let (rows, cols) = mi.degraded.dim();
    if side < rows.max(cols) + 2 * t || !side.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "side {side} cannot hold a {rows}x{cols} image with margin {t}"
        )));
    }
    Ok(Extended {
        y: mirror_extend(&mi.degraded, t, side),
        theta: mirror_extend(&mi.mask, t, side),
        row0: t,
        col0: t,
        rows,
        cols,
    })
}

/// `Σ β_m X_m / Σ β_m`.
pub fn fuse_levels(images: &[Image], weights: &[f64]) -> Result<Image> {
    if images.is_empty() || images.len() != weights.len() {
        return Err(Error::InvalidParameter(format!(
            "need one weight per image, got {} images and {} weights",
            images.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidParameter("fusion weights must be positive".into()));
    }
    let dim = images[0].dim();
    if images.iter().any(|x| x.dim() != dim) {
        return Err(Error::InvalidParameter("fused images differ in size".into()));
    }
    if images.len() == 1 {
        return Ok(images[0].clone());
    }
    let total: f64 = weights.iter().sum();
    let mut out = Image::zeros(dim);
    for (x, &w) in images.iter().zip(weights) {
        out.scaled_add(w, x);
    }
    Ok(out / total)
}

/// `Θ·Y + (1 − Θ)·X`: observed pixels from `y`, the rest from `x`.
pub fn merge_known(y: &Image, theta: &Image, x: &Image) -> Image {
    let mut out = x.clone();
    Zip::from(&mut out).and(y).and(theta).for_each(|o, &yv, &t| {
        if t != 0.0 {
            *o = t * yv + (1.0 - t) * *o;
        }
    });
    out
}

fn check_data_step(y: &Image, theta: &Image, mu: f64, xprev: &Image) -> Result<()> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    if y.dim() != theta.dim() || y.dim() != xprev.dim() {
        return Err(Error::InvalidParameter("data step arrays differ in size".into()));
    }
    Ok(())
}

/// Solve `(Θ + μ)·X = Y + μ·xprev` where `Θ` acts as a diagonal operator.
pub fn solve_data_step(y: &Image, theta: &Image, mu: f64, xprev: &Image) -> Result<Image> {
    check_data_step(y, theta, mu, xprev)?;
    let mut out = Image::zeros(y.dim());
    Zip::from(&mut out).and(y).and(theta).and(xprev).for_each(|o, &yv, &t, &xp| {
        *o = (yv + mu * xp) / (t + mu);
    });
    Ok(out)
}

/// Same system as [`solve_data_step`], solved by conjugate gradients.
pub fn solve_data_step_cg(y: &Image, theta: &Image, mu: f64, xprev: &Image) -> Result<Image> {
    check_data_step(y, theta, mu, xprev)?;
    let apply = |v: &Image| -> Image { v * theta + &(v * mu) };
    let dot = |a: &Image, b: &Image| -> f64 { a.iter().zip(b).map(|(p, q)| p * q).sum() };
    let rhs = y + &(xprev * mu);
    let mut x = xprev.clone();
    let mut r = &rhs - &apply(&x);
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let stop = 1e-30 * dot(&rhs, &rhs).max(f64::MIN_POSITIVE);
    for _ in 0..(4 * y.len()).clamp(8, 200) {
        if rr <= stop {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        let rr_new = dot(&r, &r);
        p = &r + &(&p * (rr_new / rr));
        rr = rr_new;
    }
    Ok(x)
}

/// One line of the progress log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationInfo {
    pub k: usize,
    pub nu: usize,
    pub lambda: f64,
    pub delta: f64,
}

impl fmt::Display for IterationInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k={} nu={} lambda={:.4} delta={:.6}", self.k, self.nu, self.lambda, self.delta)
    }
}

#[derive(Debug, Clone)]
pub struct InpaintOutcome {
    pub image: Image,
    pub iterations: Vec<IterationInfo>,
    /// Number of select/stop calls, including the one that stopped.
    pub steps: usize,
    pub step_bound: usize,
}

fn difference_norm(a: &Image, b: &Image, normalize: bool) -> f64 {
    let d = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    if normalize {
        d / a.nrows() as f64
    } else {
        d
    }
}

struct Runner<'a> {
    cfg: &'a InpaintConfig,
    fb: &'a FilterBank,
    ext: Extended,
    schedule: crate::shrinkage::ThresholdSchedule,
    state: StopState,
    steps: usize,
    iterations: Vec<IterationInfo>,
}

impl<'a> Runner<'a> {
    fn new(mi: &MaskedImage, cfg: &'a InpaintConfig, fb: &'a FilterBank) -> Result<Self> {
        cfg.validate()?;
        let (r, c) = mi.degraded.dim();
        let side = cfg.padded_side(r, c);
        if fb.len != side || fb.order != cfg.order || fb.max_level < cfg.parent_level {
            return Err(Error::InvalidParameter(format!(
                "filter bank (order {}, length {}, {} levels) does not match the run (order {}, length {side}, {} levels)",
                fb.order, fb.len, fb.max_level, cfg.order, cfg.parent_level
            )));
        }
        let ext = extend_symmetric(mi, cfg.margin_for(r, c), side)?;
        let rho = ext.theta.mean().unwrap_or(0.0);
        let schedule = make_schedule(mi.sigma, rho, cfg.r1, cfg.r2);
        for line in schedule.log_lines() {
            log::debug!("schedule {line}");
        }
        Ok(Self {
            cfg,
            fb,
            ext,
            schedule,
            state: StopState::new(cfg.limits()),
            steps: 0,
            iterations: Vec::new(),
        })
    }

    /// Feed the change between iterates to the controller; `None` means stop.
    fn step(&mut self, delta: f64) -> Option<f64> {
        self.steps += 1;
        match select_stop(&mut self.state, delta, &self.schedule) {
            StopDecision::Stop => None,
            StopDecision::Continue(lambda) => {
                let info = IterationInfo { k: self.steps, nu: self.state.nu, lambda, delta };
                log::info!("{info}");
                self.iterations.push(info);
                Some(lambda)
            }
        }
    }

    fn fuse(&self, trees: &[CoefficientTree2D]) -> Result<Image> {
        let images = trees.iter().map(|t| qwp_inverse_2d(t, self.fb)).collect::<Result<Vec<_>>>()?;
        fuse_levels(&images, &self.cfg.weights)
    }

    fn shrink(&self, trees: &[CoefficientTree2D], lambda: f64) -> Result<Vec<CoefficientTree2D>> {
        (0..self.cfg.levels.len())
            .map(|i| bsa_tree(&trees[i], &trees[i + 1], self.cfg.windows[i], lambda))
            .collect()
    }

    fn finish(self, x: &Image) -> InpaintOutcome {
        InpaintOutcome {
            image: self.ext.crop(x),
            iterations: self.iterations,
            steps: self.steps,
            step_bound: self.state.step_bound(&self.schedule),
        }
    }
}

type Observer<'o> = &'o mut dyn FnMut(&IterationInfo, &Image);

fn run_m1(mi: &MaskedImage, cfg: &InpaintConfig, fb: &FilterBank, observer: Observer<'_>) -> Result<InpaintOutcome> {
    let mut run = Runner::new(mi, cfg, fb)?;
    let side = run.ext.y.nrows();
    let levels = cfg.all_levels();
    let mut x = Image::zeros((side, side));
    let mut delta = f64::INFINITY;
    loop {
        let yk = merge_known(&run.ext.y, &run.ext.theta, &x);
        let trees = qwp_forward_2d_levels(&yk, fb, &levels)?;
        let Some(lambda) = run.step(delta) else { break };
        let next = run.fuse(&run.shrink(&trees, lambda)?)?;
        delta = difference_norm(&next, &x, cfg.normalized_delta);
        x = next;
        observer(run.iterations.last().unwrap(), &x);
    }
    Ok(run.finish(&x))
}

fn run_m2(mi: &MaskedImage, cfg: &InpaintConfig, fb: &FilterBank, observer: Observer<'_>) -> Result<InpaintOutcome> {
    let mut run = Runner::new(mi, cfg, fb)?;
    let side = run.ext.y.nrows();
    let levels = cfg.all_levels();
    let zero_trees = |ls: &[usize]| ls.iter().map(|&m| CoefficientTree2D::zeros(side, m)).collect::<Vec<_>>();
    let mut d = zero_trees(&cfg.levels);
    let mut b = zero_trees(&cfg.levels);
    let mut x_prev = Image::zeros((side, side));
    let mut first = true;
    loop {
        let x_aux = if first {
            Image::zeros((side, side))
        } else {
            let diff: Vec<_> = d.iter().zip(&b).map(|(dm, bm)| dm.zip_with(bm, |p, q| p - q)).collect();
            run.fuse(&diff)?
        };
        let xk = if cfg.use_cg {
            solve_data_step_cg(&run.ext.y, &run.ext.theta, cfg.mu, &x_aux)?
        } else {
            solve_data_step(&run.ext.y, &run.ext.theta, cfg.mu, &x_aux)?
        };
        let delta = if first { f64::INFINITY } else { difference_norm(&xk, &x_prev, cfg.normalized_delta) };
        first = false;
        x_prev = xk;
        let Some(lambda) = run.step(delta) else { break };
        let mut z = qwp_forward_2d_levels(&x_prev, fb, &levels)?;
        for (zm, bm) in z.iter_mut().zip(&b) {
            *zm = zm.zip_with(bm, |p, q| p + q);
        }
        d = run.shrink(&z, lambda)?;
        for ((bm, zm), dm) in b.iter_mut().zip(&z).zip(&d) {
            *bm = zm.zip_with(dm, |p, q| p - q);
        }
        observer(run.iterations.last().unwrap(), &x_prev);
    }
    Ok(run.finish(&x_prev))
}

/// Run either method, reporting each iteration (and its current padded
/// iterate) to `observer`.
pub fn inpaint_with(
    method: Method,
    mi: &MaskedImage,
    cfg: &InpaintConfig,
    fb: &FilterBank,
    observer: &mut dyn FnMut(&IterationInfo, &Image),
) -> Result<InpaintOutcome> {
    match method {
        Method::M1 => run_m1(mi, cfg, fb, observer),
        Method::M2 => run_m2(mi, cfg, fb, observer),
    }
}

pub fn inpaint(method: Method, mi: &MaskedImage, cfg: &InpaintConfig, fb: &FilterBank) -> Result<InpaintOutcome> {
    inpaint_with(method, mi, cfg, fb, &mut |_, _| {})
}

pub fn m1_inpaint(mi: &MaskedImage, cfg: &InpaintConfig, fb: &FilterBank) -> Result<Image> {
    Ok(inpaint(Method::M1, mi, cfg, fb)?.image)
}

pub fn m2_inpaint(mi: &MaskedImage, cfg: &InpaintConfig, fb: &FilterBank) -> Result<Image> {
    Ok(inpaint(Method::M2, mi, cfg, fb)?.image)
}
