use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::contour::{winding_count, Rect, DEFAULT_CONTOUR_POINTS};
use super::locate::{locate_zeros, DEFAULT_NEWTON_TOL};
use crate::error::{NlftError, Result};
use crate::potential::Potential;
use crate::propagator::PropagationOptions;
use crate::report::DiagnosticReport;
use crate::scattering::hermite_biehler;
use crate::spectral::SquareBox;

const I: Complex64 = Complex64::new(0.0, 1.0);
const PHASE_SCAN: usize = 64;
const GOLDEN_ITERS: usize = 80;

/// `γ(u) = √2 / √sinh(2u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaScale {
    pub argument: f64,
    pub value: f64,
}

impl GammaScale {
    pub fn new(argument: f64) -> Self {
        assert!(argument > 0.0, "gamma needs a positive argument");
        Self { argument, value: 2f64.sqrt() / (2.0 * argument).sinh().sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SineFit {
    pub t: f64,
    pub s: f64,
    pub alpha: Complex64,
    pub zero_used: Complex64,
    pub gamma: GammaScale,
    pub sup_error: f64,
    /// `sup_error / sup |E|` over the same grid.
    pub relative_sup_error: f64,
}

impl SineFit {
    pub fn report(&self) -> DiagnosticReport {
        let mut r = DiagnosticReport::new("sine_fit");
        r.info("t", self.t)
            .info("s", self.s)
            .info("alpha_re", self.alpha.re)
            .info("alpha_im", self.alpha.im)
            .info("zero_re", self.zero_used.re)
            .info("zero_im", self.zero_used.im)
            .info("gamma", self.gamma.value)
            .info("sup_error", self.sup_error)
            .info("relative_sup_error", self.relative_sup_error);
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpFit {
    pub t: f64,
    pub s: f64,
    pub alpha: Complex64,
    /// `+1` for `e^{itz}`, `-1` for `e^{-itz}`.
    pub sign: i8,
    pub sup_error: f64,
    /// Error of the rejected sign.
    pub other_sup_error: f64,
}

impl ExpFit {
    pub fn report(&self) -> DiagnosticReport {
        let mut r = DiagnosticReport::new("exp_fit");
        r.info("t", self.t)
            .info("s", self.s)
            .info("alpha_re", self.alpha.re)
            .info("alpha_im", self.alpha.im)
            .info("sign", self.sign as f64)
            .info("sup_error", self.sup_error)
            .info("other_sup_error", self.other_sup_error);
        r
    }
}

fn sup_misfit(targets: &[Complex64], model: &[Complex64], phi: f64) -> f64 {
    let a = Complex64::from_polar(1.0, phi);
    targets.iter().zip(model).map(|(e, m)| (e - a * m).norm()).fold(0.0, f64::max)
}

/// Unimodular `α = e^{iφ}` minimizing `sup |target - α·model|`: coarse
/// scan seeded with `guess`, then golden-section refinement.
fn fit_phase(targets: &[Complex64], model: &[Complex64], guess: f64) -> (Complex64, f64) {
    let g = |phi: f64| sup_misfit(targets, model, phi);
    let step = 2.0 * PI / PHASE_SCAN as f64;
    let mut best = (guess, g(guess));
    for k in 0..PHASE_SCAN {
        let phi = guess + step * k as f64;
        let v = g(phi);
        if v < best.1 {
            best = (phi, v);
        }
    }
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..GOLDEN_ITERS {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    for (phi, v) in [(c, gc), (d, gd)] {
        if v < best.1 {
            best = (phi, v);
        }
    }
    (Complex64::from_polar(1.0, best.0), best.1)
}

fn e_on(f: &Potential, t: f64, grid: &[Complex64], opts: &PropagationOptions) -> Vec<Complex64> {
    grid.par_iter().map(|&z| hermite_biehler(f, t, z, false, opts).e).collect()
}

/// The lower half of `Q(s, C/t)` as a search rectangle.
fn lower_box(s: f64, c: f64, t: f64) -> Result<Rect> {
    let h = c / t;
    Rect::new(s - h, s + h, -h, 0.0)
}

/// Fits `E(t, z) ≈ α γ(t y*)/√w · sin(t(z - z*))` on a `grid_n²` grid of
/// `Q(s, C/t)`, with `z* = x* - i y*` the zero nearest to `s` (smallest
/// `|Re(z* - s)|`, then closest to the real line).
pub fn sine_fit(
    f: &Potential,
    t: f64,
    s: f64,
    c: f64,
    w: f64,
    grid_n: usize,
    opts: &PropagationOptions,
) -> Result<SineFit> {
    let zeros = locate_zeros(f, t, &lower_box(s, c, t)?, DEFAULT_NEWTON_TOL, opts)?.zeros;
    let zero = zeros
        .iter()
        .copied()
        .min_by(|a, b| (a.re - s).abs().total_cmp(&(b.re - s).abs()).then(b.im.total_cmp(&a.im)))
        .ok_or(NlftError::NoZeroInBox { s })?;
    let gamma = GammaScale::new(-t * zero.im);
    let scale = gamma.value / w.sqrt();
    let grid = SquareBox::new(s, c, t).grid(grid_n);
    let targets = e_on(f, t, &grid, opts);
    let model: Vec<Complex64> = grid.iter().map(|&z| scale * (t * (z - zero)).sin()).collect();
    let at_s = Complex64::new(s, 0.0);
    let guess = (hermite_biehler(f, t, at_s, false, opts).e / (scale * (t * (at_s - zero)).sin())).arg();
    let (alpha, sup_error) = fit_phase(&targets, &model, if guess.is_finite() { guess } else { 0.0 });
    let reference = targets.iter().map(|e| e.norm()).fold(0.0, f64::max);
    Ok(SineFit { t, s, alpha, zero_used: zero, gamma, sup_error, relative_sup_error: sup_error / reference })
}

/// Fits `E(t, z) ≈ α/√w · e^{±itz}` on a `grid_n²` grid of the zero-free
/// box `Q(s, D/t)` and keeps the better sign.
pub fn exp_fit(
    f: &Potential,
    t: f64,
    s: f64,
    d: f64,
    w: f64,
    grid_n: usize,
    opts: &PropagationOptions,
) -> Result<ExpFit> {
    let count = winding_count(f, t, &lower_box(s, d, t)?, DEFAULT_CONTOUR_POINTS, opts)?;
    if count > 0 {
        return Err(NlftError::ZeroInBox { s, count });
    }
    let grid = SquareBox::new(s, d, t).grid(grid_n);
    let targets = e_on(f, t, &grid, opts);
    let e_s = hermite_biehler(f, t, Complex64::new(s, 0.0), false, opts).e;
    let fit = |sign: f64| {
        let model: Vec<Complex64> = grid.iter().map(|&z| (sign * I * t * z).exp() / w.sqrt()).collect();
        let guess = (e_s * w.sqrt() / (sign * I * t * s).exp()).arg();
        fit_phase(&targets, &model, guess)
    };
    let (plus, minus) = (fit(1.0), fit(-1.0));
    let (sign, (alpha, sup_error), other) = if plus.1 < minus.1 { (1, plus, minus.1) } else { (-1, minus, plus.1) };
    Ok(ExpFit { t, s, alpha, sign, sup_error, other_sup_error: other })
}
