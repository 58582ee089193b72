use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{NlftError, Result};
use crate::potential::Potential;
use crate::propagator::PropagationOptions;
use crate::scattering::hermite_biehler;

/// Initial number of contour samples.
pub const DEFAULT_CONTOUR_POINTS: usize = 64;
/// Scaled `|E|` on the contour below which the contour is moved.
const CONTOUR_ZERO_TOL: f64 = 1e-10;
pub(crate) const MAX_DILATIONS: usize = 5;
/// Total contour evaluations allowed per rectangle.
const PHASE_BUDGET: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(NlftError::InvalidArgument(format!("degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]")));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.x0 && z.re <= self.x1 && z.im >= self.y0 && z.im <= self.y1
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    /// Scaled about the centre by `1 + frac` in both directions.
    pub fn dilate(&self, frac: f64) -> Self {
        let c = self.center();
        let (hw, hh) = (0.5 * self.width() * (1.0 + frac), 0.5 * self.height() * (1.0 + frac));
        Self { x0: c.re - hw, x1: c.re + hw, y0: c.im - hh, y1: c.im + hh }
    }

    /// The four cells obtained by cutting at `(xm, ym)`.
    pub fn split_at(&self, xm: f64, ym: f64) -> [Rect; 4] {
        [
            Rect { x0: self.x0, x1: xm, y0: self.y0, y1: ym },
            Rect { x0: xm, x1: self.x1, y0: self.y0, y1: ym },
            Rect { x0: self.x0, x1: xm, y0: ym, y1: self.y1 },
            Rect { x0: xm, x1: self.x1, y0: ym, y1: self.y1 },
        ]
    }

    /// Corners in counter-clockwise order starting bottom-left.
    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.x0, self.y0),
            Complex64::new(self.x1, self.y0),
            Complex64::new(self.x1, self.y1),
            Complex64::new(self.x0, self.y1),
        ]
    }
}

pub(crate) enum ContourIssue {
    ThroughZero,
    Budget,
}

/// Winding number of `E(t, ·)` around `rect` without moving the contour.
pub(crate) fn winding_raw(
    f: &Potential,
    t: f64,
    rect: &Rect,
    n_contour: usize,
    opts: &PropagationOptions,
) -> std::result::Result<i64, ContourIssue> {
    // phases only matter, so E is carried in the scaled form e^{t max(0, -Im z)} E
    let e = |z: Complex64| hermite_biehler(f, t, z, false, opts).e * (t * (-z.im).max(0.0)).exp();
    let corners = rect.corners();
    let perimeter = 2.0 * (rect.width() + rect.height());
    let mut total = 0.0;
    let mut evaluations = 0usize;
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let pieces = ((n_contour as f64 * (b - a).norm() / perimeter).ceil() as usize).max(4);
        let mut prev_z = a;
        let mut prev_e = e(a);
        for j in 1..=pieces {
            let z = a + (b - a) * (j as f64 / pieces as f64);
            let ez = e(z);
            total += unwrap_segment(&e, prev_z, prev_e, z, ez, &mut evaluations)?;
            prev_z = z;
            prev_e = ez;
        }
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Phase change of `E` from `za` to `zb`, bisecting until every step is
/// below `π/2`.
fn unwrap_segment<F: Fn(Complex64) -> Complex64>(
    e: &F,
    za: Complex64,
    ea: Complex64,
    zb: Complex64,
    eb: Complex64,
    evaluations: &mut usize,
) -> std::result::Result<f64, ContourIssue> {
    if ea.norm() <= CONTOUR_ZERO_TOL || eb.norm() <= CONTOUR_ZERO_TOL {
        return Err(ContourIssue::ThroughZero);
    }
    let step = (eb / ea).arg();
    if step.abs() < 0.5 * PI {
        return Ok(step);
    }
    *evaluations += 1;
    if *evaluations > PHASE_BUDGET || (zb - za).norm() < 1e-14 * (1.0 + za.norm()) {
        return Err(ContourIssue::Budget);
    }
    let zm = 0.5 * (za + zb);
    let em = e(zm);
    Ok(unwrap_segment(e, za, ea, zm, em, evaluations)? + unwrap_segment(e, zm, em, zb, eb, evaluations)?)
}

/// Number of zeros of `E(t, ·)` inside `rect` by the argument principle. A
/// contour through a zero is dilated by 1% and retried up to five times.
pub fn winding_count(f: &Potential, t: f64, rect: &Rect, n_contour: usize, opts: &PropagationOptions) -> Result<usize> {
    let mut r = *rect;
    for retry in 0..=MAX_DILATIONS {
        match winding_raw(f, t, &r, n_contour, opts) {
            Ok(n) => return Ok(n.max(0) as usize),
            Err(ContourIssue::Budget) => return Err(NlftError::PhaseStepTooLarge),
            Err(ContourIssue::ThroughZero) if retry < MAX_DILATIONS => r = r.dilate(0.01),
            Err(ContourIssue::ThroughZero) => {}
        }
    }
    Err(NlftError::ContourThroughZero { retries: MAX_DILATIONS })
}
