use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::contour::{winding_raw, ContourIssue, Rect, DEFAULT_CONTOUR_POINTS, MAX_DILATIONS};
use super::inner::newton_zero;
use crate::error::{NlftError, Result};
use crate::potential::Potential;
use crate::propagator::PropagationOptions;

/// Convergence threshold on `|E|` for located zeros.
pub const DEFAULT_NEWTON_TOL: f64 = 1e-11;
const NEWTON_MAX_ITER: usize = 60;
/// Cells narrower than this fraction of the initial rectangle are not split.
const MIN_CELL_FRACTION: f64 = 1e-7;
const SPLIT_RETRIES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Anomaly {
    /// Winding stayed at two or more below the minimum cell size.
    MultiplicityAboveOne { cell: Rect, count: usize },
    /// Newton did not converge inside a single-zero cell.
    Unresolved { cell: Rect },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocatedZeros {
    /// Sorted by real part, then imaginary part.
    pub zeros: Vec<Complex64>,
    /// Winding count of the whole rectangle.
    pub count: usize,
    pub anomalies: Vec<Anomaly>,
}

struct Ctx<'a> {
    f: &'a Potential,
    t: f64,
    tol: f64,
    min_size: f64,
    opts: &'a PropagationOptions,
}

fn cell_count(ctx: &Ctx, cell: &Rect) -> std::result::Result<usize, ContourIssue> {
    winding_raw(ctx.f, ctx.t, cell, 32, ctx.opts).map(|n| n.max(0) as usize)
}

/// Zeros in a cell known to hold `count` of them.
fn resolve(ctx: &Ctx, cell: Rect, count: usize) -> Result<(Vec<Complex64>, Vec<Anomaly>)> {
    if count == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    if count == 1 {
        if let Ok(out) = newton_zero(ctx.f, ctx.t, cell.center(), ctx.tol, NEWTON_MAX_ITER, ctx.opts) {
            if cell.contains(out.z) {
                return Ok((vec![out.z], Vec::new()));
            }
        }
    }
    if cell.width().max(cell.height()) < ctx.min_size {
        let anomaly =
            if count == 1 { Anomaly::Unresolved { cell } } else { Anomaly::MultiplicityAboveOne { cell, count } };
        return Ok((Vec::new(), vec![anomaly]));
    }
    // quadrisect, nudging the cut when a sub-contour runs through a zero
    for attempt in 0..=SPLIT_RETRIES {
        let shift = 0.5 + 0.0731 * attempt as f64 * if attempt % 2 == 0 { 1.0 } else { -1.0 };
        let xm = cell.x0 + shift * cell.width();
        let ym = cell.y0 + (1.0 - shift) * cell.height();
        let children = cell.split_at(xm, ym);
        let counts: Vec<_> = children.par_iter().map(|c| cell_count(ctx, c)).collect();
        if counts.iter().any(|c| c.is_err()) {
            continue;
        }
        let counts: Vec<usize> = counts.into_iter().map(|c| c.unwrap_or(0)).collect();
        let parts: Vec<Result<(Vec<Complex64>, Vec<Anomaly>)>> =
            children.par_iter().zip(&counts).map(|(c, &n)| resolve(ctx, *c, n)).collect();
        let mut zeros = Vec::new();
        let mut anomalies = Vec::new();
        for p in parts {
            let (z, a) = p?;
            zeros.extend(z);
            anomalies.extend(a);
        }
        return Ok((zeros, anomalies));
    }
    Err(NlftError::ContourThroughZero { retries: SPLIT_RETRIES })
}

/// All zeros of `E(t, ·)` in `rect`: quadrisection until each cell winds at
/// most once, then Newton with the propagated `E_z`.
pub fn locate_zeros(f: &Potential, t: f64, rect: &Rect, tol: f64, opts: &PropagationOptions) -> Result<LocatedZeros> {
    let ctx = Ctx { f, t, tol, min_size: MIN_CELL_FRACTION * rect.width().max(rect.height()), opts };
    let mut cell = *rect;
    let mut count = None;
    for _ in 0..=MAX_DILATIONS {
        match winding_raw(f, t, &cell, DEFAULT_CONTOUR_POINTS, opts) {
            Ok(n) => {
                count = Some(n.max(0) as usize);
                break;
            }
            Err(ContourIssue::Budget) => return Err(NlftError::PhaseStepTooLarge),
            Err(ContourIssue::ThroughZero) => cell = cell.dilate(0.01),
        }
    }
    let count = count.ok_or(NlftError::ContourThroughZero { retries: MAX_DILATIONS })?;
    let (mut zeros, anomalies) = resolve(&ctx, cell, count)?;
    zeros.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    zeros.dedup_by(|a, b| (*a - *b).norm() <= 10.0 * tol);
    Ok(LocatedZeros { zeros, count, anomalies })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> PropagationOptions {
        PropagationOptions::default()
    }

    #[test]
    fn free_case_is_empty() {
        let r = Rect::new(-4.0, 4.0, -3.0, -0.01).unwrap();
        let z = locate_zeros(&Potential::zero(), 2.0, &r, DEFAULT_NEWTON_TOL, &opts()).unwrap();
        assert!(z.zeros.is_empty() && z.count == 0);
    }

    #[test]
    fn constant_potential_zeros_satisfy_closed_form() {
        let r = Rect::new(-4.0, 4.0, -3.0, -0.01).unwrap();
        let found = locate_zeros(&Potential::constant(1.0), 1.0, &r, DEFAULT_NEWTON_TOL, &opts()).unwrap();
        assert_eq!(found.zeros.len(), found.count);
        assert!(found.count >= 2);
        assert!(found.anomalies.is_empty());
        for z in &found.zeros {
            let w = (1.0 - z * z).sqrt();
            let e = w.cosh() + (1.0 - Complex64::i() * z) * w.sinh() / w;
            assert!(e.norm() < 1e-11, "{z}: {e}");
            assert!(z.im < 0.0 && r.contains(*z));
        }
    }
}
