use num_complex::Complex64;
use serde::Serialize;

use super::contour::Rect;
use super::inner::{newton_zero, theta_eval};
use super::locate::DEFAULT_NEWTON_TOL;
use crate::error::{NlftError, Result};
use crate::io::{Cell, CsvTable};
use crate::potential::Potential;
use crate::propagator::PropagationOptions;

const I: Complex64 = Complex64::new(0.0, 1.0);
/// Corrector iterations allowed before the step is halved.
const CORRECTOR_MAX_ITER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoxStatus {
    #[serde(rename = "inside_T0")]
    InsideT0,
    #[serde(rename = "inside_T1")]
    InsideT1,
    #[serde(rename = "outside")]
    Outside,
}

impl BoxStatus {
    /// `inside_T1` when `z ∈ Q(s, C/t)` and `Im z < -1/t`; `inside_T0` when
    /// only the first holds.
    pub fn classify(z: Complex64, t: f64, s: f64, c: f64) -> Self {
        let h = c / t;
        if (z.re - s).abs() > h || z.im.abs() > h {
            BoxStatus::Outside
        } else if z.im < -1.0 / t {
            BoxStatus::InsideT1
        } else {
            BoxStatus::InsideT0
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BoxStatus::InsideT0 => "inside_T0",
            BoxStatus::InsideT1 => "inside_T1",
            BoxStatus::Outside => "outside",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackConfig {
    pub dt_max: f64,
    pub dt_min: f64,
    pub newton_tol: f64,
    /// The zero must stay inside this rectangle.
    pub search: Option<Rect>,
    /// `(s, C)` used for box membership.
    pub box_center: Option<(f64, f64)>,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self { dt_max: 0.05, dt_min: 1e-8, newton_tol: DEFAULT_NEWTON_TOL, search: None, box_center: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroTrajectory {
    pub times: Vec<f64>,
    pub zeros: Vec<Complex64>,
    /// `|E(t_k, z_k)|`
    pub residuals: Vec<f64>,
    pub box_status: Vec<BoxStatus>,
}

impl ZeroTrajectory {
    pub fn to_table(&self) -> CsvTable {
        let mut table = CsvTable::new(["t", "re_z", "im_z", "residual", "box_status"]);
        for k in 0..self.times.len() {
            table.push(vec![
                Cell::Num(self.times[k]),
                Cell::Num(self.zeros[k].re),
                Cell::Num(self.zeros[k].im),
                Cell::Num(self.residuals[k]),
                Cell::from(self.box_status[k].label()),
            ]);
        }
        table
    }

    pub fn node(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&x| (x - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    pub fn last(&self) -> (f64, Complex64) {
        (*self.times.last().expect("trajectory is never empty"), *self.zeros.last().expect("trajectory is never empty"))
    }
}

/// `z'` for the zero `z` of `E(t, ·)` when `f ≡ q` just after `t`: the zero
/// `z̄` of `θ` moves with `-q/θ_z(t, z̄)`.
pub fn zero_velocity(f: &Potential, t: f64, z: Complex64, q: f64, opts: &PropagationOptions) -> Result<Complex64> {
    if q == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let v = theta_eval(f, t, z.conj(), 1, opts)?;
    Ok((-q / v.theta_z.expect("order 1 requested")).conj())
}

/// Predictor-corrector continuation of a zero of `E(t, ·)` from `t0` to
/// `t1`, never stepping across a jump of `f`.
pub fn track_zero(
    f: &Potential,
    t0: f64,
    t1: f64,
    z0: Complex64,
    cfg: &TrackConfig,
    opts: &PropagationOptions,
) -> Result<ZeroTrajectory> {
    assert!(t0 <= t1, "tracking runs forward in time");
    let start = newton_zero(f, t0, z0, cfg.newton_tol, 50, opts)?;
    let status = |z: Complex64, t: f64| match cfg.box_center {
        Some((s, c)) if t > 0.0 => BoxStatus::classify(z, t, s, c),
        _ => BoxStatus::Outside,
    };
    let mut traj = ZeroTrajectory {
        times: vec![t0],
        zeros: vec![start.z],
        residuals: vec![start.residual],
        box_status: vec![status(start.z, t0)],
    };
    let (mut t, mut z) = (t0, start.z);
    let mut dt = cfg.dt_max;
    while t < t1 {
        let mut step = dt.min(t1 - t);
        if let Some(&b) = f.breakpoints(t, t + step, opts.step_budget).first() {
            step = b - t;
        }
        let q = f.evaluate(t + 0.5 * step);
        let v = zero_velocity(f, t, z, q, opts)?;
        let next = t + step;
        let next = if (t1 - next).abs() <= 1e-14 * t1.abs().max(1.0) { t1 } else { next };
        match newton_zero(f, next, z + v * step, cfg.newton_tol, CORRECTOR_MAX_ITER, opts) {
            Ok(out) => {
                if out.z.im >= 0.0 || cfg.search.is_some_and(|r| !r.contains(out.z)) {
                    return Err(NlftError::ZeroEscaped { t: next, z: out.z });
                }
                t = next;
                z = out.z;
                traj.times.push(t);
                traj.zeros.push(z);
                traj.residuals.push(out.residual);
                traj.box_status.push(status(z, t));
                dt = (2.0 * dt).min(cfg.dt_max);
            }
            Err(_) => {
                dt = 0.5 * step;
                if dt < cfg.dt_min {
                    return Err(NlftError::TrackingLost { t });
                }
            }
        }
    }
    Ok(traj)
}

/// The zero near `guess` at time `t`, polished by Newton.
fn relocate(f: &Potential, t: f64, guess: Complex64, opts: &PropagationOptions) -> Result<Complex64> {
    Ok(newton_zero(f, t, guess, 1e-14, 50, opts).or_else(|_| newton_zero(f, t, guess, DEFAULT_NEWTON_TOL, 50, opts))?.z)
}

/// Mean of the propagated (sampled) potential over `[t - h, t + h]`; the
/// piece value when the stencil sits inside one piece.
fn stencil_potential(f: &Potential, t: f64, h: f64, opts: &PropagationOptions) -> f64 {
    f.segments(t - h, t + h, opts.step_budget).iter().map(|g| g.value * g.len()).sum::<f64>() / (2.0 * h)
}

/// `|(z(t+h) - z(t-h))/2h - z'(t)|` with the zeros at `t ± h` relocated
/// from `z_t`.
pub fn velocity_residual(f: &Potential, t: f64, z_t: Complex64, h: f64, opts: &PropagationOptions) -> Result<f64> {
    let q = stencil_potential(f, t, h, opts);
    let v = zero_velocity(f, t, z_t, q, opts)?;
    let zp = relocate(f, t + h, z_t + v * h, opts)?;
    let zm = relocate(f, t - h, z_t - v * h, opts)?;
    Ok(((zp - zm) / (2.0 * h) - v).norm())
}

/// Residual of `d/dt θ_z(t, w(t)) = 2iw θ_z - f θ_zz/θ_z` along the
/// conjugated zero `w = z̄`, by central differences of step `h`.
pub fn riccati_residual(f: &Potential, t: f64, z_t: Complex64, h: f64, opts: &PropagationOptions) -> Result<f64> {
    let q = stencil_potential(f, t, h, opts);
    let v = zero_velocity(f, t, z_t, q, opts)?;
    let theta_z_at = |t: f64, z: Complex64| -> Result<Complex64> {
        Ok(theta_eval(f, t, z.conj(), 1, opts)?.theta_z.expect("order 1 requested"))
    };
    let zp = relocate(f, t + h, z_t + v * h, opts)?;
    let zm = relocate(f, t - h, z_t - v * h, opts)?;
    let fd = (theta_z_at(t + h, zp)? - theta_z_at(t - h, zm)?) / (2.0 * h);
    let w = z_t.conj();
    let at = theta_eval(f, t, w, 2, opts)?;
    let (tz, tzz) = (at.theta_z.expect("order 2"), at.theta_zz.expect("order 2"));
    Ok((fd - (2.0 * I * w * tz - q * tzz / tz)).norm())
}

/// `(ε₁, ε₂) = (t₂(x₂ - s) - t₁(x₁ - s), t₂y₂ - t₁y₁)` with `z = x - iy`.
pub fn increments(traj: &ZeroTrajectory, s: f64, t1: f64, t2: f64) -> Result<(f64, f64)> {
    let k1 = traj.node(t1).ok_or(NlftError::NodeNotOnTrajectory { t: t1 })?;
    let k2 = traj.node(t2).ok_or(NlftError::NodeNotOnTrajectory { t: t2 })?;
    let (z1, z2) = (traj.zeros[k1], traj.zeros[k2]);
    let (t1, t2) = (traj.times[k1], traj.times[k2]);
    Ok((t2 * (z2.re - s) - t1 * (z1.re - s), t2 * (-z2.im) - t1 * (-z1.im)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zeros::locate::locate_zeros;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn opts() -> PropagationOptions {
        PropagationOptions::default()
    }

    fn first_zero(f: &Potential, t: f64) -> Complex64 {
        let r = Rect::new(0.5, 6.0, -3.0, -0.01).unwrap();
        locate_zeros(f, t, &r, DEFAULT_NEWTON_TOL, &opts()).unwrap().zeros[0]
    }

    #[test]
    fn frozen_when_potential_vanishes() {
        let f = Potential::constant(1.0).truncate(1.0);
        let z0 = first_zero(&f, 1.0);
        let traj = track_zero(&f, 1.0, 3.0, z0, &TrackConfig::default(), &opts()).unwrap();
        let (_, z1) = traj.last();
        assert!((z1 - traj.zeros[0]).norm() < 1e-12);
    }

    #[test]
    fn tracked_endpoint_matches_relocation() {
        let f = Potential::constant(1.0).truncate(2.0);
        let z0 = first_zero(&f, 1.0);
        let traj = track_zero(&f, 1.0, 2.0, z0, &TrackConfig::default(), &opts()).unwrap();
        let (t_end, z_end) = traj.last();
        assert_eq!(t_end, 2.0);
        let r = Rect::new(z_end.re - 0.3, z_end.re + 0.3, z_end.im - 0.3, (z_end.im + 0.3).min(-1e-3)).unwrap();
        let located = locate_zeros(&f, 2.0, &r, DEFAULT_NEWTON_TOL, &opts()).unwrap();
        assert_eq!(located.zeros.len(), 1);
        assert!((located.zeros[0] - z_end).norm() < 1e-9);
        assert!(traj.residuals.iter().all(|&r| r < DEFAULT_NEWTON_TOL));
        assert!(traj.zeros.iter().all(|z| z.im < 0.0));
    }

    #[test]
    fn stops_at_jumps() {
        let f = Potential::piecewise_constant(vec![0.0, 1.23, 3.0], vec![1.0, 0.5]).unwrap();
        let z0 = first_zero(&f, 1.0);
        let cfg = TrackConfig { dt_max: 0.1, ..TrackConfig::default() };
        let traj = track_zero(&f, 1.0, 2.0, z0, &cfg, &opts()).unwrap();
        assert!(traj.node(1.23).is_some());
    }

    #[test]
    fn velocity_law_is_second_order() {
        let f = Potential::constant(1.0);
        let z = first_zero(&f, 1.0);
        let r: Vec<f64> =
            [0.02, 0.01, 0.005].iter().map(|&h| velocity_residual(&f, 1.0, z, h, &opts()).unwrap()).collect();
        assert!(r[0] / r[1] > 3.5 && r[1] / r[2] > 3.5, "{r:?}");
    }

    #[test]
    fn riccati_along_trajectory() {
        let f = Potential::constant(1.0);
        let z = first_zero(&f, 1.0);
        let r1 = riccati_residual(&f, 1.0, z, 1e-2, &opts()).unwrap();
        let r2 = riccati_residual(&f, 1.0, z, 5e-3, &opts()).unwrap();
        assert!(r2 < 1e-3 && r2 < r1, "{r1} {r2}");
    }

    #[test]
    fn increments_examples() {
        let z = c(0.8, -0.3);
        let traj = ZeroTrajectory {
            times: vec![1.0, 2.0],
            zeros: vec![z, z],
            residuals: vec![0.0, 0.0],
            box_status: vec![BoxStatus::Outside; 2],
        };
        assert_eq!(increments(&traj, 0.5, 1.0, 1.0).unwrap(), (0.0, 0.0));
        let (e1, e2) = increments(&traj, 0.5, 1.0, 2.0).unwrap();
        assert!((e1 - 0.3).abs() < 1e-15 && (e2 - 0.3).abs() < 1e-15);
        assert!(matches!(increments(&traj, 0.5, 1.5, 2.0), Err(NlftError::NodeNotOnTrajectory { .. })));
    }

    #[test]
    fn box_classification() {
        assert_eq!(BoxStatus::classify(c(1.0, -0.05), 10.0, 1.0, 2.0), BoxStatus::InsideT0);
        assert_eq!(BoxStatus::classify(c(1.0, -0.15), 10.0, 1.0, 2.0), BoxStatus::InsideT1);
        assert_eq!(BoxStatus::classify(c(1.5, -0.15), 10.0, 1.0, 2.0), BoxStatus::Outside);
    }
}
