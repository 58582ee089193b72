use num_complex::Complex64;
use serde::Serialize;

use super::inner::theta_eval;
use crate::error::{NlftError, Result};
use crate::potential::Potential;
use crate::propagator::PropagationOptions;

/// Upper bound on the detection parameter `ε`.
pub const DEFAULT_EPS0: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ball {
    pub center: Complex64,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }

    /// Whether the ball holds the conjugate of one of `zeros_of_e`, i.e. a
    /// zero of `θ`.
    pub fn contains_theta_zero(&self, zeros_of_e: &[Complex64]) -> bool {
        zeros_of_e.iter().any(|z| self.contains(z.conj()))
    }
}

/// Phase-speed comparison `|θ'(x)|/|θ'(y)| > 1 + ε` with a caller supplied
/// `|θ'|`. A hit predicts a zero of `θ` in `|z - x| < 4|y - x|/ε`.
pub fn lemma1_detect_with<F>(phase_speed: F, x: f64, y: f64, eps: f64, eps0: f64) -> Result<Option<Ball>>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(eps > 0.0 && eps < eps0) {
        return Err(NlftError::InvalidArgument(format!("eps = {eps} must lie in (0, {eps0})")));
    }
    if x == y || !x.is_finite() || !y.is_finite() {
        return Err(NlftError::InvalidArgument("detection needs two distinct real points".into()));
    }
    let ratio = phase_speed(x)? / phase_speed(y)?;
    Ok((ratio > 1.0 + eps).then(|| Ball { center: Complex64::new(x, 0.0), radius: 4.0 * (y - x).abs() / eps }))
}

/// [`lemma1_detect_with`] for `θ = E♯/E` at time `t`.
pub fn lemma1_detect(
    f: &Potential,
    t: f64,
    x: f64,
    y: f64,
    eps: f64,
    eps0: f64,
    opts: &PropagationOptions,
) -> Result<Option<Ball>> {
    let speed = |u: f64| -> Result<f64> {
        Ok(theta_eval(f, t, Complex64::new(u, 0.0), 1, opts)?.theta_z.expect("order 1 requested").norm())
    };
    lemma1_detect_with(speed, x, y, eps, eps0)
}
