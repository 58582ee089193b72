use num_complex::Complex64;
use serde::Serialize;

use crate::error::{NlftError, Result};
use crate::potential::Potential;
use crate::propagator::PropagationOptions;
use crate::scattering::hermite_biehler;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `|E|` at or below which `θ` is treated as having a pole.
pub const DEFAULT_POLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InnerFunctionValue {
    pub t: f64,
    pub z: Complex64,
    pub theta: Complex64,
    pub theta_z: Option<Complex64>,
    pub theta_zz: Option<Complex64>,
}

/// `(θ, θ_z)` from `E`, `E♯` and their derivatives.
fn theta_and_derivative(
    f: &Potential,
    t: f64,
    z: Complex64,
    opts: &PropagationOptions,
) -> Result<(Complex64, Complex64)> {
    let at = hermite_biehler(f, t, z, true, opts);
    if at.e.norm() <= DEFAULT_POLE_TOL {
        return Err(NlftError::PoleAtEvaluationPoint { z, modulus: at.e.norm() });
    }
    let conj = hermite_biehler(f, t, z.conj(), true, opts);
    let (e, ez) = (at.e, at.de_dz.expect("derivative requested"));
    let (es, esz) = (conj.e.conj(), conj.de_dz.expect("derivative requested").conj());
    Ok((es / e, (esz * e - es * ez) / (e * e)))
}

/// `θ = E♯/E` with `θ_z` (order ≥ 1) and `θ_zz` (order 2, central
/// difference of `θ_z` with step `1e-5 (1 + |z|)`).
pub fn theta_eval(
    f: &Potential,
    t: f64,
    z: Complex64,
    order: u8,
    opts: &PropagationOptions,
) -> Result<InnerFunctionValue> {
    assert!(order <= 2, "theta order must be 0, 1 or 2");
    if order == 0 {
        let e = hermite_biehler(f, t, z, false, opts).e;
        if e.norm() <= DEFAULT_POLE_TOL {
            return Err(NlftError::PoleAtEvaluationPoint { z, modulus: e.norm() });
        }
        let es = hermite_biehler(f, t, z.conj(), false, opts).e.conj();
        return Ok(InnerFunctionValue { t, z, theta: es / e, theta_z: None, theta_zz: None });
    }
    let (theta, theta_z) = theta_and_derivative(f, t, z, opts)?;
    let theta_zz = if order == 2 {
        let h = 1e-5 * (1.0 + z.norm());
        let (_, plus) = theta_and_derivative(f, t, z + h, opts)?;
        let (_, minus) = theta_and_derivative(f, t, z - h, opts)?;
        Some((plus - minus) / (2.0 * h))
    } else {
        None
    };
    Ok(InnerFunctionValue { t, z, theta, theta_z: Some(theta_z), theta_zz })
}

/// `|∂θ/∂t - (2izθ + f(1 - θ²))|` with a central difference of step `h`.
pub fn theta_ode_residual(f: &Potential, t: f64, z: Complex64, h: f64, opts: &PropagationOptions) -> Result<f64> {
    let th = |t: f64| theta_eval(f, t, z, 0, opts).map(|v| v.theta);
    let fd = (th(t + h)? - th(t - h)?) / (2.0 * h);
    let theta = th(t)?;
    Ok((fd - (2.0 * I * z * theta + f.evaluate(t) * (1.0 - theta * theta))).norm())
}

/// Finite Blaschke product `Π (z - λ_n)/(z - λ̄_n)` with zeros `λ_n` in the
/// upper half-plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlaschkeProduct {
    pub zeros: Vec<Complex64>,
}

impl BlaschkeProduct {
    pub fn new(zeros: Vec<Complex64>) -> Result<Self> {
        if zeros.iter().any(|z| !(z.im > 0.0)) {
            return Err(NlftError::InvalidArgument("Blaschke zeros must lie in the upper half-plane".into()));
        }
        Ok(Self { zeros })
    }

    pub fn theta(&self, z: Complex64) -> Complex64 {
        self.zeros.iter().map(|&l| (z - l) / (z - l.conj())).product()
    }

    /// `θ' = θ Σ (1/(z - λ) - 1/(z - λ̄))`.
    pub fn theta_z(&self, z: Complex64) -> Complex64 {
        let log_derivative: Complex64 = self.zeros.iter().map(|&l| 1.0 / (z - l) - 1.0 / (z - l.conj())).sum();
        self.theta(z) * log_derivative
    }

    /// `|θ'(x)| = Σ 2 y_n / ((x - x_n)² + y_n²)` on the real line.
    pub fn boundary_phase_speed(&self, x: f64) -> f64 {
        self.zeros.iter().map(|l| 2.0 * l.im / ((x - l.re).powi(2) + l.im * l.im)).sum()
    }
}

/// `|E|` measured against the free-case size `|e^{-itz}|` below the real
/// line, where every `E` decays like `e^{t Im z}`.
pub(crate) fn scaled_modulus(e: Complex64, t: f64, z: Complex64) -> f64 {
    e.norm() * (t * (-z.im).max(0.0)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonOutcome {
    pub z: Complex64,
    pub iterations: usize,
    /// `|E(t, z)|` at the returned point.
    pub residual: f64,
}

/// Newton's method on `E(t, ·)` with the propagated `E_z`, until the scaled
/// modulus (hence also `|E|`) is below `tol`.
pub fn newton_zero(
    f: &Potential,
    t: f64,
    z0: Complex64,
    tol: f64,
    max_iter: usize,
    opts: &PropagationOptions,
) -> Result<NewtonOutcome> {
    let mut z = z0;
    for it in 0..=max_iter {
        let p = hermite_biehler(f, t, z, true, opts);
        let r = scaled_modulus(p.e, t, z);
        if r < tol {
            // one polishing step, kept only if it helps
            let polished = z - p.e / p.de_dz.expect("derivative requested");
            let ep = hermite_biehler(f, t, polished, false, opts).e;
            let (z, residual) =
                if scaled_modulus(ep, t, polished) < r { (polished, ep.norm()) } else { (z, p.e.norm()) };
            return Ok(NewtonOutcome { z, iterations: it, residual });
        }
        let ez = p.de_dz.expect("derivative requested");
        if it == max_iter || ez.norm() == 0.0 || !r.is_finite() {
            break;
        }
        z -= p.e / ez;
    }
    Err(NlftError::NewtonDiverged { start: z0 })
}
