//! Hermite-Biehler pair `(E, Ẽ)`, scattering coefficients `(a, b)` and the
//! algebraic identities between them.
//!
//! `E = A - iC`, `Ẽ = B - iD`. The Schwarz transform `X♯(z) = conj X(z̄)` is
//! always obtained from a second propagation at `z̄`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{NlftError, Result};
use crate::extended::{propagate_extended, round, ComplexDd};
use crate::io::CsvTable;
use crate::potential::Potential;
use crate::propagator::{propagate_between, propagate_characteristic, Propagation, PropagationOptions};
use crate::report::DiagnosticReport;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Deviation of `|a|² - |b|²` from 1 beyond which propagation is deemed broken.
pub const UNIMODULAR_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatteringPair {
    pub t: f64,
    pub z: Complex64,
    pub e: Complex64,
    pub e_tilde: Complex64,
    pub de_dz: Option<Complex64>,
    pub de_tilde_dz: Option<Complex64>,
}

impl ScatteringPair {
    pub fn from_propagation(t: f64, z: Complex64, p: &Propagation) -> Self {
        let m = &p.m;
        Self {
            t,
            z,
            e: m.a11 - I * m.a21,
            e_tilde: m.a12 - I * m.a22,
            de_dz: p.dm.map(|d| d.a11 - I * d.a21),
            de_tilde_dz: p.dm.map(|d| d.a12 - I * d.a22),
        }
    }

    /// From the characteristic-basis matrix `N = T M`, whose first row is
    /// `(E, Ẽ)`.
    pub fn from_characteristic(t: f64, z: Complex64, p: &Propagation) -> Self {
        Self { t, z, e: p.m.a11, e_tilde: p.m.a12, de_dz: p.dm.map(|d| d.a11), de_tilde_dz: p.dm.map(|d| d.a12) }
    }

    /// `𝔈 = e^{itz} E`
    pub fn scattering_e(&self) -> Complex64 {
        (I * self.z * self.t).exp() * self.e
    }

    /// `𝔈̃ = e^{itz} Ẽ`
    pub fn scattering_e_tilde(&self) -> Complex64 {
        (I * self.z * self.t).exp() * self.e_tilde
    }

    pub fn ab(&self) -> ABPair {
        let phase = (I * self.z * self.t).exp();
        ABPair {
            t: self.t,
            z: self.z,
            a: phase * (self.e + I * self.e_tilde) * 0.5,
            b: phase * (self.e - I * self.e_tilde) * 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ABPair {
    pub t: f64,
    pub z: Complex64,
    pub a: Complex64,
    pub b: Complex64,
}

impl ABPair {
    pub fn free(t: f64, z: Complex64) -> Self {
        Self { t, z, a: Complex64::new(1.0, 0.0), b: Complex64::new(0.0, 0.0) }
    }

    /// `|a|² - |b|² - 1`, meaningful for real `z`.
    pub fn unimodular_deviation(&self) -> f64 {
        self.a.norm_sqr() - self.b.norm_sqr() - 1.0
    }

    /// `f_T† = b / a`
    pub fn reflection(&self) -> Complex64 {
        self.b / self.a
    }
}

pub fn hermite_biehler(
    f: &Potential,
    t: f64,
    z: Complex64,
    with_derivative: bool,
    opts: &PropagationOptions,
) -> ScatteringPair {
    let o = PropagationOptions { with_derivative, ..*opts };
    ScatteringPair::from_characteristic(t, z, &propagate_characteristic(f, t, z, &o))
}

/// `(E♯(z), Ẽ♯(z))` via propagation at `z̄`.
pub fn sharp(f: &Potential, t: f64, z: Complex64, opts: &PropagationOptions) -> (Complex64, Complex64) {
    let p = hermite_biehler(f, t, z.conj(), false, opts);
    (p.e.conj(), p.e_tilde.conj())
}

fn vanishes_on(f: &Potential, t1: f64, t2: f64, opts: &PropagationOptions) -> bool {
    f.segments(t1, t2, opts.step_budget).iter().all(|s| s.value == 0.0)
}

pub fn ab_coefficients(f: &Potential, t: f64, z: Complex64, opts: &PropagationOptions) -> ABPair {
    if vanishes_on(f, 0.0, t, opts) {
        return ABPair::free(t, z);
    }
    hermite_biehler(f, t, z, false, opts).ab()
}

/// `f_T†(s) = b(T, s) / a(T, s)`.
pub fn nlft_partial(f: &Potential, t: f64, s: f64, opts: &PropagationOptions) -> Result<Complex64> {
    let ab = ab_coefficients(f, t, Complex64::new(s, 0.0), opts);
    let deviation = ab.unimodular_deviation().abs();
    if !(deviation <= UNIMODULAR_GUARD) {
        return Err(NlftError::NonUnimodularIdentityViolation { s, deviation });
    }
    Ok(ab.reflection())
}

/// `a_{t1→t2}`, `b_{t1→t2}` from the transfer matrix over `[t1, t2]`.
pub fn local_scattering(f: &Potential, t1: f64, t2: f64, z: Complex64, opts: &PropagationOptions) -> ABPair {
    assert!(t1 <= t2, "local scattering requires t1 <= t2");
    if vanishes_on(f, t1, t2, opts) {
        return ABPair::free(t2 - t1, z);
    }
    let p = propagate_between(f, t1, t2, z, &PropagationOptions { with_derivative: false, ..*opts });
    ScatteringPair::from_propagation(t2 - t1, z, &p).ab()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityTolerances {
    pub det: f64,
    pub wronskian: f64,
    pub unimodular: f64,
}

impl Default for IdentityTolerances {
    fn default() -> Self {
        Self { det: 1e-12, wronskian: 1e-10, unimodular: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResiduals {
    pub z: Complex64,
    /// `|det M - 1|` from the double-double propagation.
    pub det: f64,
    /// `|EẼ♯ - ẼE♯ - 2i|` from the double-double propagation.
    pub wronskian: f64,
    /// `|det M - 1|` of the plain `f64` characteristic propagation.
    pub det_double: f64,
    /// `||a|² - |b|² - 1|` as `|Im(E conj Ẽ) - 1|` from the double-double
    /// propagation; only for real samples.
    pub unimodular: Option<f64>,
    /// The same from `a`, `b` in plain `f64`.
    pub unimodular_double: Option<f64>,
    /// `|E(z)| - |E(z̄)|`, only for upper half-plane samples.
    pub hb_margin: Option<f64>,
}

/// Determinant and Wronskian come from [`propagate_extended`]; the remaining
/// residuals use the characteristic basis, where `E`, `Ẽ` carry no
/// cancellation off the real line.
pub fn identity_residuals(f: &Potential, t: f64, z: Complex64, opts: &PropagationOptions) -> IdentityResiduals {
    let plain = PropagationOptions { with_derivative: false, ..*opts };
    let p = propagate_characteristic(f, t, z, &plain);
    let pair = ScatteringPair::from_characteristic(t, z, &p);
    let at_conj = ScatteringPair::from_characteristic(t, z.conj(), &propagate_characteristic(f, t, z.conj(), &plain));
    let one = ComplexDd::new(1.0.into(), 0.0.into());
    let m = propagate_extended(f, t, z, &plain);
    let m_conj = propagate_extended(f, t, z.conj(), &plain);
    let (e_sharp, et_sharp) = (m_conj.e().conj(), m_conj.e_tilde().conj());
    let w = m.e() * et_sharp - m.e_tilde() * e_sharp - ComplexDd::new(0.0.into(), 2.0.into());
    let det = round(m.det_m() - one).norm();
    let det_double = (p.m.det() / (2.0 * I) - 1.0).norm();
    let unimodular =
        (z.im == 0.0).then(|| round(ComplexDd::new((m.e() * m.e_tilde().conj()).im - one.re, one.im)).re.abs());
    let unimodular_double = (z.im == 0.0).then(|| pair.ab().unimodular_deviation().abs());
    let hb_margin = (z.im > 0.0).then(|| pair.e.norm() - at_conj.e.norm());
    IdentityResiduals { z, det, wronskian: round(w).norm(), det_double, unimodular, unimodular_double, hb_margin }
}

/// Determinant, Wronskian, unimodularity and Hermite-Biehler residuals over
/// `z_samples`. The report table holds one row per sample.
pub fn verify_identities(
    f: &Potential,
    t: f64,
    z_samples: &[Complex64],
    tol: &IdentityTolerances,
    opts: &PropagationOptions,
) -> DiagnosticReport {
    let rows: Vec<IdentityResiduals> = z_samples.par_iter().map(|&z| identity_residuals(f, t, z, opts)).collect();
    let mut table = CsvTable::new([
        "re_z",
        "im_z",
        "det_residual",
        "wronskian_residual",
        "det_residual_double",
        "unimodular_residual",
        "unimodular_residual_double",
        "hb_margin",
    ]);
    for r in &rows {
        table.push_nums(&[
            r.z.re,
            r.z.im,
            r.det,
            r.wronskian,
            r.det_double,
            r.unimodular.unwrap_or(f64::NAN),
            r.unimodular_double.unwrap_or(f64::NAN),
            r.hb_margin.unwrap_or(f64::NAN),
        ]);
    }
    let max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v) });
    let mut report = DiagnosticReport::new("identities");
    report.info("samples", rows.len() as f64);
    report.check("max_det_residual", max(&mut rows.iter().map(|r| r.det)), tol.det);
    report.check("max_wronskian_residual", max(&mut rows.iter().map(|r| r.wronskian)), tol.wronskian);
    report.info("max_det_residual_double", max(&mut rows.iter().map(|r| r.det_double)));
    if rows.iter().any(|r| r.unimodular.is_some()) {
        report.check("max_unimodular_residual", max(&mut rows.iter().filter_map(|r| r.unimodular)), tol.unimodular);
        report.info("max_unimodular_residual_double", max(&mut rows.iter().filter_map(|r| r.unimodular_double)));
    }
    if let Some(m) = rows.iter().filter_map(|r| r.hb_margin).reduce(f64::min) {
        report.check_at_least("min_hermite_biehler_margin", m, 0.0);
        if m == 0.0 {
            report.checks.last_mut().expect("just pushed").pass = false;
        }
    }
    report.with_table(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Preset;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn opts() -> PropagationOptions {
        PropagationOptions::default()
    }

    /// `a`, `b` for `f ≡ q` on `[0, t]` from the closed form.
    fn constant_ab(q: f64, t: f64, z: Complex64) -> (Complex64, Complex64) {
        let w = (Complex64::new(q * q, 0.0) - z * z).sqrt();
        let (ch, sh_w) = if w.norm() < 1e-12 { (c(1.0, 0.0), c(t, 0.0)) } else { ((w * t).cosh(), (w * t).sinh() / w) };
        let ph = (I * z * t).exp();
        (ph * (ch - I * z * sh_w), ph * q * sh_w)
    }

    #[test]
    fn hermite_biehler_examples() {
        let p = hermite_biehler(&Potential::zero(), 1.0, c(1.0, 0.0), false, &opts());
        assert_abs_diff_eq!((p.e - (-I).exp()).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((p.e_tilde - c(-1f64.sin(), -1f64.cos())).norm(), 0.0, epsilon = 1e-15);
        let p = hermite_biehler(&Potential::constant(1.0), 1.0, c(0.0, 0.0), false, &opts());
        assert_abs_diff_eq!((p.e - std::f64::consts::E).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((p.e_tilde - c(0.0, -1.0 / std::f64::consts::E)).norm(), 0.0, epsilon = 1e-15);
        let p = hermite_biehler(&Potential::preset(Preset::powerdecay()), 0.0, c(2.0, -1.0), true, &opts());
        assert_eq!((p.e, p.e_tilde), (c(1.0, 0.0), c(0.0, -1.0)));
        assert_eq!(p.de_dz, Some(c(0.0, 0.0)));
    }

    #[test]
    fn ab_examples() {
        let ab = ab_coefficients(&Potential::zero(), 3.0, c(0.7, 0.0), &opts());
        assert_eq!((ab.a, ab.b), (c(1.0, 0.0), c(0.0, 0.0)));
        let ab = ab_coefficients(&Potential::constant(1.0), 1.0, c(0.0, 0.0), &opts());
        assert_abs_diff_eq!((ab.a - 1f64.cosh()).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((ab.b - 1f64.sinh()).norm(), 0.0, epsilon = 1e-14);
        let ab = ab_coefficients(&Potential::constant(1.0), 1.0, c(2.0, 0.0), &opts());
        assert!(ab.unimodular_deviation().abs() < 1e-12);
        let (a, b) = constant_ab(1.0, 1.0, c(2.0, 0.0));
        assert!((ab.a - a).norm() < 1e-13 && (ab.b - b).norm() < 1e-13);
    }

    #[test]
    fn nlft_examples() {
        assert_eq!(nlft_partial(&Potential::zero(), 2.0, 0.3, &opts()).unwrap(), c(0.0, 0.0));
        let r = nlft_partial(&Potential::constant(1.0), 1.0, 0.0, &opts()).unwrap();
        assert_abs_diff_eq!((r - 1f64.tanh()).norm(), 0.0, epsilon = 1e-14);
        let r = nlft_partial(&Potential::constant(0.01), 1.0, 0.0, &opts()).unwrap();
        assert_abs_diff_eq!((r - 0.01f64.tanh()).norm(), 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!((r - 0.01).norm(), 1e-6 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn local_scattering_examples() {
        let f = Potential::constant(1.0);
        let ab = local_scattering(&f, 0.7, 0.7, c(0.3, 0.0), &opts());
        assert_eq!((ab.a, ab.b), (c(1.0, 0.0), c(0.0, 0.0)));
        let direct = ab_coefficients(&f, 1.0, c(0.0, 0.0), &opts());
        let local = local_scattering(&f, 0.0, 1.0, c(0.0, 0.0), &opts());
        assert!((direct.a - local.a).norm() < 1e-15 && (direct.b - local.b).norm() < 1e-15);
        let shifted = local_scattering(&f, 1.0, 2.0, c(0.0, 0.0), &opts());
        assert_abs_diff_eq!((shifted.a - 1f64.cosh()).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((shifted.b - 1f64.sinh()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn local_scattering_matches_shifted_potential() {
        let f = Potential::piecewise_constant(vec![0.0, 0.4, 1.1, 2.0], vec![0.5, -1.2, 0.8]).unwrap();
        let shifted = Potential::piecewise_constant(vec![0.0, 0.6, 1.5], vec![-1.2, 0.8]).unwrap();
        let z = c(1.3, -0.2);
        let local = local_scattering(&f, 0.5, 2.0, z, &opts());
        let direct = ab_coefficients(&shifted, 1.5, z, &opts());
        assert!((local.a - direct.a).norm() < 1e-13 && (local.b - direct.b).norm() < 1e-13);
    }

    #[test]
    fn verify_identity_examples() {
        let zs = [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0), c(1.0, 1.0)];
        let r = verify_identities(&Potential::zero(), 1.0, &zs, &IdentityTolerances::default(), &opts());
        assert!(r.value("max_det_residual") < 1e-14 && r.value("max_wronskian_residual") < 1e-14);
        assert!(r.value("max_unimodular_residual") < 1e-14);
        let r = verify_identities(&Potential::constant(1.0), 1.0, &zs, &IdentityTolerances::default(), &opts());
        assert!(r.all_pass(), "{r:?}");
        assert!(r.value("max_wronskian_residual") < 1e-12);
        assert_eq!(r.table.as_ref().unwrap().rows.len(), 4);
    }

    #[test]
    fn constant_potential_matches_closed_form_off_axis() {
        for &z in &[c(0.3, -0.8), c(-2.0, 0.5), c(1.0, 0.0)] {
            let ab = ab_coefficients(&Potential::constant(0.5), 1.5, z, &opts());
            let (a, b) = constant_ab(0.5, 1.5, z);
            assert!((ab.a - a).norm() < 1e-13 * a.norm().max(1.0), "{z}");
            assert!((ab.b - b).norm() < 1e-13 * b.norm().max(1.0), "{z}");
        }
    }

    #[test]
    fn first_order_law_slope() {
        let f = Potential::piecewise_constant(vec![0.0, 0.5, 1.0], vec![1.0, -0.5]).unwrap();
        let s = 0.8f64;
        let fourier =
            |t0: f64, t1: f64, q: f64| q * ((I * 2.0 * s * t1).exp() - (I * 2.0 * s * t0).exp()) / (I * 2.0 * s);
        let fhat = fourier(0.0, 0.5, 1.0) + fourier(0.5, 1.0, -0.5);
        let errs: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&eps| (ab_coefficients(&f.scaled(eps), 1.0, c(s, 0.0), &opts()).b - fhat * eps).norm())
            .collect();
        let slope = (errs[0].ln() - errs[3].ln()) / (1e-1f64.ln() - 1e-4f64.ln());
        assert!(slope >= 1.9, "slope {slope}, errors {errs:?}");
    }

    #[test]
    fn differential_equation_by_finite_differences() {
        let f = Potential::piecewise_constant(vec![0.0, 1.0, 3.0], vec![0.7, -0.4]).unwrap();
        let z = c(0.9, -0.3);
        let t = 2.0;
        let e = |t: f64| hermite_biehler(&f, t, z, false, &opts()).e;
        let rhs = -I * z * e(t) + f.evaluate(t) * sharp(&f, t, z, &opts()).0;
        let residual = |h: f64| ((e(t + h) - e(t - h)) / (2.0 * h) - rhs).norm();
        let (r1, r2) = (residual(1e-2), residual(5e-3));
        assert!(r1 < 1e-3 && r1 / r2 > 3.5, "{r1} {r2}");
    }

    #[test]
    fn derivative_formula_on_real_axis() {
        let q = 0.8;
        let f = Potential::constant(q);
        let t = 0.9;
        let abs_e = |t: f64| hermite_biehler(&f, t, c(0.0, 0.0), false, &opts()).e.norm();
        let h = 1e-4;
        let fd = (abs_e(t + h) - abs_e(t - h)) / (2.0 * h);
        assert!((fd - q * (q * t).exp()).abs() < 1e-7);

        let x = 1.7;
        let abs_e = |t: f64| hermite_biehler(&f, t, c(x, 0.0), false, &opts()).e;
        let e = abs_e(t);
        let cos2 = (e * e).re / e.norm_sqr();
        let fd = (abs_e(t + h).norm() - abs_e(t - h).norm()) / (2.0 * h);
        assert!((fd - q * e.norm() * cos2).abs() < 1e-7);
    }

    fn piecewise() -> impl Strategy<Value = Potential> {
        prop::collection::vec((0.05f64..1.0, -2.0f64..2.0), 1..6).prop_map(|pieces| {
            let mut breaks = vec![0.0];
            let mut values = Vec::new();
            for (w, q) in pieces {
                breaks.push(breaks.last().unwrap() + w);
                values.push(q);
            }
            Potential::piecewise_constant(breaks, values).unwrap()
        })
    }

    proptest! {
        #[test]
        fn unimodular_on_real_axis(f in piecewise(), t in 0.0f64..4.0, s in -10.0f64..10.0) {
            let ab = ab_coefficients(&f, t, c(s, 0.0), &opts());
            prop_assert!(ab.unimodular_deviation().abs() < 1e-12);
        }

        #[test]
        fn wronskian_identity(f in piecewise(), t in 0.0f64..3.0, re in -3.0f64..3.0, im in -1.0f64..1.0) {
            let r = identity_residuals(&f, t, c(re, im), &opts());
            prop_assert!(r.wronskian < 1e-10, "{}", r.wronskian);
        }

        #[test]
        fn hermite_biehler_inequality(f in piecewise(), t in 0.1f64..3.0, re in -3.0f64..3.0, im in 0.05f64..2.0) {
            let r = identity_residuals(&f, t, c(re, im), &opts());
            prop_assert!(r.hb_margin.unwrap() > 0.0);
        }
    }
}
