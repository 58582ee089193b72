//! Closed-form exactness checks for `f ≡ 0`, where `E = e^{-itz}`,
//! `Ẽ = -ie^{-itz}`, `a = 1`, `b = 0`, `θ = e^{2itz}` and `K` is the sinc
//! kernel.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::io::CsvTable;
use crate::potential::Potential;
use crate::propagator::PropagationOptions;
use crate::report::DiagnosticReport;
use crate::scattering::{ab_coefficients, hermite_biehler};
use crate::spectral::kernel_k;
use crate::zeros::theta_eval;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default tolerance on every free-case error.
pub const FREE_CASE_TOL: f64 = 1e-12;

/// The nine sample points: `0`, `±π`, `±i` and the corners `±1 ± i`.
pub fn free_case_points() -> Vec<Complex64> {
    vec![
        Complex64::new(0.0, 0.0),
        Complex64::new(PI, 0.0),
        Complex64::new(-PI, 0.0),
        I,
        -I,
        Complex64::new(1.0, 1.0),
        Complex64::new(-1.0, 1.0),
        Complex64::new(1.0, -1.0),
        Complex64::new(-1.0, -1.0),
    ]
}

/// `|x - exact| / max(1, |exact|)`: absolute below unit size, relative above,
/// since `θ` and `K` reach `e^{2t|Im z|}` off the real line.
pub fn scaled_error(x: Complex64, exact: Complex64) -> f64 {
    (x - exact).norm() / exact.norm().max(1.0)
}

/// Closed-form free `K(t, λ, z)` written without a removable singularity
/// check, for the independent comparison.
fn sinc_exact(t: f64, lambda: Complex64, z: Complex64) -> Complex64 {
    let d = lambda.conj() - z;
    if d == Complex64::new(0.0, 0.0) {
        Complex64::new(t / PI, 0.0)
    } else {
        (t * d).sin() / (PI * d)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Errors {
    e: f64,
    e_tilde: f64,
    a: f64,
    b: f64,
    theta: f64,
    kernel: f64,
}

impl Errors {
    fn max(self, o: Self) -> Self {
        Self {
            e: self.e.max(o.e),
            e_tilde: self.e_tilde.max(o.e_tilde),
            a: self.a.max(o.a),
            b: self.b.max(o.b),
            theta: self.theta.max(o.theta),
            kernel: self.kernel.max(o.kernel),
        }
    }
}

fn errors_at(f: &Potential, t: f64, z: Complex64, zs: &[Complex64], opts: &PropagationOptions) -> Result<Errors> {
    let phase = (-I * t * z).exp();
    let hb = hermite_biehler(f, t, z, false, opts);
    let ab = ab_coefficients(f, t, z, opts);
    let theta = theta_eval(f, t, z, 0, opts)?.theta;
    let kernel = zs.iter().map(|&l| scaled_error(kernel_k(f, t, l, z, opts), sinc_exact(t, l, z))).fold(0.0, f64::max);
    Ok(Errors {
        e: scaled_error(hb.e, phase),
        e_tilde: scaled_error(hb.e_tilde, -I * phase),
        a: scaled_error(ab.a, Complex64::new(1.0, 0.0)),
        b: scaled_error(ab.b, Complex64::new(0.0, 0.0)),
        theta: scaled_error(theta, (2.0 * I * t * z).exp()),
        kernel,
    })
}

/// Max scaled error of each free-case quantity over `ts × zs`. The kernel is
/// compared over all pairs `(λ, z)` of `zs`.
pub fn free_case_report(ts: &[f64], zs: &[Complex64], tol: f64, opts: &PropagationOptions) -> Result<DiagnosticReport> {
    let f = Potential::zero();
    let cells: Vec<(f64, Complex64)> = ts.iter().flat_map(|&t| zs.iter().map(move |&z| (t, z))).collect();
    let rows: Vec<Errors> = cells.par_iter().map(|&(t, z)| errors_at(&f, t, z, zs, opts)).collect::<Result<_>>()?;
    let mut table =
        CsvTable::new(["t", "re_z", "im_z", "e_err", "e_tilde_err", "a_err", "b_err", "theta_err", "kernel_err"]);
    for (&(t, z), r) in cells.iter().zip(&rows) {
        table.push_nums(&[t, z.re, z.im, r.e, r.e_tilde, r.a, r.b, r.theta, r.kernel]);
    }
    let worst = rows.iter().fold(Errors::default(), |m, r| m.max(*r));
    let mut report = DiagnosticReport::new("free_case");
    report
        .info("cases", cells.len() as f64)
        .check("max_e_error", worst.e, tol)
        .check("max_e_tilde_error", worst.e_tilde, tol)
        .check("max_a_error", worst.a, tol)
        .check("max_b_error", worst.b, tol)
        .check("max_theta_error", worst.theta, tol)
        .check("max_kernel_error", worst.kernel, tol);
    Ok(report.with_table(table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_case_passes_on_default_points() {
        let r = free_case_report(&[0.5, 1.0, 5.0], &free_case_points(), FREE_CASE_TOL, &PropagationOptions::default())
            .unwrap();
        for c in &r.checks {
            println!("{} {:e}", c.name, c.value);
        }
        assert!(r.all_pass(), "{:?}", r.failures().collect::<Vec<_>>());
        assert_eq!(r.table.as_ref().unwrap().rows.len(), 27);
    }

    #[test]
    fn scaled_error_switches_to_relative() {
        assert_eq!(scaled_error(Complex64::new(0.5, 0.0), Complex64::new(0.25, 0.0)), 0.25);
        assert_eq!(scaled_error(Complex64::new(11.0, 0.0), Complex64::new(10.0, 0.0)), 0.1);
    }
}
