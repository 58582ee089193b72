//! Double-double propagation for invariant checks.
//!
//! Rounding in `f64` leaves `det M` off by about `1e-16·|M|²`, which is far
//! above `1e-12` once `|M|` grows like `e^{t|Im z|}`. Here the characteristic
//! basis `N = T M` is propagated in double-double: every step factor is taken
//! from the `f64` propagator, then `cosh` is re-solved from
//! `c² - x·sinhc² = 1` (free steps: the second diagonal entry is the exact
//! reciprocal of the first), so each step is unimodular to roughly 32 digits.

use num_complex::{Complex, Complex64};
use twofloat::TwoFloat;

use crate::potential::Potential;
use crate::propagator::{step_factors, PropagationOptions, TransferMatrix};

pub type ComplexDd = Complex<TwoFloat>;

fn dd(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

fn lift(z: Complex64) -> ComplexDd {
    Complex::new(dd(z.re), dd(z.im))
}

/// Rounds a double-double complex to the nearest `Complex64`.
pub fn round(z: ComplexDd) -> Complex64 {
    Complex64::new(f64::from(z.re), f64::from(z.im))
}

/// Quotient with one residual correction; the plain `TwoFloat` division is
/// only accurate to `f64` precision.
fn div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q = a / b;
    q + (a - q * b) / b
}

fn sqrt_dd(w: ComplexDd) -> ComplexDd {
    let zero = dd(0.0);
    if w.re == zero && w.im == zero {
        return w;
    }
    let r = (w.re * w.re + w.im * w.im).sqrt();
    let half = dd(0.5);
    if w.re >= zero {
        let u = ((r + w.re) * half).sqrt();
        Complex::new(u, div(w.im * half, u))
    } else {
        let mut v = ((r - w.re) * half).sqrt();
        if w.im < zero {
            v = -v;
        }
        Complex::new(div(w.im * half, v), v)
    }
}

fn dist2(a: ComplexDd, b: Complex64) -> f64 {
    (round(a) - b).norm_sqr()
}

fn recip(a: ComplexDd) -> ComplexDd {
    let n = a.re * a.re + a.im * a.im;
    Complex::new(div(a.re, n), div(-a.im, n))
}

/// 2×2 double-double matrix in the same layout as [`TransferMatrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedMatrix {
    pub a11: ComplexDd,
    pub a12: ComplexDd,
    pub a21: ComplexDd,
    pub a22: ComplexDd,
}

impl ExtendedMatrix {
    /// `T = [[1, -i], [1, i]]`, the characteristic basis at `t = 0`.
    pub fn characteristic_start() -> Self {
        let (one, i) = (lift(Complex64::new(1.0, 0.0)), lift(Complex64::new(0.0, 1.0)));
        Self { a11: one, a12: -i, a21: one, a22: i }
    }

    pub fn det(&self) -> ComplexDd {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// `det M = det N / (2i)` for a characteristic-basis matrix `N`.
    pub fn det_m(&self) -> ComplexDd {
        let d = self.det();
        Complex::new(d.im * dd(0.5), -d.re * dd(0.5))
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            a11: self.a11 * o.a11 + self.a12 * o.a21,
            a12: self.a11 * o.a12 + self.a12 * o.a22,
            a21: self.a21 * o.a11 + self.a22 * o.a21,
            a22: self.a21 * o.a12 + self.a22 * o.a22,
        }
    }

    pub fn to_transfer(&self) -> TransferMatrix {
        TransferMatrix::new(round(self.a11), round(self.a12), round(self.a21), round(self.a22))
    }

    /// `E = N₁₁`.
    pub fn e(&self) -> ComplexDd {
        self.a11
    }

    /// `Ẽ = N₁₂`.
    pub fn e_tilde(&self) -> ComplexDd {
        self.a12
    }
}

/// Unimodular characteristic-basis step `T exp(hG) T⁻¹` for `f ≡ q`.
pub fn step_extended(q: f64, h: f64, z: Complex64, threshold: f64) -> ExtendedMatrix {
    let zero = lift(Complex64::new(0.0, 0.0));
    let (zd, qd, hd) = (lift(z), dd(q), dd(h));
    if q == 0.0 {
        let em = lift((Complex64::new(0.0, -h) * z).exp());
        return ExtendedMatrix { a11: em, a12: zero, a21: zero, a22: recip(em) };
    }
    let x2_f64 = (Complex64::new(q * q, 0.0) - z * z) * (h * h);
    let (c0, sc, _) = step_factors(x2_f64, threshold);
    let x2 = (Complex::new(qd * qd, dd(0.0)) - zd * zd) * Complex::new(hd * hd, dd(0.0));
    let scd = lift(sc);
    let root = sqrt_dd(lift(Complex64::new(1.0, 0.0)) + x2 * scd * scd);
    let c = if dist2(root, c0) <= dist2(-root, c0) { root } else { -root };
    let k = scd * Complex::new(hd, dd(0.0));
    let off = k * Complex::new(qd, dd(0.0));
    let izk = Complex::new(dd(0.0), dd(1.0)) * zd * k;
    ExtendedMatrix { a11: c - izk, a12: off, a21: off, a22: c + izk }
}

/// `N(t, z) = T M(t, z)` in double-double arithmetic.
pub fn propagate_extended(f: &Potential, t: f64, z: Complex64, opts: &PropagationOptions) -> ExtendedMatrix {
    assert!(t >= 0.0, "propagation time must be non-negative");
    let mut n = ExtendedMatrix::characteristic_start();
    for seg in f.segments(0.0, t, opts.step_budget) {
        let h = seg.len();
        if h > 0.0 {
            n = step_extended(seg.value, h, z, opts.small_omega_threshold).mul(&n);
        }
    }
    n
}
