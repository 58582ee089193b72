//! Exact propagation of the real Dirac system.
//!
//! Multiplying the system through by the inverse of the symplectic form gives
//! `M' = G M` with the traceless generator `G = [[f, -z], [z, -f]]`. On a
//! piece where `f ≡ q` the step is `exp(hG) = cosh(hω) I + h·sinhc(hω) G`
//! with `ω² = q² - z²`. Both factors are entire in `ω²`, so no branch of the
//! square root is ever selected.

use std::ops::Mul;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::potential::Potential;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// 2×2 complex matrix in the `(A, B; C, D)` layout: first column is the
/// Neumann solution `(A, C)`, second the Dirichlet solution `(B, D)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferMatrix {
    pub a11: Complex64,
    pub a12: Complex64,
    pub a21: Complex64,
    pub a22: Complex64,
}

impl TransferMatrix {
    pub const fn new(a11: Complex64, a12: Complex64, a21: Complex64, a22: Complex64) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self::new(one, zero, zero, one)
    }

    pub fn zero() -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self::new(zero, zero, zero, zero)
    }

    pub fn from_real(m: [[f64; 2]; 2]) -> Self {
        Self::new(m[0][0].into(), m[0][1].into(), m[1][0].into(), m[1][1].into())
    }

    pub fn det(&self) -> Complex64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// Inverse of a unimodular matrix.
    pub fn unimodular_inverse(&self) -> Self {
        Self::new(self.a22, -self.a12, -self.a21, self.a11)
    }

    pub fn conj(&self) -> Self {
        Self::new(self.a11.conj(), self.a12.conj(), self.a21.conj(), self.a22.conj())
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.a11 + o.a11, self.a12 + o.a12, self.a21 + o.a21, self.a22 + o.a22)
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self::new(self.a11 * k, self.a12 * k, self.a21 * k, self.a22 * k)
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        [(self.a11 - o.a11).norm(), (self.a12 - o.a12).norm(), (self.a21 - o.a21).norm(), (self.a22 - o.a22).norm()]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs_diff(&Self::zero())
    }

    /// `A(t, z)`
    pub fn a(&self) -> Complex64 {
        self.a11
    }
    /// `B(t, z)`
    pub fn b(&self) -> Complex64 {
        self.a12
    }
    /// `C(t, z)`
    pub fn c(&self) -> Complex64 {
        self.a21
    }
    /// `D(t, z)`
    pub fn d(&self) -> Complex64 {
        self.a22
    }
}

impl Mul for TransferMatrix {
    type Output = TransferMatrix;

    fn mul(self, o: TransferMatrix) -> TransferMatrix {
        TransferMatrix::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagationOptions {
    /// Substeps per unit time for analytic (non piecewise-constant) potentials.
    pub step_budget: usize,
    pub with_derivative: bool,
    /// Below this `|hω|` the step factors come from their power series.
    pub small_omega_threshold: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self { step_budget: 64, with_derivative: false, small_omega_threshold: 0.5 }
    }
}

impl PropagationOptions {
    pub fn with_derivative(mut self) -> Self {
        self.with_derivative = true;
        self
    }

    pub fn step_budget(mut self, budget: usize) -> Self {
        self.step_budget = budget.max(1);
        self
    }
}

/// `M(t, z)` and, when requested, `∂M/∂z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Propagation {
    pub m: TransferMatrix,
    pub dm: Option<TransferMatrix>,
}

/// `cosh(√x)`, `sinh(√x)/√x` and `d/dx [sinh(√x)/√x]`.
pub(crate) fn step_factors(x2: Complex64, threshold: f64) -> (Complex64, Complex64, Complex64) {
    if x2.norm() < threshold * threshold {
        let mut c = Complex64::new(1.0, 0.0);
        let mut sc = Complex64::new(1.0, 0.0);
        let mut dsc = Complex64::new(0.0, 0.0);
        // term_k = x^k / (2k)!, x^k / (2k+1)!
        let mut pow = Complex64::new(1.0, 0.0);
        let mut fact_even = 1.0;
        let mut fact_odd = 1.0;
        for k in 1..40 {
            let kf = k as f64;
            let prev_pow = pow;
            pow *= x2;
            fact_even *= (2.0 * kf - 1.0) * (2.0 * kf);
            fact_odd *= (2.0 * kf) * (2.0 * kf + 1.0);
            let te = pow / fact_even;
            let to = pow / fact_odd;
            let td = prev_pow * (kf / fact_odd);
            c += te;
            sc += to;
            dsc += td;
            if te.norm() < 1e-18 && td.norm() < 1e-18 * dsc.norm().max(1e-300) {
                break;
            }
        }
        (c, sc, dsc)
    } else {
        let w = x2.sqrt();
        let c = w.cosh();
        let sc = w.sinh() / w;
        let dsc = (c - sc) / (2.0 * x2);
        (c, sc, dsc)
    }
}

fn generator(q: f64, z: Complex64) -> TransferMatrix {
    TransferMatrix::new(Complex64::new(q, 0.0), -z, z, Complex64::new(-q, 0.0))
}

/// `∂G/∂z`
fn generator_dz() -> TransferMatrix {
    TransferMatrix::from_real([[0.0, -1.0], [1.0, 0.0]])
}

/// `exp(hG)` for constant `f ≡ q` over a step of length `h`.
pub fn step_exact(q: f64, h: f64, z: Complex64) -> TransferMatrix {
    step_exact_with(q, h, z, PropagationOptions::default().small_omega_threshold)
}

fn step_exact_with(q: f64, h: f64, z: Complex64, threshold: f64) -> TransferMatrix {
    assert!(h >= 0.0, "step length must be non-negative");
    let x2 = (Complex64::new(q * q, 0.0) - z * z) * (h * h);
    let (c, sc, _) = step_factors(x2, threshold);
    let mut p = generator(q, z).scale(sc * h);
    p.a11 += c;
    p.a22 += c;
    p
}

/// `exp(hG)` together with its `z`-derivative.
pub fn step_with_derivative(q: f64, h: f64, z: Complex64, threshold: f64) -> (TransferMatrix, TransferMatrix) {
    let x2 = (Complex64::new(q * q, 0.0) - z * z) * (h * h);
    let (c, sc, dsc) = step_factors(x2, threshold);
    let g = generator(q, z);
    let mut p = g.scale(sc * h);
    p.a11 += c;
    p.a22 += c;
    let dx2 = z * (-2.0 * h * h);
    let dc = sc * 0.5 * dx2;
    let dsc_z = dsc * dx2;
    let mut dp = g.scale(dsc_z * h).add(&generator_dz().scale(sc * h));
    dp.a11 += dc;
    dp.a22 += dc;
    (p, dp)
}

/// Divided differences `c[x, y]`, `sc[x, y]` of `cosh(√x)` and `sinh(√x)/√x`,
/// free of cancellation when `x ≈ y`.
fn factor_divided_differences(x: Complex64, y: Complex64, threshold: f64) -> (Complex64, Complex64) {
    let one = Complex64::new(1.0, 0.0);
    if x.norm().max(y.norm()) < threshold * threshold {
        // Σ H_{k-1}(x, y) / (2k)!, Σ H_{k-1}(x, y) / (2k+1)! with H the complete
        // homogeneous polynomials
        let (mut h, mut y_pow) = (one, one);
        let (mut c, mut sc) = (Complex64::new(0.5, 0.0), Complex64::new(1.0 / 6.0, 0.0));
        let (mut fe, mut fo) = (2.0, 6.0);
        for k in 2..60 {
            let kf = k as f64;
            y_pow *= y;
            h = h * x + y_pow;
            fe *= (2.0 * kf - 1.0) * (2.0 * kf);
            fo *= (2.0 * kf) * (2.0 * kf + 1.0);
            let te = h / fe;
            c += te;
            sc += h / fo;
            if te.norm() < 1e-18 * c.norm() {
                break;
            }
        }
        return (c, sc);
    }
    let a = x.sqrt();
    let mut b = y.sqrt();
    if (a + b).norm() < (a - b).norm() {
        b = -b;
    }
    // a = m + δ, b = m - δ, x - y = 4mδ
    let m = 0.5 * (a + b);
    let d = (x - y) / (4.0 * m);
    let (sinh_d_over_d, cosh_d_minus_1) = if d.norm() < 1e-4 {
        let d2 = d * d;
        (one + d2 / 6.0 + d2 * d2 / 120.0, d2 / 2.0 + d2 * d2 / 24.0)
    } else {
        (d.sinh() / d, d.cosh() - 1.0)
    };
    let (sm, cm) = (m.sinh(), m.cosh());
    let c = sm * sinh_d_over_d / (2.0 * m);
    let mc_minus_s = m * cm - sm;
    let num = mc_minus_s + m * cm * (sinh_d_over_d - 1.0) - sm * cosh_d_minus_1;
    let sc = num / (2.0 * m * a * b);
    (c, sc)
}

/// `exp(hG(z))`, `exp(hG(w))` and their divided difference in the spectral
/// parameter, `(P(w) - P(z)) / (w - z)`; at `w = z` the latter is `∂P/∂z`.
pub fn step_divided_difference(
    q: f64,
    h: f64,
    z: Complex64,
    w: Complex64,
    threshold: f64,
) -> (TransferMatrix, TransferMatrix, TransferMatrix) {
    let x_of = |u: Complex64| (Complex64::new(q * q, 0.0) - u * u) * (h * h);
    let (xz, xw) = (x_of(z), x_of(w));
    let (cz, scz, _) = step_factors(xz, threshold);
    let (cw, scw, _) = step_factors(xw, threshold);
    let (cdd, scdd) = factor_divided_differences(xz, xw, threshold);
    let dx = (z + w) * (-h * h);
    let build = |c: Complex64, sc: Complex64, u: Complex64| {
        let mut p = generator(q, u).scale(sc * h);
        p.a11 += c;
        p.a22 += c;
        p
    };
    let mut dd = generator(q, w).scale(scdd * dx * h).add(&generator_dz().scale(scz * h));
    dd.a11 += cdd * dx;
    dd.a22 += cdd * dx;
    (build(cz, scz, z), build(cw, scw, w), dd)
}

/// `(M(z), M(w), (M(w) - M(z)) / (w - z))` over `[t1, t2]`.
pub fn propagate_divided_difference(
    f: &Potential,
    t1: f64,
    t2: f64,
    z: Complex64,
    w: Complex64,
    opts: &PropagationOptions,
) -> (TransferMatrix, TransferMatrix, TransferMatrix) {
    let (mut mz, mut mw, mut dd) = (TransferMatrix::identity(), TransferMatrix::identity(), TransferMatrix::zero());
    for seg in f.segments(t1, t2, opts.step_budget) {
        let h = seg.len();
        if h <= 0.0 {
            continue;
        }
        let (pz, pw, pd) = step_divided_difference(seg.value, h, z, w, opts.small_omega_threshold);
        dd = (pd * mz).add(&(pw * dd));
        mz = pz * mz;
        mw = pw * mw;
    }
    (mz, mw, dd)
}

/// `M_{t1→t2}(z)`, started from the identity at `t1`.
pub fn propagate_between(f: &Potential, t1: f64, t2: f64, z: Complex64, opts: &PropagationOptions) -> Propagation {
    assert!(t1 <= t2, "propagation requires t1 <= t2");
    let mut m = TransferMatrix::identity();
    let mut dm = opts.with_derivative.then(TransferMatrix::zero);
    for seg in f.segments(t1, t2, opts.step_budget) {
        let h = seg.len();
        if h <= 0.0 {
            continue;
        }
        match dm.as_mut() {
            Some(d) => {
                let (p, dp) = step_with_derivative(seg.value, h, z, opts.small_omega_threshold);
                *d = (dp * m).add(&(p * *d));
                m = p * m;
            }
            None => m = step_exact_with(seg.value, h, z, opts.small_omega_threshold) * m,
        }
    }
    Propagation { m, dm }
}

/// `exp(hG')` in the characteristic basis `(A - iC, A + iC)`, where
/// `G' = [[-iz, q], [q, iz]]`, with its `z`-derivative when requested.
///
/// Free steps are diagonal and exact. Otherwise, away from the series
/// region and for `|q| < |z|/2`, the diagonal is split as
/// `e^{∓ihκ} ∓ i g sin(hκ)` with `κ = √(z² - q²)` and `g = q²/(κ(z + κ))`,
/// so that a decaying entry is never formed by cancelling growing ones.
pub fn step_characteristic(
    q: f64,
    h: f64,
    z: Complex64,
    threshold: f64,
    with_derivative: bool,
) -> (TransferMatrix, Option<TransferMatrix>) {
    let zero = Complex64::new(0.0, 0.0);
    if q == 0.0 {
        let (em, ep) = ((-I * h * z).exp(), (I * h * z).exp());
        let p = TransferMatrix::new(em, zero, zero, ep);
        return (p, with_derivative.then(|| TransferMatrix::new(-I * h * em, zero, zero, I * h * ep)));
    }
    let x2 = (Complex64::new(q * q, 0.0) - z * z) * (h * h);
    let (c, sc, dsc) = step_factors(x2, threshold);
    let off = sc * (q * h);
    let dx2 = z * (-2.0 * h * h);
    let d_off = dsc * dx2 * (q * h);
    if x2.norm() >= threshold * threshold && 2.0 * q.abs() < z.norm() {
        let kappa = z * (1.0 - Complex64::new(q * q, 0.0) / (z * z)).sqrt();
        let g = q * q / (kappa * (z + kappa));
        let (em, ep) = ((-I * h * kappa).exp(), (I * h * kappa).exp());
        let (sn, cs) = ((h * kappa).sin(), (h * kappa).cos());
        let p = TransferMatrix::new(em - I * g * sn, off, off, ep + I * g * sn);
        let dp = with_derivative.then(|| {
            let kz = z / kappa;
            let s = z + kappa;
            let gz = -q * q * (kz * s + kappa * (1.0 + kz)) / (kappa * s * kappa * s);
            let d_diag = I * (gz * sn + g * h * kz * cs);
            TransferMatrix::new(-I * h * kz * em - d_diag, d_off, d_off, I * h * kz * ep + d_diag)
        });
        return (p, dp);
    }
    let p = TransferMatrix::new(c - I * z * h * sc, off, off, c + I * z * h * sc);
    let dp = with_derivative.then(|| {
        let dc = sc * 0.5 * dx2;
        let dsc_z = dsc * dx2;
        let d11 = dc - I * h * (sc + z * dsc_z);
        let d22 = dc + I * h * (sc + z * dsc_z);
        TransferMatrix::new(d11, d_off, d_off, d22)
    });
    (p, dp)
}

/// `(e^x - 1) / x`, from its series near zero.
fn exprel(x: Complex64) -> Complex64 {
    if x.norm() < 0.5 {
        let (mut sum, mut term) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        for k in 2..30 {
            term *= x / k as f64;
            sum += term;
            if term.norm() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        (x.exp() - 1.0) / x
    }
}

pub(crate) fn to_characteristic(m: &TransferMatrix) -> TransferMatrix {
    let one = Complex64::new(1.0, 0.0);
    let t = TransferMatrix::new(one, -I, one, I);
    let t_inv = TransferMatrix::new(one, one, I, -I).scale(Complex64::new(0.5, 0.0));
    t * *m * t_inv
}

/// [`step_characteristic`] at `z` and `w` with the divided difference
/// `(P(w) - P(z)) / (w - z)`. Free steps use `exprel`, so nothing cancels
/// however far `z` and `w` sit from the real line.
pub fn step_characteristic_divided_difference(
    q: f64,
    h: f64,
    z: Complex64,
    w: Complex64,
    threshold: f64,
) -> (TransferMatrix, TransferMatrix, TransferMatrix) {
    let (pz, _) = step_characteristic(q, h, z, threshold, false);
    let (pw, _) = step_characteristic(q, h, w, threshold, false);
    if q == 0.0 {
        let zero = Complex64::new(0.0, 0.0);
        let dm = -I * h * pz.a11 * exprel(-I * h * (w - z));
        let dp = I * h * pz.a22 * exprel(I * h * (w - z));
        return (pz, pw, TransferMatrix::new(dm, zero, zero, dp));
    }
    let (_, _, dd) = step_divided_difference(q, h, z, w, threshold);
    (pz, pw, to_characteristic(&dd))
}

/// `(N(z), N(w), (N(w) - N(z)) / (w - z))` over `[0, t]` in the
/// characteristic basis.
pub fn propagate_characteristic_divided_difference(
    f: &Potential,
    t: f64,
    z: Complex64,
    w: Complex64,
    opts: &PropagationOptions,
) -> (TransferMatrix, TransferMatrix, TransferMatrix) {
    let n0 = TransferMatrix::new(Complex64::new(1.0, 0.0), -I, Complex64::new(1.0, 0.0), I);
    let (mut nz, mut nw, mut dd) = (n0, n0, TransferMatrix::zero());
    for seg in f.segments(0.0, t, opts.step_budget) {
        let h = seg.len();
        if h <= 0.0 {
            continue;
        }
        let (pz, pw, pd) = step_characteristic_divided_difference(seg.value, h, z, w, opts.small_omega_threshold);
        dd = (pd * nz).add(&(pw * dd));
        nz = pz * nz;
        nw = pw * nw;
    }
    (nz, nw, dd)
}

/// `N = T M` with `T = [[1, -i], [1, i]]`, so that `N₁₁ = E` and `N₁₂ = Ẽ`
/// are obtained without cancellation off the real line.
pub fn propagate_characteristic(f: &Potential, t: f64, z: Complex64, opts: &PropagationOptions) -> Propagation {
    assert!(t >= 0.0, "propagation time must be non-negative");
    let mut n = TransferMatrix::new(Complex64::new(1.0, 0.0), -I, Complex64::new(1.0, 0.0), I);
    let mut dn = opts.with_derivative.then(TransferMatrix::zero);
    for seg in f.segments(0.0, t, opts.step_budget) {
        let h = seg.len();
        if h <= 0.0 {
            continue;
        }
        let (p, dp) = step_characteristic(seg.value, h, z, opts.small_omega_threshold, dn.is_some());
        if let (Some(d), Some(dp)) = (dn.as_mut(), dp) {
            *d = (dp * n).add(&(p * *d));
        }
        n = p * n;
    }
    Propagation { m: n, dm: dn }
}

/// `M(t, z)` (and `∂M/∂z` when `opts.with_derivative`).
pub fn propagate(f: &Potential, t: f64, z: Complex64, opts: &PropagationOptions) -> Propagation {
    assert!(t >= 0.0, "propagation time must be non-negative");
    propagate_between(f, 0.0, t, z, opts)
}

/// Transfer matrix `M(t2) M(t1)^{-1}`, computed by direct propagation.
pub fn transfer(f: &Potential, t1: f64, t2: f64, z: Complex64, opts: &PropagationOptions) -> TransferMatrix {
    propagate_between(f, t1, t2, z, &PropagationOptions { with_derivative: false, ..*opts }).m
}

/// `M(t_k, z)` at every ascending time in `times`, sharing one pass.
pub fn propagate_nodes(f: &Potential, times: &[f64], z: Complex64, opts: &PropagationOptions) -> Vec<TransferMatrix> {
    let mut out = Vec::with_capacity(times.len());
    let mut m = TransferMatrix::identity();
    let mut at = 0.0;
    let plain = PropagationOptions { with_derivative: false, ..*opts };
    for &t in times {
        assert!(t >= at, "node times must be ascending and non-negative");
        m = propagate_between(f, at, t, z, &plain).m * m;
        at = t;
        out.push(m);
    }
    out
}

/// Maps [`propagate`] over a z-grid in parallel; output order follows input.
pub fn propagate_batch(f: &Potential, t: f64, zs: &[Complex64], opts: &PropagationOptions) -> Vec<Propagation> {
    zs.par_iter().map(|&z| propagate(f, t, z, opts)).collect()
}
