//! Quadrature rules shared by the potential norms, the s-line integrals and
//! the time integrals along a propagation.
//!
//! Every reduction goes through [`pairwise_sum`] so results do not depend on
//! how panels were scheduled.

use std::ops::{Add, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
}

impl Integral {
    pub fn exact(value: f64) -> Self {
        Self { value, error_estimate: 0.0 }
    }
}

/// Scalar types the rules can integrate.
pub trait Scalar: Copy + Add<Output = Self> + Mul<f64, Output = Self> + Send + Sync {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Pairwise (cascade) summation in index order.
pub fn pairwise_sum<T: Scalar>(values: &[T]) -> T {
    match values.len() {
        0 => T::zero(),
        1 => values[0],
        n if n <= 8 => values[1..].iter().fold(values[0], |acc, &v| acc + v),
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Composite Simpson on `[a, b]`, doubling the panel count until two
/// successive estimates agree to `rel_tol` relative to the estimate.
pub fn simpson_doubling<F>(f: F, a: f64, b: f64, rel_tol: f64, max_panels: usize) -> Integral
where
    F: Fn(f64) -> f64,
{
    if b <= a {
        return Integral::exact(0.0);
    }
    let mut n = 16usize;
    let mut samples: Vec<f64> = (0..=n).map(|k| f(a + (b - a) * k as f64 / n as f64)).collect();
    let simpson = |s: &[f64], n: usize| -> f64 {
        let h = (b - a) / n as f64;
        let mut terms = Vec::with_capacity(n + 1);
        for (k, &v) in s.iter().enumerate() {
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            terms.push(w * v);
        }
        pairwise_sum(&terms) * h / 3.0
    };
    let mut prev = simpson(&samples, n);
    loop {
        let n2 = 2 * n;
        let mut refined = Vec::with_capacity(n2 + 1);
        for (k, &v) in samples.iter().take(n).enumerate() {
            refined.push(v);
            refined.push(f(a + (b - a) * (2 * k + 1) as f64 / n2 as f64));
        }
        refined.push(samples[n]);
        let cur = simpson(&refined, n2);
        let diff = (cur - prev).abs();
        samples = refined;
        n = n2;
        // Richardson: the Simpson error of `cur` is about diff / 15.
        if diff <= rel_tol * cur.abs().max(1e-300) || n >= max_panels || diff == 0.0 {
            return Integral { value: cur + (cur - prev) / 15.0, error_estimate: diff / 15.0 };
        }
        prev = cur;
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Fixed Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_panel<T: Scalar, F: Fn(f64) -> T>(f: &F, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> T {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let terms: Vec<T> = nodes.iter().zip(weights).map(|(&x, &w)| f(mid + half * x) * (w * half)).collect();
    pairwise_sum(&terms)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// One Gauss-Kronrod 7/15 panel: (Kronrod value, |Kronrod - Gauss|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(mid - dx) + f(mid + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Adaptive bisection with [`gk15`] panels until each panel's error is below
/// `abs_tol * width / (b - a)` or `max_depth` is reached.
pub fn adaptive_gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64, max_depth: u32) -> Integral {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32, out: &mut Vec<(f64, f64)>) {
        let (v, e) = gk15(f, a, b);
        if e <= tol || depth == 0 {
            out.push((v, e));
            return;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1, out);
        rec(f, m, b, 0.5 * tol, depth - 1, out);
    }
    if b <= a {
        return Integral::exact(0.0);
    }
    let mut parts = Vec::new();
    rec(f, a, b, abs_tol, max_depth, &mut parts);
    let values: Vec<f64> = parts.iter().map(|p| p.0).collect();
    let errors: Vec<f64> = parts.iter().map(|p| p.1).collect();
    Integral { value: pairwise_sum(&values), error_estimate: pairwise_sum(&errors) }
}
