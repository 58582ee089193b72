//! Shared fixtures for the criterion benches.

use nlft_core::{Complex64, Potential, Preset};

/// Piecewise-constant potential with `pieces` unit-length steps of
/// alternating sign and decaying height.
pub fn staircase(pieces: usize) -> Potential {
    let breaks: Vec<f64> = (0..=pieces).map(|k| k as f64 * 0.5).collect();
    let values: Vec<f64> = (0..pieces).map(|k| if k % 2 == 0 { 1.0 } else { -0.5 } / (1.0 + k as f64)).collect();
    Potential::piecewise_constant(breaks, values).expect("valid staircase")
}

pub fn powerdecay() -> Potential {
    Potential::preset(Preset::PowerDecay { amplitude: 1.0, exponent: 0.7 })
}

/// `n` points on a horizontal line `Im z = im` across `[-re_max, re_max]`.
pub fn z_line(n: usize, re_max: f64, im: f64) -> Vec<Complex64> {
    (0..n).map(|k| Complex64::new(-re_max + 2.0 * re_max * k as f64 / (n.max(2) - 1) as f64, im)).collect()
}
