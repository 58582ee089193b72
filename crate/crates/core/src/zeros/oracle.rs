use num_complex::Complex64;
use rayon::prelude::*;

use super::contour::Rect;
use super::inner::{newton_zero, scaled_modulus};
use super::locate::DEFAULT_NEWTON_TOL;
use crate::potential::Potential;
use crate::propagator::PropagationOptions;
use crate::scattering::hermite_biehler;

/// Brute-force zero finder: local minima of the scaled `|E|` on an
/// `n × n` lattice of cell centres, each polished by Newton and kept when it
/// lands inside `rect`. Independent of the contour machinery.
pub fn grid_minimum_zeros(f: &Potential, t: f64, rect: &Rect, n: usize, opts: &PropagationOptions) -> Vec<Complex64> {
    assert!(n >= 3, "grid oracle needs at least 3 points per side");
    let (dx, dy) = (rect.width() / n as f64, rect.height() / n as f64);
    let point = |i: usize, j: usize| Complex64::new(rect.x0 + (i as f64 + 0.5) * dx, rect.y0 + (j as f64 + 0.5) * dy);
    let modulus: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let z = point(k % n, k / n);
            scaled_modulus(hermite_biehler(f, t, z, false, opts).e, t, z)
        })
        .collect();
    let at = |i: isize, j: isize| {
        if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
            f64::INFINITY
        } else {
            modulus[j as usize * n + i as usize]
        }
    };
    let mut seeds = Vec::new();
    for j in 0..n as isize {
        for i in 0..n as isize {
            let m = at(i, j);
            let is_min = (-1..=1).all(|dj| (-1..=1).all(|di| (di == 0 && dj == 0) || at(i + di, j + dj) >= m));
            if is_min {
                seeds.push(point(i as usize, j as usize));
            }
        }
    }
    let polished: Vec<Option<Complex64>> = seeds
        .par_iter()
        .map(|&z0| newton_zero(f, t, z0, DEFAULT_NEWTON_TOL, 60, opts).ok().map(|o| o.z).filter(|z| rect.contains(*z)))
        .collect();
    let mut zeros: Vec<Complex64> = Vec::new();
    for z in polished.into_iter().flatten() {
        if zeros.iter().all(|w| (w - z).norm() > 1e-8) {
            zeros.push(z);
        }
    }
    zeros.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    zeros
}
