//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL ...` line. Oracles are closed forms or brute-force
//! computations written here, independent of the library's own checks.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nlft_core::convergence::{convergence_scan, equivalence_surface, log_a_identity_residual, TimeQuadrature};
use nlft_core::scattering::identity_residuals;
use nlft_core::spectral::{
    default_weight_horizon, kernel_k, kernel_proximity, nonlinear_parseval_residual, ParsevalConfig,
};
use nlft_core::zeros::{
    lemma1_detect, lemma1_detect_with, locate_zeros, theta_eval, track_zero, velocity_residual, BlaschkeProduct, Rect,
    TrackConfig, DEFAULT_EPS0, DEFAULT_NEWTON_TOL,
};
use nlft_core::{
    ab_coefficients, estimate_w, hermite_biehler, nlft_partial, Complex64, Potential, Preset, PropagationOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn opts() -> PropagationOptions {
    PropagationOptions::default()
}

/// Prints the verdict line and fails the test when `pass` is false or the
/// runtime limit is exceeded.
fn verdict(n: u32, pass: bool, elapsed: Duration, limit: Option<Duration>, detail: String) {
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let ok = pass && in_time;
    let limit = limit.map_or(String::new(), |l| format!(" (limit {:.0} s)", l.as_secs_f64()));
    println!(
        "criterion {n}: {} {detail}; runtime {:.3} s{limit}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    assert!(pass, "criterion {n} failed: {detail}");
    assert!(in_time, "criterion {n} exceeded its runtime limit");
}

/// `|x - exact| / max(1, |exact|)`.
fn scaled(x: Complex64, exact: Complex64) -> f64 {
    (x - exact).norm() / exact.norm().max(1.0)
}

/// Random piecewise-constant potential: up to `pieces` pieces on `[0, len]`
/// with values in `[-qmax, qmax]`.
fn random_piecewise(rng: &mut ChaCha8Rng, len: f64, pieces: usize, qmax: f64) -> Potential {
    let n = rng.gen_range(1..=pieces);
    let mut cuts: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.0..len)).collect();
    cuts.sort_by(f64::total_cmp);
    let mut breaks = vec![0.0];
    breaks.extend(cuts);
    breaks.push(len);
    breaks.dedup();
    let values = (0..breaks.len() - 1).map(|_| rng.gen_range(-qmax..qmax)).collect();
    Potential::piecewise_constant(breaks, values).unwrap()
}

/// `E(t, z)` for `f ≡ q` from `M = cosh(ωt) I + sinh(ωt)/ω G`, with
/// `G = [[q, -z], [z, -q]]` and `ω² = q² - z²`.
fn constant_e(q: f64, t: f64, z: Complex64) -> Complex64 {
    let w = (c(q * q, 0.0) - z * z).sqrt();
    let (ch, sh) = if w.norm() < 1e-8 { (c(1.0, 0.0), c(t, 0.0)) } else { ((w * t).cosh(), (w * t).sinh() / w) };
    ch + sh * (q - I * z)
}

#[test]
fn criterion_01_free_case() {
    let start = Instant::now();
    let f = Potential::zero();
    let pts = [c(0.0, 0.0), c(PI, 0.0), c(-PI, 0.0), I, -I, c(1.0, 1.0), c(-1.0, 1.0), c(1.0, -1.0), c(-1.0, -1.0)];
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 5.0] {
        for &z in &pts {
            let e = (-I * t * z).exp();
            let hb = hermite_biehler(&f, t, z, false, &opts());
            let ab = ab_coefficients(&f, t, z, &opts());
            let theta = theta_eval(&f, t, z, 0, &opts()).unwrap().theta;
            worst = worst
                .max(scaled(hb.e, e))
                .max(scaled(hb.e_tilde, -I * e))
                .max(scaled(ab.a, c(1.0, 0.0)))
                .max(scaled(ab.b, c(0.0, 0.0)))
                .max(scaled(theta, (2.0 * I * t * z).exp()));
            for &l in &pts {
                let d = l.conj() - z;
                let sinc = if d.norm() == 0.0 { c(t / PI, 0.0) } else { (t * d).sin() / (PI * d) };
                worst = worst.max(scaled(kernel_k(&f, t, l, z, &opts()), sinc));
            }
        }
    }
    verdict(
        1,
        worst < 1e-12,
        start.elapsed(),
        Some(Duration::from_secs(1)),
        format!("max scaled error {worst:e} (< 1e-12)"),
    );
}

#[test]
fn criterion_02_constant_potential() {
    let start = Instant::now();
    let t = 1.0;
    let mut worst = 0.0f64;
    for q in [0.5, 1.0] {
        let f = Potential::constant(q);
        for s in [0.0, 1.0, 2.0] {
            let w = c(q * q - s * s, 0.0).sqrt();
            let sh = if w.norm() == 0.0 { c(t, 0.0) } else { (w * t).sinh() / w };
            let ph = (I * s * t).exp();
            let a = ph * ((w * t).cosh() - I * s * sh);
            let b = ph * q * sh;
            let ab = ab_coefficients(&f, t, c(s, 0.0), &opts());
            worst = worst.max((ab.a - a).norm()).max((ab.b - b).norm());
        }
        let fd = nlft_partial(&f, 1.0, 0.0, &opts()).unwrap();
        worst = worst.max((fd - q.tanh()).norm());
    }
    verdict(2, worst < 1e-12, start.elapsed(), Some(Duration::from_secs(1)), format!("max error {worst:e} (< 1e-12)"));
}

#[test]
fn criterion_03_determinant_invariants() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut det, mut wr) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let t = rng.gen_range(0.1..=4.0);
        let f = random_piecewise(&mut rng, t, 6, 2.0);
        let (r, phi) = (5.0 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI));
        let res = identity_residuals(&f, t, Complex64::from_polar(r, phi), &opts());
        det = det.max(res.det);
        wr = wr.max(res.wronskian);
    }
    verdict(
        3,
        det < 1e-12 && wr < 1e-10,
        start.elapsed(),
        Some(Duration::from_secs(5)),
        format!("max |det M - 1| {det:e} (< 1e-12), max Wronskian residual {wr:e} (< 1e-10)"),
    );
}

#[test]
fn criterion_04_unimodularity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let t = rng.gen_range(0.1..=4.0);
        let f = random_piecewise(&mut rng, t, 6, 2.0);
        let s = rng.gen_range(-10.0..10.0);
        worst = worst.max(identity_residuals(&f, t, c(s, 0.0), &opts()).unimodular.unwrap());
    }
    verdict(
        4,
        worst < 1e-12,
        start.elapsed(),
        Some(Duration::from_secs(5)),
        format!("max ||a|^2 - |b|^2 - 1| {worst:e} (< 1e-12)"),
    );
}

#[test]
fn criterion_05_nonlinear_parseval() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_ratio = 0.0f64;
    let mut detail = Vec::new();
    for _ in 0..10 {
        let support = rng.gen_range(0.2..=2.0);
        let f = random_piecewise(&mut rng, support, 4, 2.0);
        let r = nonlinear_parseval_residual(&f, support, &ParsevalConfig::default(), &opts()).unwrap();
        let rhs = r.value("rhs");
        let tol = 1e-6 * rhs.max(1.0);
        worst_ratio = worst_ratio.max(r.value("residual") / tol);
        detail.push(format!("{:.4}/{:.4}", r.value("lhs"), rhs));
    }
    verdict(
        5,
        worst_ratio < 1.0,
        start.elapsed(),
        Some(Duration::from_secs(60)),
        format!("max residual / (1e-6 max(1, ||f||^2)) = {worst_ratio:e} (< 1); lhs/rhs pairs {}", detail.join(" ")),
    );
}

#[test]
fn criterion_06_linearization_slope() {
    let start = Instant::now();
    let eps = [1e-1, 1e-2, 1e-3, 1e-4];
    let mut slopes = Vec::new();
    for s in [0.0, 1.0] {
        // ε∫₀¹ e^{2ius} du in closed form
        let lin = if s == 0.0 { c(1.0, 0.0) } else { ((2.0 * I * s).exp() - 1.0) / (2.0 * I * s) };
        let pts: Vec<(f64, f64)> = eps
            .iter()
            .map(|&e| {
                let b = ab_coefficients(&Potential::constant(e), 1.0, c(s, 0.0), &opts()).b;
                (e.ln(), (b - lin * e).norm().ln())
            })
            .collect();
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        slopes.push(sxy / sxx);
    }
    let min = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(6, min >= 1.9, start.elapsed(), Some(Duration::from_secs(2)), format!("slopes {slopes:?} (>= 1.9)"));
}

#[test]
fn criterion_07_zero_velocity() {
    let start = Instant::now();
    let f = Potential::constant(1.0);
    let rect = Rect::new(-4.0, 4.0, -3.0, -0.01).unwrap();
    let z0 = locate_zeros(&f, 1.0, &rect, DEFAULT_NEWTON_TOL, &opts()).unwrap().zeros[0];
    let traj = track_zero(&f, 1.0, 2.0, z0, &TrackConfig::default(), &opts()).unwrap();
    let k = traj.times.len() / 2;
    let (t, z) = (traj.times[k], traj.zeros[k]);
    let hs = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
    let res: Vec<f64> = hs.iter().map(|&h| velocity_residual(&f, t, z, h, &opts()).unwrap()).collect();
    let ratios: Vec<f64> = res.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = ratios.len() == 3 && ratios.iter().all(|&r| r >= 3.5);
    verdict(
        7,
        pass,
        start.elapsed(),
        Some(Duration::from_secs(10)),
        format!("node t = {t:.4}, residuals {res:?}, halving ratios {ratios:?} (>= 3.5)"),
    );
}

/// Zeros of the closed-form `E` in `rect`: strict local minima of `|E|` on
/// an `n × n` grid, polished by Newton on the closed form with a
/// finite-difference derivative, kept when they land inside `rect`.
fn grid_oracle(q: f64, t: f64, rect: [f64; 4], n: usize) -> Vec<Complex64> {
    let [x0, x1, y0, y1] = rect;
    let at =
        |i: usize, j: usize| c(x0 + (x1 - x0) * i as f64 / (n - 1) as f64, y0 + (y1 - y0) * j as f64 / (n - 1) as f64);
    let m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| constant_e(q, t, at(i, j)).norm()).collect()).collect();
    let mut out: Vec<Complex64> = Vec::new();
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let v = m[i][j];
            let is_min = (-1i32..=1)
                .flat_map(|di| (-1i32..=1).map(move |dj| (di, dj)))
                .filter(|&d| d != (0, 0))
                .all(|(di, dj)| v < m[(i as i32 + di) as usize][(j as i32 + dj) as usize]);
            if !is_min {
                continue;
            }
            let mut z = at(i, j);
            for _ in 0..50 {
                let h = 1e-6;
                let d = (constant_e(q, t, z + h) - constant_e(q, t, z - h)) / (2.0 * h);
                let step = constant_e(q, t, z) / d;
                z -= step;
                if step.norm() < 1e-15 {
                    break;
                }
            }
            let inside = z.re > x0 && z.re < x1 && z.im > y0 && z.im < y1;
            if inside && constant_e(q, t, z).norm() < 1e-10 && out.iter().all(|w| (w - z).norm() > 1e-6) {
                out.push(z);
            }
        }
    }
    out
}

#[test]
fn criterion_08_zero_location() {
    let start = Instant::now();
    let f = Potential::constant(1.0);
    let rects = [
        [-4.0, 4.0, -3.0, -0.01],
        [-10.0, 10.0, -4.0, -0.01],
        [0.5, 12.0, -3.5, -0.05],
        [-14.0, -1.0, -2.5, -0.2],
        [-1.5, 1.5, -2.0, -0.1],
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for r in rects {
        let rect = Rect::new(r[0], r[1], r[2], r[3]).unwrap();
        let found = locate_zeros(&f, 1.0, &rect, DEFAULT_NEWTON_TOL, &opts()).unwrap();
        let oracle = grid_oracle(1.0, 1.0, r, 401);
        let moduli_ok =
            found.zeros.iter().all(|&z| hermite_biehler(&f, 1.0, z, false, &opts()).e.norm() < 1e-11 && z.im < 0.0);
        let matched = oracle.iter().all(|o| found.zeros.iter().any(|z| (z - o).norm() < 1e-8));
        pass &= found.count == oracle.len() && found.zeros.len() == found.count && moduli_ok && matched;
        detail.push(format!("{}/{}", found.count, oracle.len()));
    }
    verdict(
        8,
        pass,
        start.elapsed(),
        Some(Duration::from_secs(20)),
        format!("winding/oracle counts {} on 5 rectangles", detail.join(", ")),
    );
}

#[test]
fn criterion_09_lemma1_detector() {
    let start = Instant::now();
    let b = BlaschkeProduct::new(vec![I]).unwrap();
    let ball = lemma1_detect_with(|x| Ok(b.theta_z(c(x, 0.0)).norm()), 0.0, 1.0, 0.05, DEFAULT_EPS0).unwrap();
    let synthetic = ball.is_some_and(|ball| ball.contains(I));
    let f = Potential::zero();
    let triggers = (0..100)
        .filter(|&k| {
            let x = -10.0 + 0.2 * k as f64;
            lemma1_detect(&f, 2.0, x, x + 0.3, 0.05, DEFAULT_EPS0, &opts()).unwrap().is_some()
        })
        .count();
    verdict(
        9,
        synthetic && triggers == 0,
        start.elapsed(),
        Some(Duration::from_secs(2)),
        format!("synthetic ball holds the zero: {synthetic}; free-case triggers {triggers} of 100"),
    );
}

#[test]
fn criterion_10_kernel_proximity() {
    let start = Instant::now();
    let potentials = [
        Potential::constant(1.0).truncate(1.0),
        Potential::piecewise_constant(vec![0.0, 0.5, 1.5], vec![1.0, -0.5]).unwrap(),
    ];
    let (s, cc, n) = (0.5, 1.0, 6);
    let mut pass = true;
    let mut detail = Vec::new();
    for f in &potentials {
        let w = estimate_w(f, s, default_weight_horizon(f), &opts());
        let d20 = kernel_proximity(f, s, cc, 20.0, n, &w, &opts()).value("sup_discrepancy");
        let d80 = kernel_proximity(f, s, cc, 80.0, n, &w, &opts()).value("sup_discrepancy");
        pass &= d80 <= d20;
        detail.push(format!("{d20:e} -> {d80:e}"));
    }
    verdict(
        10,
        pass,
        start.elapsed(),
        Some(Duration::from_secs(60)),
        format!("sup discrepancy t=20 -> t=80: {}", detail.join(", ")),
    );
}

#[test]
fn criterion_11_log_a_identity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let quad = TimeQuadrature::default();
    let (mut worst, mut min_printed) = (0.0f64, f64::INFINITY);
    for _ in 0..20 {
        let support = rng.gen_range(0.2..=3.0);
        let f = random_piecewise(&mut rng, support, 5, 2.0);
        let t = rng.gen_range(0.1..=support + 1.0);
        let s = rng.gen_range(-4.0..4.0);
        let r = log_a_identity_residual(&f, t, s, &quad, &opts());
        worst = worst.max(r.value("residual"));
        min_printed = min_printed.min(r.value("printed_form.residual"));
    }
    let (q, t) = (1.0, 1.0);
    let surface = equivalence_surface(&Potential::constant(q), t, &[0.0], &[0.0], &quad, &opts());
    let diagonal = (surface.values[0][0] - (q * t).cosh().ln()).norm();
    verdict(
        11,
        worst < 1e-7 && diagonal < 1e-8 && min_printed > 0.0,
        start.elapsed(),
        Some(Duration::from_secs(20)),
        format!(
            "max residual {worst:e} (< 1e-7), diagonal vs ln cosh {diagonal:e} (< 1e-8), min printed-form residual {min_printed:e} (> 0)"
        ),
    );
}

#[test]
fn criterion_12_convergence_scans() {
    let start = Instant::now();
    let compact = [
        Potential::constant(1.0).truncate(1.0),
        Potential::piecewise_constant(vec![0.0, 1.0, 2.0], vec![1.0, -1.0]).unwrap(),
    ];
    let mut frozen = 0.0f64;
    for f in &compact {
        let scan = convergence_scan(f, 0.8, &[2.0, 5.0, 10.0, 40.0, 160.0], &opts()).unwrap();
        for a in &scan.values {
            for b in &scan.values {
                frozen = frozen.max((a - b).norm());
            }
        }
    }
    let pd = Potential::preset(Preset::powerdecay());
    let scan = convergence_scan(&pd, 0.8, &[10.0, 20.0, 40.0, 80.0, 160.0], &opts()).unwrap();
    let decreasing = scan.strictly_decreasing();
    verdict(
        12,
        frozen < 1e-13 && decreasing,
        start.elapsed(),
        Some(Duration::from_secs(60)),
        format!(
            "frozen variation {frozen:e} (< 1e-13); powerdecay Cauchy moduli {:?} strictly decreasing: {decreasing}",
            scan.cauchy_moduli
        ),
    );
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_13_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify");
    let run = || {
        let o = Command::new(env!("CARGO_BIN_EXE_nlft-lab"))
            .args(["verify", "--preset", "powerdecay", "--t", "2", "--seed", "17", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.code().is_some());
        (o.stdout, read_all(&out))
    };
    let (stdout1, files1) = run();
    let (stdout2, files2) = run();
    let pass = !files1.is_empty() && stdout1 == stdout2 && files1 == files2;
    verdict(
        13,
        pass,
        start.elapsed(),
        None,
        format!("{} artifacts and stdout byte-identical across two runs: {pass}", files1.len()),
    );
}
