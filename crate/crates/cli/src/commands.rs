//! One function per subcommand, each returning the reports it produced.

use std::f64::consts::TAU;

use nlft_core::convergence::{
    convergence_scan, equivalence_surface, log_a_identity_residual, section4_ode_residuals, TimeQuadrature,
};
use nlft_core::free_case::{free_case_points, free_case_report, FREE_CASE_TOL};
use nlft_core::io::{Cell, CsvTable};
use nlft_core::propagator::{propagate_characteristic, transfer};
use nlft_core::scattering::{ab_coefficients, verify_identities, IdentityTolerances};
use nlft_core::spectral::{
    default_weight_horizon, linearization_error, nonlinear_parseval_residual, parseval_profile, proximity_sweep,
    ParsevalConfig,
};
use nlft_core::zeros::{grid_minimum_zeros, lemma1_detect, velocity_residual, DEFAULT_EPS0, DEFAULT_NEWTON_TOL};
use nlft_core::{
    estimate_w, hermite_biehler, locate_zeros, propagate, track_zero, Complex64, DiagnosticReport, NlftError,
    Potential, PropagationOptions, Rect, Result,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{CommandKind, Resolved};

const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn run(cfg: &Resolved) -> Result<Vec<DiagnosticReport>> {
    let opts = PropagationOptions::default();
    match cfg.command {
        CommandKind::Verify => verify(cfg, &opts),
        CommandKind::Nlft => nlft(cfg, &opts),
        CommandKind::Parseval => parseval(cfg, &opts),
        CommandKind::Kernels => kernels(cfg, &opts),
        CommandKind::Zeros => zeros(cfg, &opts),
        CommandKind::Converge => converge(cfg, &opts),
        CommandKind::Freecase => freecase(cfg, &opts),
    }
}

/// The support end for compactly supported potentials, `fallback` otherwise.
fn default_time(f: &Potential, fallback: f64) -> f64 {
    if f.support_end.is_finite() && f.support_end > 0.0 {
        f.support_end
    } else {
        fallback
    }
}

fn verify_samples(cfg: &Resolved) -> Vec<Complex64> {
    let re = cfg.grid("z_re", "-5:5:11");
    let im = cfg.grid("z_im", "-5:5:11");
    let mut zs: Vec<Complex64> = im.iter().flat_map(|&y| re.iter().map(move |&x| Complex64::new(x, y))).collect();
    let n = cfg.param("random_samples", 32.0).max(0.0) as usize;
    let radius = cfg.param("radius", 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..n {
        let r = radius * rng.gen::<f64>().sqrt();
        zs.push(Complex64::from_polar(r, rng.gen_range(0.0..TAU)));
    }
    for _ in 0..n {
        zs.push(Complex64::new(rng.gen_range(-radius..=radius), 0.0));
    }
    zs
}

fn verify(cfg: &Resolved, opts: &PropagationOptions) -> Result<Vec<DiagnosticReport>> {
    let f = cfg.potential();
    let t = cfg.param("t", 1.0);
    let zs = verify_samples(cfg);
    let identities = verify_identities(f, t, &zs, &IdentityTolerances::default(), opts);

    // semigroup M(t) = M_{t/2→t} M(t/2) and agreement of the two bases,
    // both relative to the size of the factors involved
    let rows: Vec<(f64, f64)> = zs
        .par_iter()
        .map(|&z| {
            let full = propagate(f, t, z, opts).m;
            let first = propagate(f, 0.5 * t, z, opts).m;
            let second = transfer(f, 0.5 * t, t, z, opts);
            let semigroup = full.max_abs_diff(&(second * first)) / (first.max_abs() * second.max_abs()).max(1.0);
            let n = propagate_characteristic(f, t, z, opts).m;
            let (e, e_tilde) = (full.a11 - I * full.a21, full.a12 - I * full.a22);
            let basis = (n.a11 - e).norm().max((n.a12 - e_tilde).norm()) / full.max_abs().max(1.0);
            (semigroup, basis)
        })
        .collect();
    let mut table = CsvTable::new(["re_z", "im_z", "semigroup_residual", "basis_residual"]);
    for (z, r) in zs.iter().zip(&rows) {
        table.push_nums(&[z.re, z.im, r.0, r.1]);
    }
    let mut prop = DiagnosticReport::new("propagator");
    prop.info("t", t).check("max_semigroup_residual", rows.iter().map(|r| r.0).fold(0.0, f64::max), 1e-12).check(
        "max_basis_residual",
        rows.iter().map(|r| r.1).fold(0.0, f64::max),
        1e-12,
    );
    Ok(vec![identities, prop.with_table(table)])
}

fn nlft(cfg: &Resolved, opts: &PropagationOptions) -> Result<Vec<DiagnosticReport>> {
    let f = cfg.potential();
    let t = cfg.param("t", default_time(f, 1.0));
    let s_grid = cfg.grid("s", "-5:5:101");
    let pairs: Vec<_> = s_grid.par_iter().map(|&s| ab_coefficients(f, t, Complex64::new(s, 0.0), opts)).collect();
    let mut table =
        CsvTable::new(["s", "re_a", "im_a", "re_b", "im_b", "re_f_dagger", "im_f_dagger", "unimodular_residual"]);
    let mut worst = 0.0f64;
    for (&s, p) in s_grid.iter().zip(&pairs) {
        let fd = p.reflection();
        let dev = p.unimodular_deviation().abs();
        worst = if dev.is_nan() { f64::NAN } else { worst.max(dev) };
        table.push_nums(&[s, p.a.re, p.a.im, p.b.re, p.b.im, fd.re, fd.im, dev]);
    }
    let mut report = DiagnosticReport::new("nlft");
    report.info("t", t).info("samples", s_grid.len() as f64).check(
        "max_unimodular_residual",
        worst,
        IdentityTolerances::default().unimodular,
    );
    let mut reports = vec![report.with_table(table)];
    let eps = cfg.grid("eps", "log:1e-1:1e-4:4");
    for s in [0.0, 1.0] {
        let mut lin = linearization_error(f, t, s, &eps, opts);
        lin.name = format!("linearization_s{s}");
        reports.push(lin);
    }
    Ok(reports)
}

fn parseval(cfg: &Resolved, opts: &PropagationOptions) -> Result<Vec<DiagnosticReport>> {
    let f = cfg.potential();
    let t = cfg.param("t", default_time(f, 1.0));
    let defaults = ParsevalConfig::default();
    let pcfg = ParsevalConfig {
        tail_tol: cfg.param("tail_tol", defaults.tail_tol),
        s_max_cap: cfg.param("s_max_cap", defaults.s_max_cap),
        ..defaults
    };
    let report = nonlinear_parseval_residual(f, t, &pcfg, opts)?;
    let profile = parseval_profile(f, t, &cfg.grid("s", "-10:10:201"), opts);
    Ok(vec![report.with_table(profile)])
}

fn kernels(cfg: &Resolved, opts: &PropagationOptions) -> Result<Vec<DiagnosticReport>> {
    let f = cfg.potential();
    let s = cfg.param("s", 0.5);
    let c = cfg.param("c", 1.0);
    let grid_n = cfg.param("grid_n", 6.0).max(4.0) as usize;
    let t_w = cfg.param("t_w", default_weight_horizon(f));
    let weight = estimate_w(f, s, t_w, opts);
    let ts = cfg.grid("T", "20:80:4");
    let mut report = proximity_sweep(f, s, c, &ts, grid_n, &weight, opts);
    report.info("s", s).info("c", c).info("w", weight.w).info("t_w", t_w);
    Ok(vec![report])
}

fn zeros(cfg: &Resolved, opts: &PropagationOptions) -> Result<Vec<DiagnosticReport>> {
    let f = cfg.potential();
    let t = cfg.param("t", 1.0);
    let [x0, x1, y0, y1] = cfg.rect.unwrap_or([-4.0, 4.0, -3.0, -0.01]);
    let rect = Rect::new(x0, x1, y0, y1)?;
    let found = locate_zeros(f, t, &rect, DEFAULT_NEWTON_TOL, opts)?;
    let oracle = grid_minimum_zeros(f, t, &rect, cfg.param("oracle_n", 120.0).max(2.0) as usize, opts);

    let moduli: Vec<f64> = found.zeros.par_iter().map(|&z| hermite_biehler(f, t, z, false, opts).e.norm()).collect();
    let mut table = CsvTable::new(["re_z", "im_z", "abs_e"]);
    for (z, m) in found.zeros.iter().zip(&moduli) {
        table.push_nums(&[z.re, z.im, *m]);
    }
    let mut report = DiagnosticReport::new("zeros");
    report
        .info("t", t)
        .info("winding_count", found.count as f64)
        .info("located", found.zeros.len() as f64)
        .info("oracle_count", oracle.len() as f64)
        .info("anomalies", found.anomalies.len() as f64)
        .check("count_minus_oracle", (found.count as f64 - oracle.len() as f64).abs(), 0.0)
        .check("located_minus_count", (found.zeros.len() as f64 - found.count as f64).abs(), 0.0)
        .check("max_abs_e", moduli.iter().copied().fold(0.0, f64::max), DEFAULT_NEWTON_TOL)
        .check_flag("all_in_lower_half_plane", found.zeros.iter().all(|z| z.im < 0.0));
    let mut reports = vec![report.with_table(table)];

    let mut oracle_table = CsvTable::new(["re_z", "im_z"]);
    for z in &oracle {
        oracle_table.push_nums(&[z.re, z.im]);
    }
    reports.push(DiagnosticReport::new("grid_oracle").with_table(oracle_table));

    // The zero speed is only defined where the propagated potential is
    // constant, so the stencil is shrunk to fit inside the piece around t.
    let gap =
        f.breakpoints(t - 1e-2, t + 1e-2, opts.step_budget).iter().map(|b| (b - t).abs()).fold(1e-2 / 0.9, f64::min);
    let h0 = 0.9 * gap;
    let hs = [h0, h0 / 2.0, h0 / 4.0, h0 / 8.0];
    if gap == 0.0 {
        let mut vel = DiagnosticReport::new("zero_velocity");
        vel.info("skipped_t_on_jump", 1.0);
        reports.push(vel);
    } else if let Some(&z) = found.zeros.first() {
        let res = hs.iter().map(|&h| velocity_residual(f, t, z, h, opts)).collect::<Result<Vec<f64>>>()?;
        let mut vel = DiagnosticReport::new("zero_velocity");
        vel.info("re_z", z.re).info("im_z", z.im);
        for (h, r) in hs.iter().zip(&res) {
            vel.info(format!("residual_h{h:e}"), *r);
        }
        let ratio = res.windows(2).map(|w| w[0] / w[1]).fold(f64::INFINITY, f64::min);
        vel.check_at_least("min_halving_ratio", ratio, 3.5);
        reports.push(vel);
    }

    if let Some(t1) = cfg.param_opt("track_to").filter(|&t1| t1 > t) {
        let c = cfg.param("c", 1.0);
        let mut traj_table = CsvTable::new(["zero_index", "t", "re_z", "im_z", "residual", "box_status"]);
        let mut failures = 0usize;
        for (k, &z) in found.zeros.iter().enumerate() {
            let tcfg = nlft_core::zeros::TrackConfig { box_center: Some((z.re, c)), ..Default::default() };
            match track_zero(f, t, t1, z, &tcfg, opts) {
                Ok(traj) => {
                    for row in traj.to_table().rows {
                        let mut cells = vec![Cell::Num(k as f64)];
                        cells.extend(row);
                        traj_table.push(cells);
                    }
                }
                Err(_) => failures += 1,
            }
        }
        let mut tr = DiagnosticReport::new("tracking");
        tr.info("t0", t)
            .info("t1", t1)
            .info("tracked", (found.zeros.len() - failures) as f64)
            .info("failures", failures as f64);
        reports.push(tr.with_table(traj_table));
    }

    let dx = cfg.param("dx", 0.2);
    let eps = cfg.param("eps", 0.05);
    let eps0 = cfg.param("eps0", DEFAULT_EPS0);
    let xs = cfg.grid_opt("x").unwrap_or_else(|| (0..41).map(|k| x0 + (x1 - x0) * k as f64 / 40.0).collect());
    let balls = xs.par_iter().map(|&x| lemma1_detect(f, t, x, x + dx, eps, eps0, opts)).collect::<Result<Vec<_>>>()?;
    let mut det_table = CsvTable::new(["x", "y", "triggered", "radius", "holds_located_zero"]);
    let (mut hits, mut empty) = (0usize, 0usize);
    for (&x, b) in xs.iter().zip(&balls) {
        let (trig, radius, holds) = match b {
            Some(ball) => {
                hits += 1;
                let holds = ball.contains_theta_zero(&found.zeros);
                empty += usize::from(!holds);
                (1.0, ball.radius, if holds { 1.0 } else { 0.0 })
            }
            None => (0.0, 0.0, 0.0),
        };
        det_table.push_nums(&[x, x + dx, trig, radius, holds]);
    }
    let mut det = DiagnosticReport::new("lemma1_detector");
    det.info("eps", eps)
        .info("eps0", eps0)
        .info("triggered", hits as f64)
        .info("balls_without_located_zero", empty as f64);
    reports.push(det.with_table(det_table));
    Ok(reports)
}

const FROZEN_TOL: f64 = 1e-13;

fn converge(cfg: &Resolved, opts: &PropagationOptions) -> Result<Vec<DiagnosticReport>> {
    let f = cfg.potential();
    let s = cfg.param("s", 0.5);
    let t = cfg.param("t", default_time(f, 2.0));
    let ts = cfg.grid("T", "10:160:16");
    let scan = convergence_scan(f, s, &ts, opts)?;
    let mut report = DiagnosticReport::new("convergence_scan");
    report.info("s", s);
    // Past the support, or once a fast-decaying tail is below roundoff over
    // the whole grid, the values are frozen and a strict decrease is noise.
    let at_roundoff = scan.cauchy_moduli.iter().all(|&m| m < FROZEN_TOL);
    let frozen: Vec<Complex64> = scan
        .t_grid
        .iter()
        .zip(&scan.values)
        .filter(|(&tt, _)| tt >= f.support_end || at_roundoff)
        .map(|(_, v)| *v)
        .collect();
    if !frozen.is_empty() {
        let spread = frozen.iter().flat_map(|a| frozen.iter().map(move |b| (a - b).norm())).fold(0.0, f64::max);
        report.info("support_end", f.support_end).check("frozen_variation", spread, FROZEN_TOL);
    } else {
        report.check_flag("cauchy_strictly_decreasing", scan.strictly_decreasing());
    }
    let mut reports = vec![report.with_table(scan.to_table())];

    let quad = TimeQuadrature::default();
    reports.push(log_a_identity_residual(f, t, s, &quad, opts));
    // The finite differences need f continuous at the evaluation time, which
    // the default support end is not.
    let h = cfg.param("h", 1e-4);
    let t_ode = cfg.param_opt("t_ode").unwrap_or_else(|| {
        let mid = 0.5 * t;
        f.segments(0.0, t, opts.step_budget)
            .iter()
            .find(|g| g.start <= mid && mid < g.end)
            .map_or(mid, |g| 0.5 * (g.start + g.end))
    });
    if !(t_ode > h && h > 0.0) {
        return Err(NlftError::InvalidArgument(format!("need 0 < h < t_ode, got h = {h}, t_ode = {t_ode}")));
    }
    reports.push(section4_ode_residuals(f, t_ode, s, h, opts));

    let default_s = format!("{}:{}:5", s - 1.0, s + 1.0);
    let s_grid = cfg.grid("surface_s", &default_s);
    let y_grid = cfg.grid_opt("surface_y").unwrap_or_else(|| s_grid.clone());
    let surface = equivalence_surface(f, t, &s_grid, &y_grid, &quad, opts);
    let mut diag = 0.0f64;
    let mut diag_points = 0usize;
    for (i, s_i) in s_grid.iter().enumerate() {
        if let Some(j) = y_grid.iter().position(|y| y == s_i) {
            diag = diag.max((surface.values[i][j] - surface.diagonal_reference[i]).norm());
            diag_points += 1;
        }
    }
    let mut sr = DiagnosticReport::new("equivalence_surface");
    sr.info("t", t).info("diagonal_points", diag_points as f64);
    if diag_points > 0 {
        sr.check("max_diagonal_residual", diag, 1e-7);
    }
    reports.push(sr.with_table(surface.to_table()));
    Ok(reports)
}

fn freecase(cfg: &Resolved, opts: &PropagationOptions) -> Result<Vec<DiagnosticReport>> {
    let ts = cfg.grid_opt("t").unwrap_or_else(|| vec![0.5, 1.0, 5.0]);
    Ok(vec![free_case_report(&ts, &free_case_points(), FREE_CASE_TOL, opts)?])
}
