//! Potentials `f` driving the Dirac system, their truncations `f·χ(0,T)`, and
//! the integrals of `f` the diagnostics need.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{NlftError, Result};
use crate::quadrature::{simpson_doubling, Integral};

/// Relative tolerance for Simpson doubling on analytic presets.
pub const PRESET_QUADRATURE_REL_TOL: f64 = 1e-10;
const PRESET_QUADRATURE_MAX_PANELS: usize = 1 << 24;

/// Default σ for [`Potential::is_sigma_interval`].
pub const DEFAULT_SIGMA: f64 = 0.01;

/// Closed-form potentials evaluated analytically.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Preset {
    /// `f ≡ 0`.
    Free,
    /// `amplitude · (1 + t)^(-exponent)`; in L² but not L¹ for exponent in (1/2, 1].
    PowerDecay { amplitude: f64, exponent: f64 },
    /// `amplitude · exp(-((t - center) / width)²)`.
    Gaussian { amplitude: f64, center: f64, width: f64 },
    /// `amplitude · sin(frequency · t) · (1 + t)^(-exponent)`.
    Oscillating { amplitude: f64, frequency: f64, exponent: f64 },
}

impl Preset {
    /// `(1 + t)^(-0.7)`, the default L²-but-not-L¹ test potential.
    pub fn powerdecay() -> Self {
        Preset::PowerDecay { amplitude: 1.0, exponent: 0.7 }
    }

    /// Builds a preset from its identifier and a parameter map; missing
    /// parameters take their defaults.
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        let known: &[&str] = match name {
            "free" | "zero" => &[],
            "powerdecay" => &["amplitude", "exponent"],
            "gaussian" => &["amplitude", "center", "width"],
            "oscillating" => &["amplitude", "frequency", "exponent"],
            other => return Err(NlftError::InvalidPotential(format!("unknown preset `{other}`"))),
        };
        if let Some(bad) = params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(NlftError::InvalidPotential(format!("preset `{name}` has no parameter `{bad}`")));
        }
        let preset = match name {
            "powerdecay" => Preset::PowerDecay { amplitude: get("amplitude", 1.0), exponent: get("exponent", 0.7) },
            "gaussian" => Preset::Gaussian {
                amplitude: get("amplitude", 1.0),
                center: get("center", 0.0),
                width: get("width", 1.0),
            },
            "oscillating" => Preset::Oscillating {
                amplitude: get("amplitude", 1.0),
                frequency: get("frequency", 1.0),
                exponent: get("exponent", 0.7),
            },
            _ => Preset::Free,
        };
        preset.validate()?;
        Ok(preset)
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Preset::Free => true,
            Preset::PowerDecay { amplitude, exponent } => amplitude.is_finite() && exponent.is_finite(),
            Preset::Gaussian { amplitude, center, width } => {
                amplitude.is_finite() && center.is_finite() && width.is_finite() && width > 0.0
            }
            Preset::Oscillating { amplitude, frequency, exponent } => {
                amplitude.is_finite() && frequency.is_finite() && exponent.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(NlftError::InvalidPotential(format!("invalid preset parameters {self:?}")))
        }
    }

    fn eval(&self, t: f64) -> f64 {
        match *self {
            Preset::Free => 0.0,
            Preset::PowerDecay { amplitude, exponent } => amplitude * (1.0 + t).powf(-exponent),
            Preset::Gaussian { amplitude, center, width } => {
                let u = (t - center) / width;
                amplitude * (-u * u).exp()
            }
            Preset::Oscillating { amplitude, frequency, exponent } => {
                amplitude * (frequency * t).sin() * (1.0 + t).powf(-exponent)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    Constant {
        q: f64,
    },
    /// `values[k]` on `[breaks[k], breaks[k+1])`, zero outside `[breaks[0], breaks[n])`.
    PiecewiseConstant {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
    /// Sample `k` sits at `origin + k·step` and holds on the cell of width
    /// `step` centred there; zero outside the sampled range.
    Sampled {
        origin: f64,
        step: f64,
        samples: Vec<f64>,
    },
    Preset(Preset),
}

/// A real potential on `[0, ∞)`, identically zero from `support_end` on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Potential {
    pub kind: PotentialKind,
    #[serde(serialize_with = "serialize_support_end")]
    pub support_end: f64,
}

fn serialize_support_end<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

/// Maximal interval on which the (discretised) potential is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

impl Potential {
    pub fn zero() -> Self {
        Self { kind: PotentialKind::Preset(Preset::Free), support_end: 0.0 }
    }

    pub fn constant(q: f64) -> Self {
        assert!(q.is_finite(), "constant potential must be finite");
        Self { kind: PotentialKind::Constant { q }, support_end: f64::INFINITY }
    }

    pub fn piecewise_constant(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 || values.len() + 1 != breaks.len() {
            return Err(NlftError::InvalidPotential(format!(
                "piecewise constant needs len(values) = len(breaks) - 1 >= 1, got {} breaks and {} values",
                breaks.len(),
                values.len()
            )));
        }
        if breaks[0] < 0.0 || breaks.windows(2).any(|w| w[1] <= w[0]) || breaks.iter().any(|b| !b.is_finite()) {
            return Err(NlftError::InvalidPotential(
                "breaks must be finite, non-negative and strictly ascending".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NlftError::InvalidPotential("piecewise values must be finite".into()));
        }
        let support_end = *breaks.last().unwrap();
        Ok(Self { kind: PotentialKind::PiecewiseConstant { breaks, values }, support_end })
    }

    pub fn sampled(origin: f64, step: f64, samples: Vec<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) || !origin.is_finite() {
            return Err(NlftError::InvalidPotential(format!("sampled potential needs step > 0, got {step}")));
        }
        if samples.is_empty() || samples.iter().any(|v| !v.is_finite()) {
            return Err(NlftError::InvalidPotential("samples must be non-empty and finite".into()));
        }
        let support_end = (origin + (samples.len() as f64 - 0.5) * step).max(0.0);
        Ok(Self { kind: PotentialKind::Sampled { origin, step, samples }, support_end })
    }

    pub fn preset(preset: Preset) -> Self {
        let support_end = if preset == Preset::Free { 0.0 } else { f64::INFINITY };
        Self { kind: PotentialKind::Preset(preset), support_end }
    }

    /// Loads a two-column `t,f(t)` CSV on a uniform grid. A non-numeric first
    /// line is treated as a header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
                return Err(NlftError::InvalidPotential(format!("line {}: expected two columns", lineno + 1)));
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(t), Ok(v)) => rows.push((t, v)),
                _ if rows.is_empty() && lineno == 0 => continue,
                _ => return Err(NlftError::InvalidPotential(format!("line {}: not numeric", lineno + 1))),
            }
        }
        match rows.len() {
            0 => Err(NlftError::InvalidPotential("empty sample file".into())),
            1 => Err(NlftError::InvalidPotential("need at least two samples to infer the grid step".into())),
            _ => {
                let step = rows[1].0 - rows[0].0;
                for (k, &(t, _)) in rows.iter().enumerate() {
                    let expected = rows[0].0 + k as f64 * step;
                    if (t - expected).abs() > 1e-9 * step.abs().max(expected.abs()) {
                        return Err(NlftError::InvalidPotential(format!(
                            "row {k}: t = {t} is off the uniform grid (expected {expected})"
                        )));
                    }
                }
                Self::sampled(rows[0].0, step, rows.into_iter().map(|r| r.1).collect())
            }
        }
    }

    /// `f_T = f·χ(0,T)`.
    pub fn truncate(&self, cutoff: f64) -> Self {
        assert!(cutoff >= 0.0, "truncation time must be non-negative");
        Self { kind: self.kind.clone(), support_end: self.support_end.min(cutoff) }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let kind = match &self.kind {
            PotentialKind::Constant { q } => PotentialKind::Constant { q: q * factor },
            PotentialKind::PiecewiseConstant { breaks, values } => PotentialKind::PiecewiseConstant {
                breaks: breaks.clone(),
                values: values.iter().map(|v| v * factor).collect(),
            },
            PotentialKind::Sampled { origin, step, samples } => PotentialKind::Sampled {
                origin: *origin,
                step: *step,
                samples: samples.iter().map(|v| v * factor).collect(),
            },
            PotentialKind::Preset(p) => PotentialKind::Preset(match *p {
                Preset::Free => Preset::Free,
                Preset::PowerDecay { amplitude, exponent } => {
                    Preset::PowerDecay { amplitude: amplitude * factor, exponent }
                }
                Preset::Gaussian { amplitude, center, width } => {
                    Preset::Gaussian { amplitude: amplitude * factor, center, width }
                }
                Preset::Oscillating { amplitude, frequency, exponent } => {
                    Preset::Oscillating { amplitude: amplitude * factor, frequency, exponent }
                }
            }),
        };
        Self { kind, support_end: self.support_end }
    }

    /// True when the potential is piecewise constant, so propagation and the
    /// integrals of `f` are exact.
    pub fn is_piecewise_constant(&self) -> bool {
        !matches!(
            self.kind,
            PotentialKind::Preset(Preset::PowerDecay { .. } | Preset::Gaussian { .. } | Preset::Oscillating { .. })
        )
    }

    pub fn is_zero(&self) -> bool {
        self.support_end <= 0.0
            || match &self.kind {
                PotentialKind::Constant { q } => *q == 0.0,
                PotentialKind::PiecewiseConstant { values, .. } => values.iter().all(|v| *v == 0.0),
                PotentialKind::Sampled { samples, .. } => samples.iter().all(|v| *v == 0.0),
                PotentialKind::Preset(p) => match *p {
                    Preset::Free => true,
                    Preset::PowerDecay { amplitude, .. }
                    | Preset::Gaussian { amplitude, .. }
                    | Preset::Oscillating { amplitude, .. } => amplitude == 0.0,
                },
            }
    }

    fn eval_untruncated(&self, t: f64) -> f64 {
        match &self.kind {
            PotentialKind::Constant { q } => *q,
            PotentialKind::PiecewiseConstant { breaks, values } => {
                if t < breaks[0] || t >= breaks[breaks.len() - 1] {
                    return 0.0;
                }
                // last break <= t
                let k = breaks.partition_point(|&b| b <= t) - 1;
                values[k]
            }
            PotentialKind::Sampled { origin, step, samples } => {
                let k = ((t - origin) / step + 0.5).floor();
                if k < 0.0 || k >= samples.len() as f64 {
                    0.0
                } else {
                    samples[k as usize]
                }
            }
            PotentialKind::Preset(p) => p.eval(t),
        }
    }

    /// `f(t)`; zero for `t < 0` and for `t >= support_end`.
    pub fn evaluate(&self, t: f64) -> f64 {
        if t < 0.0 || t >= self.support_end {
            0.0
        } else {
            self.eval_untruncated(t)
        }
    }

    /// Points in the open interval `(t0, t1)` where the potential may jump,
    /// ascending. Analytic presets are cut on the global grid `k / step_budget`.
    pub fn breakpoints(&self, t0: f64, t1: f64, step_budget: usize) -> Vec<f64> {
        let mut pts: Vec<f64> = Vec::new();
        let inside = |x: f64| x > t0 && x < t1;
        let active_end = t1.min(self.support_end);
        match &self.kind {
            PotentialKind::Constant { .. } => {}
            PotentialKind::PiecewiseConstant { breaks, .. } => {
                pts.extend(breaks.iter().copied().filter(|&b| inside(b)))
            }
            PotentialKind::Sampled { origin, step, samples } => {
                for k in 0..=samples.len() {
                    let b = origin + (k as f64 - 0.5) * step;
                    if inside(b) {
                        pts.push(b);
                    }
                }
            }
            PotentialKind::Preset(Preset::Free) => {}
            PotentialKind::Preset(_) => {
                let h = 1.0 / step_budget.max(1) as f64;
                let first = (t0 / h).floor() as i64 + 1;
                let mut k = first;
                loop {
                    let b = k as f64 * h;
                    if b >= active_end {
                        break;
                    }
                    if inside(b) {
                        pts.push(b);
                    }
                    k += 1;
                }
            }
        }
        if inside(self.support_end) {
            pts.push(self.support_end);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Partition of `[t0, t1]` into constant pieces. Analytic presets are
    /// sampled at the midpoint of the whole grid cell (clipped to the
    /// support) holding each piece, so the discretised potential does not
    /// depend on where `[t0, t1]` starts or ends.
    pub fn segments(&self, t0: f64, t1: f64, step_budget: usize) -> Vec<Segment> {
        if t1 <= t0 {
            return Vec::new();
        }
        let mut edges = Vec::with_capacity(8);
        edges.push(t0);
        edges.extend(self.breakpoints(t0, t1, step_budget));
        edges.push(t1);
        let sample_at = |mid: f64| -> f64 {
            if self.is_piecewise_constant() || mid < 0.0 || mid >= self.support_end {
                return mid;
            }
            let h = 1.0 / step_budget.max(1) as f64;
            let k = (mid / h).floor();
            0.5 * (k * h + ((k + 1.0) * h).min(self.support_end))
        };
        edges
            .windows(2)
            .map(|w| Segment { start: w[0], end: w[1], value: self.evaluate(sample_at(0.5 * (w[0] + w[1]))) })
            .collect()
    }

    fn integrate_map<G: Fn(f64) -> f64>(&self, t0: f64, t1: f64, g: G) -> Integral {
        assert!(t0 <= t1, "integration bounds must satisfy t0 <= t1");
        let t0 = t0.max(0.0);
        let t1 = t1.min(self.support_end);
        if t1 <= t0 {
            return Integral::exact(0.0);
        }
        if self.is_piecewise_constant() {
            let terms: Vec<f64> = self.segments(t0, t1, 1).iter().map(|s| g(s.value) * s.len()).collect();
            return Integral::exact(crate::quadrature::pairwise_sum(&terms));
        }
        simpson_doubling(
            |t| g(self.eval_untruncated(t)),
            t0,
            t1,
            PRESET_QUADRATURE_REL_TOL,
            PRESET_QUADRATURE_MAX_PANELS,
        )
    }

    /// `∫_{t0}^{t1} f(u)² du`, exact for piecewise-constant kinds.
    pub fn l2_norm_sq(&self, t0: f64, t1: f64) -> Integral {
        self.integrate_map(t0, t1, |v| v * v)
    }

    pub fn integral(&self, t0: f64, t1: f64) -> Integral {
        self.integrate_map(t0, t1, |v| v)
    }

    pub fn abs_integral(&self, t0: f64, t1: f64) -> Integral {
        self.integrate_map(t0, t1, f64::abs)
    }

    /// `|∫ f| >= (1 - σ) ∫ |f|` on `(t0, t1)`.
    pub fn is_sigma_interval(&self, t0: f64, t1: f64, sigma: f64) -> bool {
        assert!(t0 < t1, "sigma interval needs t0 < t1");
        assert!(sigma > 0.0 && sigma < 1.0, "sigma must lie in (0, 1)");
        let signed = self.integral(t0, t1).value.abs();
        let total = self.abs_integral(t0, t1).value;
        signed >= (1.0 - sigma) * total
    }

    /// Jumps `f(τ+) - f(τ-)` of the piecewise-constant form on `[0, t]`,
    /// including the switch-on at 0 and the cut at `t`.
    pub fn jumps(&self, t: f64, step_budget: usize) -> Vec<(f64, f64)> {
        let segs = self.segments(0.0, t, step_budget);
        let mut out = Vec::with_capacity(segs.len() + 1);
        let mut prev = 0.0;
        for s in &segs {
            if s.value != prev {
                out.push((s.start, s.value - prev));
            }
            prev = s.value;
        }
        if prev != 0.0 {
            out.push((t, -prev));
        }
        out
    }
}
