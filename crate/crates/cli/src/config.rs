//! Experiment configuration: TOML file, command-line overrides and the
//! per-command schema they are validated against.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use nlft_core::{Potential, Preset};
use serde::Serialize;
use toml::{Table, Value};

/// A configuration problem, located by its field path (`params.t`,
/// `potential.breaks`, `--rect`, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Verify,
    Nlft,
    Parseval,
    Kernels,
    Zeros,
    Converge,
    Freecase,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Verify => "verify",
            CommandKind::Nlft => "nlft",
            CommandKind::Parseval => "parseval",
            CommandKind::Kernels => "kernels",
            CommandKind::Zeros => "zeros",
            CommandKind::Converge => "converge",
            CommandKind::Freecase => "freecase",
        }
    }
}

/// Parameters and grids a command accepts.
pub struct Schema {
    pub params: &'static [&'static str],
    /// The first grid is the one `--grid start:stop:count` targets.
    pub grids: &'static [&'static str],
    pub needs_potential: bool,
    pub uses_rect: bool,
}

pub fn schema(cmd: CommandKind) -> Schema {
    match cmd {
        CommandKind::Verify => Schema {
            params: &["t", "random_samples", "radius"],
            grids: &["z_re", "z_im"],
            needs_potential: true,
            uses_rect: false,
        },
        CommandKind::Nlft => Schema { params: &["t"], grids: &["s", "eps"], needs_potential: true, uses_rect: false },
        CommandKind::Parseval => {
            Schema { params: &["t", "tail_tol", "s_max_cap"], grids: &["s"], needs_potential: true, uses_rect: false }
        }
        CommandKind::Kernels => {
            Schema { params: &["s", "c", "grid_n", "t_w"], grids: &["T"], needs_potential: true, uses_rect: false }
        }
        CommandKind::Zeros => Schema {
            params: &["t", "oracle_n", "track_to", "c", "eps", "eps0", "dx"],
            grids: &["x"],
            needs_potential: true,
            uses_rect: true,
        },
        CommandKind::Converge => Schema {
            params: &["s", "t", "h", "t_ode"],
            grids: &["T", "surface_s", "surface_y"],
            needs_potential: true,
            uses_rect: false,
        },
        CommandKind::Freecase => Schema { params: &[], grids: &["t"], needs_potential: false, uses_rect: false },
    }
}

/// Grid specification: `start:stop:count` (inclusive, uniform),
/// `log:start:stop:count` (geometric) or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Linear { start: f64, stop: f64, count: usize },
    Log { start: f64, stop: f64, count: usize },
    List { values: Vec<f64> },
}

impl GridSpec {
    pub fn parse(text: &str, path: &str) -> ConfigResult<Self> {
        let (log, body) = match text.strip_prefix("log:") {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let parts: Vec<&str> = body.split(':').map(str::trim).collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(ConfigError::new(path, format!("expected [log:]start:stop:count, got `{text}`")));
        };
        let start = parse_f64(a, path)?;
        let stop = parse_f64(b, path)?;
        let count: usize =
            n.parse().map_err(|_| ConfigError::new(path, format!("count `{n}` is not a non-negative integer")))?;
        let spec = if log { GridSpec::Log { start, stop, count } } else { GridSpec::Linear { start, stop, count } };
        spec.validate(path)?;
        Ok(spec)
    }

    fn from_value(v: &Value, path: &str) -> ConfigResult<Self> {
        match v {
            Value::String(s) => Self::parse(s, path),
            Value::Array(items) => {
                let values = items
                    .iter()
                    .enumerate()
                    .map(|(k, x)| as_f64(x, &format!("{path}[{k}]")))
                    .collect::<ConfigResult<Vec<f64>>>()?;
                let spec = GridSpec::List { values };
                spec.validate(path)?;
                Ok(spec)
            }
            _ => Err(ConfigError::new(path, "expected a \"start:stop:count\" string or an array of numbers")),
        }
    }

    fn validate(&self, path: &str) -> ConfigResult<()> {
        match self {
            GridSpec::Linear { count, .. } | GridSpec::Log { count, .. } if *count == 0 => {
                Err(ConfigError::new(path, "grid must be nonempty"))
            }
            GridSpec::Log { start, stop, .. } if !(*start > 0.0 && *stop > 0.0) => {
                Err(ConfigError::new(path, "log grid needs positive endpoints"))
            }
            GridSpec::List { values } if values.is_empty() => Err(ConfigError::new(path, "grid must be nonempty")),
            _ => Ok(()),
        }
    }

    pub fn points(&self) -> Vec<f64> {
        match *self {
            GridSpec::Linear { start, stop, count } => {
                if count == 1 {
                    return vec![start];
                }
                let h = (stop - start) / (count - 1) as f64;
                (0..count).map(|k| if k + 1 == count { stop } else { start + h * k as f64 }).collect()
            }
            GridSpec::Log { start, stop, count } => {
                if count == 1 {
                    return vec![start];
                }
                let (a, b) = (start.log10(), stop.log10());
                let r = (b - a) / (count - 1) as f64;
                (0..count).map(|k| if k + 1 == count { stop } else { 10f64.powf(a + r * k as f64) }).collect()
            }
            GridSpec::List { ref values } => values.clone(),
        }
    }
}

/// Declarative potential, as written in a config file or on the command
/// line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialSpec {
    pub kind: String,
    pub numbers: BTreeMap<String, f64>,
    pub lists: BTreeMap<String, Vec<f64>>,
    pub path: Option<PathBuf>,
}

const PRESET_NAMES: &[&str] = &["free", "zero", "powerdecay", "gaussian", "oscillating"];

impl PotentialSpec {
    /// `kind[:key=value,...]`; list values are `/`-separated, e.g.
    /// `piecewise:breaks=0/1/2,values=1/-1`.
    pub fn parse(text: &str, path: &str) -> ConfigResult<Self> {
        let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut spec = PotentialSpec {
            kind: kind.trim().to_string(),
            numbers: BTreeMap::new(),
            lists: BTreeMap::new(),
            path: None,
        };
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let Some((key, value)) = item.split_once('=') else {
                return Err(ConfigError::new(path, format!("expected key=value, got `{item}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            let field = format!("{path}.{key}");
            if key == "path" {
                spec.path = Some(PathBuf::from(value));
            } else if matches!(key, "breaks" | "values" | "samples") {
                let list = value.split('/').map(|v| parse_f64(v.trim(), &field)).collect::<ConfigResult<Vec<f64>>>()?;
                spec.lists.insert(key.to_string(), list);
            } else {
                spec.numbers.insert(key.to_string(), parse_f64(value, &field)?);
            }
        }
        Ok(spec)
    }

    fn from_value(v: &Value, path: &str, base: &Path) -> ConfigResult<Self> {
        match v {
            Value::String(s) => {
                let mut spec = Self::parse(s, path)?;
                spec.path = spec.path.map(|p| base.join(p));
                Ok(spec)
            }
            Value::Table(t) => {
                let kind = match t.get("kind") {
                    Some(Value::String(k)) => k.clone(),
                    Some(_) => return Err(ConfigError::new(format!("{path}.kind"), "expected a string")),
                    None => return Err(ConfigError::new(format!("{path}.kind"), "missing")),
                };
                let mut spec = PotentialSpec { kind, numbers: BTreeMap::new(), lists: BTreeMap::new(), path: None };
                for (key, value) in t.iter().filter(|(k, _)| k.as_str() != "kind") {
                    let field = format!("{path}.{key}");
                    match (key.as_str(), value) {
                        ("path", Value::String(p)) => spec.path = Some(base.join(p)),
                        ("path", _) => return Err(ConfigError::new(field, "expected a string")),
                        (_, Value::Array(items)) => {
                            let list = items
                                .iter()
                                .enumerate()
                                .map(|(k, x)| as_f64(x, &format!("{field}[{k}]")))
                                .collect::<ConfigResult<Vec<f64>>>()?;
                            spec.lists.insert(key.clone(), list);
                        }
                        _ => {
                            spec.numbers.insert(key.clone(), as_f64(value, &field)?);
                        }
                    }
                }
                Ok(spec)
            }
            _ => Err(ConfigError::new(path, "expected a spec string or a table with `kind`")),
        }
    }

    fn allowed(&self, path: &str) -> ConfigResult<(&'static [&'static str], &'static [&'static str])> {
        Ok(match self.kind.as_str() {
            "constant" => (&["q", "T"], &[]),
            "piecewise" => (&["T"], &["breaks", "values"]),
            "sampled" => (&["origin", "step", "T"], &["samples"]),
            "csv" => (&["T"], &[]),
            "free" | "zero" => (&[], &[]),
            "powerdecay" => (&["amplitude", "exponent", "T"], &[]),
            "gaussian" => (&["amplitude", "center", "width", "T"], &[]),
            "oscillating" => (&["amplitude", "frequency", "exponent", "T"], &[]),
            other => {
                return Err(ConfigError::new(
                    format!("{path}.kind"),
                    format!(
                        "unknown kind `{other}` (expected constant, piecewise, sampled, csv, free, powerdecay, gaussian or oscillating)"
                    ),
                ))
            }
        })
    }

    fn number(&self, key: &str, path: &str) -> ConfigResult<f64> {
        self.numbers.get(key).copied().ok_or_else(|| ConfigError::new(format!("{path}.{key}"), "missing"))
    }

    fn list(&self, key: &str, path: &str) -> ConfigResult<Vec<f64>> {
        self.lists.get(key).cloned().ok_or_else(|| ConfigError::new(format!("{path}.{key}"), "missing"))
    }

    pub fn build(&self, path: &str) -> ConfigResult<Potential> {
        let (numbers, lists) = self.allowed(path)?;
        if let Some(k) = self.numbers.keys().find(|k| !numbers.contains(&k.as_str())) {
            return Err(ConfigError::new(format!("{path}.{k}"), format!("not a parameter of `{}`", self.kind)));
        }
        if let Some(k) = self.lists.keys().find(|k| !lists.contains(&k.as_str())) {
            return Err(ConfigError::new(format!("{path}.{k}"), format!("not a list parameter of `{}`", self.kind)));
        }
        if self.path.is_some() && self.kind != "csv" {
            return Err(ConfigError::new(format!("{path}.path"), format!("not a parameter of `{}`", self.kind)));
        }
        let invalid = |e: nlft_core::NlftError| ConfigError::new(path, e.to_string());
        let f = match self.kind.as_str() {
            "constant" => {
                let q = self.number("q", path)?;
                if !q.is_finite() {
                    return Err(ConfigError::new(format!("{path}.q"), "must be finite"));
                }
                Potential::constant(q)
            }
            "piecewise" => Potential::piecewise_constant(self.list("breaks", path)?, self.list("values", path)?)
                .map_err(invalid)?,
            "sampled" => Potential::sampled(
                self.number("origin", path)?,
                self.number("step", path)?,
                self.list("samples", path)?,
            )
            .map_err(invalid)?,
            "csv" => {
                let file = self.path.as_ref().ok_or_else(|| ConfigError::new(format!("{path}.path"), "missing"))?;
                let text = std::fs::read_to_string(file)
                    .map_err(|e| ConfigError::new(format!("{path}.path"), format!("{}: {e}", file.display())))?;
                Potential::from_csv(&text).map_err(invalid)?
            }
            name => {
                let params: BTreeMap<String, f64> =
                    self.numbers.iter().filter(|(k, _)| k.as_str() != "T").map(|(k, v)| (k.clone(), *v)).collect();
                Potential::preset(Preset::from_name(name, &params).map_err(invalid)?)
            }
        };
        match self.numbers.get("T") {
            Some(&t) if !(t >= 0.0 && t.is_finite()) => {
                Err(ConfigError::new(format!("{path}.T"), "truncation time must be finite and non-negative"))
            }
            Some(&t) => Ok(f.truncate(t)),
            None => Ok(f),
        }
    }
}

/// Everything a command run needs after merging file and flags.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub command: CommandKind,
    pub potential: Option<PotentialSpec>,
    #[serde(skip)]
    pub built: Option<Potential>,
    pub params: BTreeMap<String, f64>,
    pub rect: Option<[f64; 4]>,
    pub grids: BTreeMap<String, GridSpec>,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Resolved {
    pub fn potential(&self) -> &Potential {
        self.built.as_ref().expect("commands needing a potential are validated to have one")
    }

    pub fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    pub fn param_opt(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn grid(&self, name: &str, default: &str) -> Vec<f64> {
        match self.grids.get(name) {
            Some(g) => g.points(),
            None => GridSpec::parse(default, name).expect("built-in grid defaults parse").points(),
        }
    }

    pub fn grid_opt(&self, name: &str) -> Option<Vec<f64>> {
        self.grids.get(name).map(GridSpec::points)
    }
}

/// Command-line overrides, already split from clap.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub potential: Option<String>,
    pub preset: Option<String>,
    pub t: Option<f64>,
    pub s: Option<f64>,
    pub c: Option<f64>,
    pub rect: Option<String>,
    pub grids: Vec<String>,
    pub sets: Vec<String>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_OUTPUT_DIR: &str = "nlft-out";

fn parse_f64(text: &str, path: &str) -> ConfigResult<f64> {
    let v: f64 = text.trim().parse().map_err(|_| ConfigError::new(path, format!("`{text}` is not a number")))?;
    if v.is_nan() {
        return Err(ConfigError::new(path, "NaN is not allowed"));
    }
    Ok(v)
}

fn as_f64(v: &Value, path: &str) -> ConfigResult<f64> {
    match v {
        Value::Float(x) if !x.is_nan() => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(ConfigError::new(path, "expected a number")),
    }
}

pub fn parse_rect(text: &str, path: &str) -> ConfigResult<[f64; 4]> {
    let v = text.split(',').map(|x| parse_f64(x, path)).collect::<ConfigResult<Vec<f64>>>()?;
    let [x0, x1, y0, y1] = v.as_slice() else {
        return Err(ConfigError::new(path, format!("expected x0,x1,y0,y1, got `{text}`")));
    };
    check_rect([*x0, *x1, *y0, *y1], path)
}

fn check_rect(r: [f64; 4], path: &str) -> ConfigResult<[f64; 4]> {
    if !(r[0] < r[1] && r[2] < r[3]) || r.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError::new(path, "rectangle needs x0 < x1 and y0 < y1"));
    }
    Ok(r)
}

/// File contents before the command schema is applied.
#[derive(Debug, Default)]
struct FileConfig {
    potential: Option<PotentialSpec>,
    params: BTreeMap<String, (String, f64)>,
    rect: Option<[f64; 4]>,
    grids: BTreeMap<String, GridSpec>,
    tolerances: BTreeMap<String, f64>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    threads: Option<usize>,
}

fn read_file(path: &Path) -> ConfigResult<FileConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError::new("--config", format!("{}: {e}", path.display())))?;
    parse_file(&text, path.parent().unwrap_or(Path::new(".")))
}

fn parse_file(text: &str, base: &Path) -> ConfigResult<FileConfig> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::new("config", e.to_string()))?;
    let mut cfg = FileConfig::default();
    for (key, value) in &table {
        match key.as_str() {
            "seed" => match value {
                Value::Integer(i) if *i >= 0 => cfg.seed = Some(*i as u64),
                _ => return Err(ConfigError::new("seed", "expected a non-negative integer")),
            },
            "output_dir" => match value {
                Value::String(s) => cfg.output_dir = Some(base.join(s)),
                _ => return Err(ConfigError::new("output_dir", "expected a string")),
            },
            "threads" => match value {
                Value::Integer(i) if *i >= 1 => cfg.threads = Some(*i as usize),
                _ => return Err(ConfigError::new("threads", "expected a positive integer")),
            },
            "potential" => cfg.potential = Some(PotentialSpec::from_value(value, "potential", base)?),
            "params" => {
                let Value::Table(t) = value else {
                    return Err(ConfigError::new("params", "expected a table"));
                };
                for (k, v) in t {
                    let field = format!("params.{k}");
                    if k == "rect" {
                        cfg.rect = Some(match v {
                            Value::String(s) => parse_rect(s, &field)?,
                            Value::Array(items) if items.len() == 4 => {
                                let r: Vec<f64> = items
                                    .iter()
                                    .enumerate()
                                    .map(|(i, x)| as_f64(x, &format!("{field}[{i}]")))
                                    .collect::<ConfigResult<_>>()?;
                                check_rect([r[0], r[1], r[2], r[3]], &field)?
                            }
                            _ => return Err(ConfigError::new(field, "expected [x0, x1, y0, y1]")),
                        });
                    } else {
                        cfg.params.insert(k.clone(), (field.clone(), as_f64(v, &field)?));
                    }
                }
            }
            "grids" => {
                let Value::Table(t) = value else {
                    return Err(ConfigError::new("grids", "expected a table"));
                };
                for (k, v) in t {
                    cfg.grids.insert(k.clone(), GridSpec::from_value(v, &format!("grids.{k}"))?);
                }
            }
            "tolerances" => {
                let Value::Table(t) = value else {
                    return Err(ConfigError::new("tolerances", "expected a table"));
                };
                for (k, v) in t {
                    let field = format!("tolerances.{k}");
                    let tol = as_f64(v, &field)?;
                    if !(tol > 0.0) {
                        return Err(ConfigError::new(field, "tolerances must be > 0"));
                    }
                    cfg.tolerances.insert(k.clone(), tol);
                }
            }
            other => return Err(ConfigError::new(other, "unknown key")),
        }
    }
    Ok(cfg)
}

/// Merges defaults, the config file and command-line overrides, then
/// validates the result against the command schema.
pub fn resolve(command: CommandKind, o: &Overrides) -> ConfigResult<Resolved> {
    let file = match &o.config {
        Some(p) => read_file(p)?,
        None => FileConfig::default(),
    };
    resolve_with(command, file, o)
}

fn resolve_with(command: CommandKind, file: FileConfig, o: &Overrides) -> ConfigResult<Resolved> {
    let sch = schema(command);
    let known_param = |k: &str| sch.params.contains(&k);

    let mut params = BTreeMap::new();
    for (k, (field, v)) in file.params {
        if !known_param(&k) {
            return Err(ConfigError::new(field, format!("unknown parameter for `{}`", command.name())));
        }
        params.insert(k, v);
    }
    let mut rect = file.rect;
    if rect.is_some() && !sch.uses_rect {
        return Err(ConfigError::new("params.rect", format!("unknown parameter for `{}`", command.name())));
    }
    for (flag, key, value) in [("--t", "t", o.t), ("--s", "s", o.s), ("--c", "c", o.c)] {
        if let Some(v) = value {
            if !known_param(key) {
                return Err(ConfigError::new(flag, format!("not used by `{}`", command.name())));
            }
            if v.is_nan() {
                return Err(ConfigError::new(flag, "NaN is not allowed"));
            }
            params.insert(key.to_string(), v);
        }
    }
    if let Some(r) = &o.rect {
        if !sch.uses_rect {
            return Err(ConfigError::new("--rect", format!("not used by `{}`", command.name())));
        }
        rect = Some(parse_rect(r, "--rect")?);
    }
    for item in &o.sets {
        let Some((k, v)) = item.split_once('=') else {
            return Err(ConfigError::new("--set", format!("expected key=value, got `{item}`")));
        };
        let k = k.trim();
        let field = format!("--set {k}");
        if k == "rect" && sch.uses_rect {
            rect = Some(parse_rect(v, &field)?);
        } else if known_param(k) {
            params.insert(k.to_string(), parse_f64(v, &field)?);
        } else {
            return Err(ConfigError::new(field, format!("unknown parameter for `{}`", command.name())));
        }
    }

    let mut grids = BTreeMap::new();
    for (k, g) in file.grids {
        if !sch.grids.contains(&k.as_str()) {
            return Err(ConfigError::new(format!("grids.{k}"), format!("unknown grid for `{}`", command.name())));
        }
        grids.insert(k, g);
    }
    for item in &o.grids {
        let (name, body) = match item.split_once('=') {
            Some((n, b)) => (n.trim(), b),
            None => match sch.grids.first() {
                Some(first) => (*first, item.as_str()),
                None => return Err(ConfigError::new("--grid", format!("`{}` takes no grids", command.name()))),
            },
        };
        if !sch.grids.contains(&name) {
            return Err(ConfigError::new(format!("--grid {name}"), format!("unknown grid for `{}`", command.name())));
        }
        grids.insert(name.to_string(), GridSpec::parse(body, &format!("--grid {name}"))?);
    }

    let potential = match (&o.potential, &o.preset) {
        (Some(_), Some(_)) => return Err(ConfigError::new("--preset", "conflicts with --potential")),
        (Some(p), None) => Some(PotentialSpec::parse(p, "--potential")?),
        (None, Some(name)) => {
            if !PRESET_NAMES.contains(&name.as_str()) {
                return Err(ConfigError::new(
                    "--preset",
                    format!("unknown preset `{name}` (expected free, powerdecay, gaussian or oscillating)"),
                ));
            }
            Some(PotentialSpec::parse(name, "--preset")?)
        }
        (None, None) => file.potential,
    };
    let potential_path = match (&o.potential, &o.preset) {
        (Some(_), _) => "--potential",
        (_, Some(_)) => "--preset",
        _ => "potential",
    };
    let built = match (&potential, sch.needs_potential) {
        (Some(spec), true) => Some(spec.build(potential_path)?),
        (None, true) => {
            return Err(ConfigError::new("potential", "missing (use --potential, --preset or the config file)"))
        }
        (_, false) => None,
    };
    let threads = o.threads.or(file.threads);
    if threads == Some(0) {
        return Err(ConfigError::new("--threads", "must be at least 1"));
    }
    Ok(Resolved {
        command,
        potential: if sch.needs_potential { potential } else { None },
        built,
        params,
        rect,
        grids,
        tolerances: file.tolerances,
        seed: o.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        output_dir: o.out.clone().or(file.output_dir).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        threads,
    })
}
