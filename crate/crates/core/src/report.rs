//! Named residuals and verdicts produced by the verification operations.

use serde::Serialize;

use crate::io::CsvTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Passes when `value <= tolerance`.
    AtMost,
    /// Passes when `value >= tolerance`.
    AtLeast,
    /// Boolean verdict stored as `1`/`0`.
    Flag,
    Info,
}

/// One residual compared against a tolerance. A check without tolerance is
/// a flag or informational.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub pass: bool,
    #[serde(skip)]
    pub kind: CheckKind,
}

impl Check {
    /// Replaces the tolerance and re-evaluates the verdict. Informational
    /// entries and flags have no tolerance and are left unchanged.
    pub fn set_tolerance(&mut self, tolerance: f64) -> bool {
        if self.tolerance.is_none() {
            return false;
        }
        self.tolerance = Some(tolerance);
        self.pass = if self.kind == CheckKind::AtLeast { self.value >= tolerance } else { self.value <= tolerance };
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct DiagnosticReport {
    pub name: String,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub table: Option<CsvTable>,
}

impl DiagnosticReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), checks: Vec::new(), table: None }
    }

    /// Records `value <= tolerance`; NaN always fails.
    pub fn check(&mut self, name: impl Into<String>, value: f64, tolerance: f64) -> &mut Self {
        self.checks.push(Check {
            name: name.into(),
            value,
            tolerance: Some(tolerance),
            pass: value <= tolerance,
            kind: CheckKind::AtMost,
        });
        self
    }

    /// Records `value >= threshold` (stored with the threshold as tolerance).
    pub fn check_at_least(&mut self, name: impl Into<String>, value: f64, threshold: f64) -> &mut Self {
        self.checks.push(Check {
            name: name.into(),
            value,
            tolerance: Some(threshold),
            pass: value >= threshold,
            kind: CheckKind::AtLeast,
        });
        self
    }

    pub fn check_flag(&mut self, name: impl Into<String>, ok: bool) -> &mut Self {
        self.checks.push(Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: None,
            pass: ok,
            kind: CheckKind::Flag,
        });
        self
    }

    pub fn info(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.checks.push(Check { name: name.into(), value, tolerance: None, pass: true, kind: CheckKind::Info });
        self
    }

    pub fn with_table(mut self, table: CsvTable) -> Self {
        self.table = Some(table);
        self
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Check> {
        self.checks.iter_mut().find(|c| c.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Value of the named check.
    ///
    /// # Panics
    /// If no check has that name.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name).unwrap_or_else(|| panic!("report `{}` has no entry `{name}`", self.name)).value
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Appends the checks of `other`, prefixed with its report name.
    pub fn absorb(&mut self, other: DiagnosticReport) {
        for mut c in other.checks {
            c.name = format!("{}.{}", other.name, c.name);
            self.checks.push(c);
        }
    }
}
