//! Artifact writing: one CSV per report table, the summary JSON and the
//! resolved configuration, all written in a fixed order.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use nlft_core::io::summary_json;
use nlft_core::{CheckKind, DiagnosticReport};

use crate::config::{ConfigError, Resolved};

/// Applies `report.check` tolerance overrides. Keys that name no
/// toleranced check are configuration errors.
pub fn apply_tolerances(
    reports: &mut [DiagnosticReport],
    tolerances: &BTreeMap<String, f64>,
) -> Result<(), ConfigError> {
    for (key, &tol) in tolerances {
        let field = format!("tolerances.{key}");
        let Some((report, check)) = key.split_once('.') else {
            return Err(ConfigError::new(field, "expected `report.check`"));
        };
        let hit =
            reports.iter_mut().find(|r| r.name == report).and_then(|r| r.get_mut(check)).map(|c| c.set_tolerance(tol));
        match hit {
            Some(true) => {}
            Some(false) => return Err(ConfigError::new(field, "this entry is informational and has no tolerance")),
            None => return Err(ConfigError::new(field, "no such check in this command's reports")),
        }
    }
    Ok(())
}

/// Writes every artifact and returns the paths in write order.
pub fn write_artifacts(dir: &Path, cfg: &Resolved, reports: &[DiagnosticReport]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for r in reports {
        if let Some(table) = &r.table {
            let path = dir.join(format!("{}.csv", r.name));
            table.write(&path)?;
            written.push(path);
        }
    }
    let config = dir.join("config.json");
    let mut text = serde_json::to_string_pretty(cfg).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(&config, text)?;
    written.push(config);
    let summary = dir.join("summary.json");
    fs::write(&summary, summary_json(cfg.command.name(), reports))?;
    written.push(summary);
    Ok(written)
}

/// One line per check, `PASS`/`FAIL`/`info`.
pub fn render(reports: &[DiagnosticReport]) -> String {
    let mut out = String::new();
    for r in reports {
        for c in &r.checks {
            let verdict = match (c.kind, c.pass) {
                (_, false) => "FAIL",
                (CheckKind::Info, true) => "info",
                (_, true) => "PASS",
            };
            let bound = match (c.kind, c.tolerance) {
                (CheckKind::AtLeast, Some(t)) => format!(" (>= {t:e})"),
                (_, Some(t)) => format!(" (<= {t:e})"),
                _ => String::new(),
            };
            out.push_str(&format!("{verdict:4} {}.{} = {:e}{bound}\n", r.name, c.name, c.value));
        }
    }
    out
}
