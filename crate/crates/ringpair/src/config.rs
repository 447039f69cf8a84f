//! Scenario files: TOML loading, `--set` overrides and validation.

use std::fs;
use std::path::Path;

use ringpair_core::diag::{Diagnostic, Severity};
use ringpair_core::scenario::{diagnostics, Scenario};

/// Scenarios shipped with the binary, addressable by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("fig2-spectrum", include_str!("../scenarios/fig2-spectrum.toml")),
    ("fig3-car", include_str!("../scenarios/fig3-car.toml")),
    ("fig5-single", include_str!("../scenarios/fig5-single.toml")),
    ("fig6-double", include_str!("../scenarios/fig6-double.toml")),
    ("fig7-fringe", include_str!("../scenarios/fig7-fringe.toml")),
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}: {source}")]
    Io {
        origin: String,
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("--set {assignment}: {message}")]
    Override { assignment: String, message: String },
    #[error("{origin}: invalid scenario\n{}", join(.diagnostics))]
    Invalid {
        origin: String,
        diagnostics: Vec<Diagnostic>,
    },
}

fn join(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Reads a scenario given as a file path or a bundled name. Returns `(origin, text)`.
pub fn read_source(arg: &str) -> Result<(String, String), ConfigError> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(text) = bundled(arg) {
            return Ok((format!("<bundled {arg}>"), text.to_owned()));
        }
    }
    fs::read_to_string(path)
        .map(|t| (arg.to_owned(), t))
        .map_err(|source| ConfigError::Io {
            origin: arg.to_owned(),
            source,
        })
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

fn parse_error(text: &str, origin: &str, e: toml::de::Error) -> ConfigError {
    let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
    ConfigError::Parse {
        origin: origin.to_owned(),
        line,
        column,
        message: e.message().trim().to_owned(),
    }
}

/// Deserialises without semantic validation.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, ConfigError> {
    toml::from_str(text).map_err(|e| parse_error(text, origin, e))
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

/// Applies one `dotted.key=value` assignment. Values use TOML syntax; bare words are
/// strings. Numeric segments index arrays, e.g. `channels.1.duration_s=10`.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let fail = |message: &str| ConfigError::Override {
        assignment: assignment.to_owned(),
        message: message.to_owned(),
    };
    let (key, raw) = assignment.split_once('=').ok_or_else(|| fail("expected key=value"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(fail("empty key segment"));
    }
    let value = parse_value(raw.trim());
    let (last, sections) = parts.split_last().expect("split yields one part");
    let Some((first, rest)) = sections.split_first() else {
        table.insert(last.to_string(), value);
        return Ok(());
    };
    let mut node = table
        .entry(first.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    for part in rest.iter().chain([last]) {
        node = match node {
            toml::Value::Table(t) => t
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new())),
            toml::Value::Array(a) => part
                .parse::<usize>()
                .ok()
                .and_then(|i| a.get_mut(i))
                .ok_or_else(|| fail("array index out of range"))?,
            _ => return Err(fail("path crosses a non-table value")),
        };
    }
    *node = value;
    Ok(())
}

/// Parses, applies overrides and validates. Warnings are returned alongside the scenario.
pub fn load_scenario(arg: &str, overrides: &[String]) -> Result<(Scenario, Vec<Diagnostic>), ConfigError> {
    let (origin, text) = read_source(arg)?;
    let mut scenario = parse_scenario(&text, &origin)?;
    if !overrides.is_empty() {
        let mut table: toml::Table = toml::from_str(&text).map_err(|e| parse_error(&text, &origin, e))?;
        for a in overrides {
            apply_override(&mut table, a)?;
        }
        scenario = table.try_into().map_err(|e: toml::de::Error| ConfigError::Override {
            assignment: overrides.join(" "),
            message: e.message().trim().to_owned(),
        })?;
    }
    let diags = diagnostics(&scenario);
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(ConfigError::Invalid {
            origin,
            diagnostics: diags,
        });
    }
    Ok((scenario, diags))
}

/// Every problem with a scenario file, errors first. Empty iff the file is valid.
///
/// Only an unreadable file is an `Err`; syntax and type errors come back as
/// diagnostics located by line and column.
pub fn validate_config(arg: &str) -> Result<Vec<Diagnostic>, ConfigError> {
    let (origin, text) = read_source(arg)?;
    match parse_scenario(&text, &origin) {
        Ok(s) => Ok(diagnostics(&s)),
        Err(ConfigError::Parse {
            line, column, message, ..
        }) => Ok(vec![Diagnostic {
            path: format!("{origin}:{line}:{column}"),
            severity: Severity::Error,
            message,
        }]),
        Err(e) => Err(e),
    }
}
