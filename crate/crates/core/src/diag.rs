//! Field-path diagnostics shared by parameter validation and config checking.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Diagnostic {
    pub path: String,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{level}: {}: {}", self.path, self.message)
    }
}

/// Collects diagnostics under a dotted path prefix.
pub struct Checker<'a> {
    prefix: String,
    out: &'a mut Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    pub fn new(prefix: &str, out: &'a mut Vec<Diagnostic>) -> Self {
        Checker {
            prefix: prefix.into(),
            out,
        }
    }

    pub fn path(&self, field: &str) -> String {
        if self.prefix.is_empty() {
            field.into()
        } else {
            format!("{}.{}", self.prefix, field)
        }
    }

    pub fn error(&mut self, field: &str, message: impl Into<String>) {
        let path = self.path(field);
        self.out.push(Diagnostic {
            path,
            severity: Severity::Error,
            message: message.into(),
        });
    }

    pub fn warning(&mut self, field: &str, message: impl Into<String>) {
        let path = self.path(field);
        self.out.push(Diagnostic {
            path,
            severity: Severity::Warning,
            message: message.into(),
        });
    }

    /// Records an error unless `value` is finite and satisfies `ok`. Returns whether it passed.
    pub fn require(&mut self, field: &str, value: f64, ok: bool, what: &str) -> bool {
        if !value.is_finite() {
            self.error(field, format!("must be finite, got {value}"));
            false
        } else if !ok {
            self.error(field, format!("must be {what}, got {value}"));
            false
        } else {
            true
        }
    }

    pub fn nested<'b>(&'b mut self, field: &str) -> Checker<'b> {
        let prefix = self.path(field);
        Checker {
            prefix,
            out: self.out,
        }
    }
}

/// Types whose invariants can be checked field by field.
pub trait Validate {
    fn diagnose(&self, checker: &mut Checker<'_>);

    fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        self.diagnose(&mut Checker::new("", &mut out));
        out
    }

    /// Fails on the first error-level diagnostic; warnings pass.
    fn validate(&self) -> Result<()> {
        match self
            .diagnostics()
            .into_iter()
            .find(|d| d.severity == Severity::Error)
        {
            Some(d) => Err(Error::InvalidParameter {
                field: d.path,
                reason: d.message,
            }),
            None => Ok(()),
        }
    }
}
