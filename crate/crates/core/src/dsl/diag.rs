use std::fmt;

use serde::Serialize;

use super::ast::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A parse or validation finding with a stable code.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: u32,
    pub col: u32,
    pub code: &'static str,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: &'static str, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, line: span.line, col: span.col, code, message: message.into() }
    }

    pub fn warning(code: &'static str, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, line: span.line, col: span.col, code, message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {}[{}]: {}", self.line, self.col, sev, self.code, self.message)
    }
}

/// Stable diagnostic codes.
pub mod codes {
    pub const SYNTAX: &str = "syntax";
    pub const PREPROCESSOR: &str = "preprocessor";
    pub const UNKNOWN_INTRINSIC: &str = "unknown-intrinsic";
    pub const ARITY: &str = "arity";
    pub const ARG_TYPE: &str = "arg-type";
    pub const UNDECLARED: &str = "undeclared";
    pub const REDECLARED: &str = "redeclared";
    pub const SPAD_RANGE: &str = "spad-row-range";
    pub const ACC_RANGE: &str = "acc-row-range";
    pub const VLA: &str = "variable-length-array";
    pub const FUNCTION_NAME: &str = "function-name";
    pub const PARAM_TYPE: &str = "param-type";
    pub const PARAM_SHAPE: &str = "param-shape";
    pub const NOT_EXECUTABLE: &str = "not-executable";
    pub const MISPLACED_CALL: &str = "misplaced-call";
    pub const NOT_ASSIGNABLE: &str = "not-assignable";
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}
