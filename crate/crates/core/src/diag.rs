//! Diagnostics shared by the parser, validator and grounder.

use alloc::string::String;
use core::fmt;

/// A position in source text. Lines and columns are 1-based, columns count
/// characters rather than bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

/// Machine-readable classification of a diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DiagnosticCode {
    UnexpectedToken,
    UnexpectedEnd,
    UnterminatedQuote,
    InvalidNumber,
    WeightedRuleWithDot,
    MissingDot,
    SummationInLogicalRule,
    FilterOnNonSummation,
    MultipleStatements,
    InvalidTerm,
    ArityMismatch,
    UndeclaredPredicate,
    DuplicatePredicate,
    UnsafeVariable,
    UnboundBuiltin,
    DuplicateFilter,
    SummationMultiplicity,
    UnknownRuleName,
    TemplatePlaceholder,
    EmptySummation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    pub message: String,
    pub span: Option<Span>,
    /// Text of the offending token, when there is one.
    pub token: Option<String>,
}

impl Diagnostic {
    pub fn error(code: DiagnosticCode, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, code, message: message.into(), span: None, token: None }
    }

    pub fn warning(code: DiagnosticCode, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, ..Self::error(code, message) }
    }

    pub fn at(mut self, span: Span) -> Self {
        self.span = Some(span);
        self
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        if let Some(span) = self.span {
            write!(f, "{}:{}: ", span.line, span.column)?;
        }
        write!(f, "{level}: {}", self.message)?;
        if let Some(token) = &self.token {
            write!(f, " (at `{token}`)")?;
        }
        Ok(())
    }
}

/// True if any diagnostic in the slice is an error.
pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(Diagnostic::is_error)
}
