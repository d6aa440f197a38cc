use std::fmt;

use serde::Serialize;

/// Position inside a source buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SourceSpan {
    /// 1-based line.
    pub line: u32,
    /// 1-based column, in Unicode scalar values.
    pub column: u32,
    /// 0-based byte offset.
    pub offset: usize,
}

impl SourceSpan {
    pub const START: SourceSpan = SourceSpan {
        line: 1,
        column: 1,
        offset: 0,
    };

    /// Span of byte `offset` in `source`. Offsets past the end clamp to the end.
    pub fn locate(source: &str, offset: usize) -> SourceSpan {
        let mut offset = offset.min(source.len());
        while !source.is_char_boundary(offset) {
            offset -= 1;
        }
        let before = &source[..offset];
        let line = before.bytes().filter(|&b| b == b'\n').count() as u32 + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let column = before[line_start..].chars().count() as u32 + 1;
        SourceSpan {
            line,
            column,
            offset,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// Stable diagnostic codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DiagCode {
    #[serde(rename = "ENCODING")]
    Encoding,
    #[serde(rename = "SYNTAX")]
    Syntax,
    #[serde(rename = "DUP_MODULE")]
    DupModule,
    #[serde(rename = "DUP_QUESTION")]
    DupQuestion,
    #[serde(rename = "DUP_RULE")]
    DupRule,
    #[serde(rename = "DUP_LITERAL")]
    DupLiteral,
    #[serde(rename = "UNDEF_QUESTION")]
    UndefQuestion,
    #[serde(rename = "UNDEF_MODULE")]
    UndefModule,
    #[serde(rename = "FOREIGN_QUESTION")]
    ForeignQuestion,
    #[serde(rename = "EMPTY_TEXT")]
    EmptyText,
    #[serde(rename = "EMPTY_RULE")]
    EmptyRule,
    #[serde(rename = "DISPATCH_CYCLE")]
    DispatchCycle,
    #[serde(rename = "CONTRADICTION")]
    Contradiction,
    #[serde(rename = "NO_ENTRY")]
    NoEntry,
    #[serde(rename = "UNREACHABLE_MODULE")]
    UnreachableModule,
}

impl DiagCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagCode::Encoding => "ENCODING",
            DiagCode::Syntax => "SYNTAX",
            DiagCode::DupModule => "DUP_MODULE",
            DiagCode::DupQuestion => "DUP_QUESTION",
            DiagCode::DupRule => "DUP_RULE",
            DiagCode::DupLiteral => "DUP_LITERAL",
            DiagCode::UndefQuestion => "UNDEF_QUESTION",
            DiagCode::UndefModule => "UNDEF_MODULE",
            DiagCode::ForeignQuestion => "FOREIGN_QUESTION",
            DiagCode::EmptyText => "EMPTY_TEXT",
            DiagCode::EmptyRule => "EMPTY_RULE",
            DiagCode::DispatchCycle => "DISPATCH_CYCLE",
            DiagCode::Contradiction => "CONTRADICTION",
            DiagCode::NoEntry => "NO_ENTRY",
            DiagCode::UnreachableModule => "UNREACHABLE_MODULE",
        }
    }
}

impl fmt::Display for DiagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A parse or validation finding.
///
/// Diagnostics produced from source text always carry a span. Diagnostics
/// from [`super::validate_kb`] on an in-memory knowledge base have no source
/// and therefore no span; `location` names the offending item instead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostic {
    pub severity: Severity,
    pub code: DiagCode,
    pub span: Option<SourceSpan>,
    pub location: String,
    pub message: String,
}

impl ParseDiagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.span {
            Some(span) => write!(f, "{span}: ")?,
            None if !self.location.is_empty() => write!(f, "{}: ", self.location)?,
            None => {}
        }
        write!(f, "{} [{}]: {}", self.severity, self.code, self.message)
    }
}
