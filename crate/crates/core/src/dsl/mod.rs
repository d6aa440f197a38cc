//! The `.fdx` knowledge-base format: parser, canonical serializer and
//! structural validator.
//!
//! ```text
//! kb "demo" version 1 entry m
//!
//! module m {
//!   question q1 "¿hay manchas en las hojas?"
//!   rule r1 {
//!     q1 = si
//!     diagnose {
//!       name: "MANCHA FOLIAR"
//!       info: "..."
//!     }
//!   }
//! }
//! ```

mod diagnostic;
mod lexer;
mod parser;
mod serialize;
mod validate;

pub use diagnostic::{DiagCode, ParseDiagnostic, Severity, SourceSpan};
pub use serialize::{quote, serialize_kb};
pub use validate::validate_kb;

use crate::model::KnowledgeBase;

/// Full result of parsing: the knowledge base (if there were no errors) and
/// every diagnostic, warnings included.
#[derive(Debug, Clone)]
pub struct ParseReport {
    pub kb: Option<KnowledgeBase>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

impl ParseReport {
    pub fn errors(&self) -> impl Iterator<Item = &ParseDiagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error())
    }

    pub fn warnings(&self) -> impl Iterator<Item = &ParseDiagnostic> {
        self.diagnostics.iter().filter(|d| !d.is_error())
    }
}

/// Parses and validates a knowledge base. Structural checks only run once
/// the source is syntactically clean.
pub fn parse_report(source: &str) -> ParseReport {
    let (tokens, mut diagnostics) = lexer::tokenize(source);
    let (parsed, syntax) = parser::parse_tokens(tokens);
    diagnostics.extend(syntax);
    let kb = match parsed {
        Some((kb, spans)) if diagnostics.is_empty() => {
            diagnostics = validate::check(&kb, Some(&spans));
            (!diagnostics.iter().any(|d| d.is_error())).then_some(kb)
        }
        _ => None,
    };
    diagnostics.sort_by_key(|d| (d.span.map(|s| s.offset), d.severity));
    ParseReport { kb, diagnostics }
}

/// Parses a knowledge base. On failure returns every diagnostic (at least
/// one of them an error); warnings are dropped on success.
pub fn parse_kb(source: &str) -> Result<KnowledgeBase, Vec<ParseDiagnostic>> {
    let report = parse_report(source);
    report.kb.ok_or(report.diagnostics)
}

/// Like [`parse_report`] for raw bytes; invalid UTF-8 is a single fatal
/// `ENCODING` diagnostic.
pub fn parse_report_bytes(bytes: &[u8]) -> ParseReport {
    match std::str::from_utf8(bytes) {
        Ok(source) => parse_report(source),
        Err(e) => {
            let valid = e.valid_up_to();
            // The prefix is valid UTF-8 by construction.
            let prefix = std::str::from_utf8(&bytes[..valid]).unwrap_or_default();
            let mut span = SourceSpan::locate(prefix, valid);
            span.offset = valid;
            ParseReport {
                kb: None,
                diagnostics: vec![ParseDiagnostic {
                    severity: Severity::Error,
                    code: DiagCode::Encoding,
                    span: Some(span),
                    location: String::new(),
                    message: format!("invalid UTF-8 at byte {valid}"),
                }],
            }
        }
    }
}

pub fn parse_kb_bytes(bytes: &[u8]) -> Result<KnowledgeBase, Vec<ParseDiagnostic>> {
    let report = parse_report_bytes(bytes);
    report.kb.ok_or(report.diagnostics)
}
