//! The bundled reference knowledge base (`kb/reference.fdx`).

use crate::dsl::{parse_kb, ParseDiagnostic};
use crate::model::KnowledgeBase;

/// Source text of the reference knowledge base.
pub const REFERENCE_SOURCE: &str = include_str!("../../../kb/reference.fdx");

pub fn reference_kb() -> Result<KnowledgeBase, Vec<ParseDiagnostic>> {
    parse_kb(REFERENCE_SOURCE)
}
