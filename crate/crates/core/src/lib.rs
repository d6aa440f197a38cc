//! Production-rule expert system shell.
//!
//! * [`model`]: knowledge bases, questions, rules and diagnoses.
//! * [`dsl`]: the `.fdx` text format (parser, canonical serializer, validator).
//! * [`engine`]: interactive backward-chaining sessions with ask-once answers.
//! * [`analysis`]: reference classifier, decision matrices and rule-base lint.
//! * [`catalog`]: per-module summary of what a knowledge base can diagnose.
//!
//! ```
//! use fitodx_core::{dsl::parse_kb, engine::Engine, model::Answer};
//!
//! let kb = parse_kb(r#"
//!     kb "demo" version 1 entry m
//!     module m {
//!       question q1 "¿hojas amarillas?"
//!       rule r1 { q1 = si diagnose { name: "CLOROSIS" } }
//!     }"#).unwrap();
//! let engine = Engine::new(kb).unwrap();
//! let mut session = engine.start();
//! let q = session.pending().unwrap().clone();
//! session.submit_answer(&q, Answer::Si).unwrap();
//! assert_eq!(session.outcome().unwrap().diagnosis().unwrap().name, "CLOROSIS");
//! ```

pub mod analysis;
pub mod catalog;
pub mod dsl;
pub mod engine;
pub mod model;
pub mod reference;
pub mod synth;

pub use model::{Answer, Diagnosis, Ident, KnowledgeBase, Outcome, QuestionId};
