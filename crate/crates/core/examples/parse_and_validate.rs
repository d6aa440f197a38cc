//! Parses a knowledge base, prints every diagnostic with its position, and
//! echoes the canonical form on success.
//!
//! ```text
//! cargo run -p fitodx-core --example parse_and_validate -- path.fdx
//! ```

use fitodx_core::dsl::{parse_report_bytes, serialize_kb};

fn main() {
    let bytes = match std::env::args().nth(1) {
        Some(path) => std::fs::read(&path).expect("readable file"),
        // A broken base, to show recovery across several errors.
        None => br#"kb "demo" version 1 entry m
module m {
  question q1 "hay manchas?"
  rule r1 { q1 = quizas diagnose { name: "X" } }
  rule r2 { q1 = }
  rule r3 { q1 = no diagnose { name: "Y" info: } }
}"#
        .to_vec(),
    };
    let report = parse_report_bytes(&bytes);
    for d in &report.diagnostics {
        println!("{d}");
    }
    match report.kb {
        Some(kb) => print!("{}", serialize_kb(&kb)),
        None => std::process::exit(1),
    }
}
