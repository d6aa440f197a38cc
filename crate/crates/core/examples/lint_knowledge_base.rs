//! Lints a knowledge base and prints every finding. Defaults to the bundled
//! reference base.
//!
//! ```text
//! cargo run -p fitodx-core --example lint_knowledge_base -- [path.fdx]
//! ```

use fitodx_core::analysis::{lint, render_findings};
use fitodx_core::dsl::parse_report;
use fitodx_core::reference::REFERENCE_SOURCE;

fn main() {
    let source = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(&path).expect("readable knowledge base"),
        None => REFERENCE_SOURCE.to_string(),
    };
    let report = parse_report(&source);
    for d in &report.diagnostics {
        println!("{d}");
    }
    let Some(kb) = report.kb else {
        std::process::exit(2);
    };
    let findings = lint(&kb);
    print!("{}", render_findings(&findings));
    println!("{} finding(s)", findings.len());
}
