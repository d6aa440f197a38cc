//! Lists what each crop module of the reference base can diagnose.
//!
//! ```text
//! cargo run -p fitodx-core --example catalog
//! ```

use fitodx_core::catalog::KbSummary;
use fitodx_core::reference::reference_kb;

fn main() {
    let summary = KbSummary::of(&reference_kb().expect("reference KB is valid"));
    println!("{} (version {})", summary.title, summary.version);
    for crop in &summary.crops {
        println!("\n{} ({} questions)", crop.module, crop.question_count);
        for name in &crop.diagnoses {
            println!("  - {name}");
        }
    }
}
