//! Enumerates every answer combination of one module and writes the decision
//! matrix as CSV on stdout.
//!
//! ```text
//! cargo run -p fitodx-core --example decision_matrix -- tabaco > tabaco.csv
//! ```

use fitodx_core::analysis::{enumerate_matrix, matrix_csv, DEFAULT_MATRIX_CAP};
use fitodx_core::reference::reference_kb;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "pepino".to_string());
    let kb = reference_kb().expect("reference KB is valid");
    let Some(module) = kb.module(&name) else {
        eprintln!("no module `{name}`");
        std::process::exit(2);
    };
    let rows = enumerate_matrix(module, DEFAULT_MATRIX_CAP).expect("within cap");
    let fired = rows.iter().filter(|r| r.result.is_some()).count();
    eprintln!("{} rows, {fired} with a diagnosis", rows.len());
    print!("{}", matrix_csv(module, &rows));
}
