//! Answers the reference base's questions from the terminal, one at a time.
//!
//! ```text
//! cargo run -p fitodx-core --example interactive_diagnosis
//! ```

use std::io::{self, BufRead, Write};

use fitodx_core::engine::start;
use fitodx_core::model::answer_from_token;
use fitodx_core::reference::reference_kb;
use fitodx_core::Outcome;

fn main() {
    let kb = reference_kb().expect("reference KB is valid");
    let mut state = start(kb).expect("validated");
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    while let Some(question) = state.pending_question().cloned() {
        print!("[{}] {} (si/no) ", state.pending_ordinal().unwrap_or(0), question.text);
        io::stdout().flush().ok();
        let Some(Ok(line)) = lines.next() else {
            eprintln!("\ninput closed");
            return;
        };
        match answer_from_token(&line) {
            Ok(answer) => state.submit_answer(&question.id, answer).expect("answering the pending question"),
            Err(e) => eprintln!("{e}"),
        }
    }
    match state.outcome().expect("finished") {
        Outcome::Diagnosed { diagnosis, .. } => {
            println!("\n{}\n\n{}\n\n{}", diagnosis.name, diagnosis.info, diagnosis.treatment);
        }
        Outcome::NoMatch { last_module } => println!("\nno diagnosis (stopped in {last_module})"),
    }
}
