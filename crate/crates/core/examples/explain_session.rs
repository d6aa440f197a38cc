//! Shows why a session ended where it did: the fired rule, the answers that
//! support it and the rules rejected on the way.
//!
//! ```text
//! cargo run -p fitodx-core --example explain_session
//! ```

use fitodx_core::engine::start;
use fitodx_core::reference::reference_kb;
use fitodx_core::Answer;

fn main() {
    let kb = reference_kb().expect("reference KB is valid");
    let mut state = start(kb).expect("validated");
    // Rice, then blight symptoms without the humidity conditions.
    let yes = ["principal.es_arroz", "arroz.p1", "arroz.p6"];
    while let Some(q) = state.pending().cloned() {
        let answer = if yes.contains(&q.global_key().as_str()) { Answer::Si } else { Answer::No };
        state.submit_answer(&q, answer).expect("pending");
    }
    let explanation = state.explain().expect("finished");
    if let Some(d) = explanation.outcome.diagnosis() {
        println!("diagnosis: {}", d.name);
    }
    for step in &explanation.dispatch_path {
        println!("via {}.{}", step.module, step.rule);
    }
    for s in &explanation.supporting {
        println!("  {} = {}   {}", s.question, s.answer, s.prompt);
    }
    for f in &explanation.failed {
        println!("rejected {}.{} at {}", f.module, f.rule, f.failed_at);
    }
}
