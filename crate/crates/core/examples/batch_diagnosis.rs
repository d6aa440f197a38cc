//! Runs a whole session from a preset answer map: the tobacco damping-off
//! case, then the same map with the decisive root question flipped.
//!
//! ```text
//! cargo run -p fitodx-core --example batch_diagnosis
//! ```

use fitodx_core::engine::{run_with_answers, Answers, TraceEvent};
use fitodx_core::reference::reference_kb;
use fitodx_core::{Answer, QuestionId};

fn main() {
    let kb = reference_kb().expect("reference KB is valid");
    let mut answers = Answers::new();
    for q in kb.questions() {
        answers.insert(q.id.clone(), Answer::No);
    }
    for key in ["principal.es_tabaco", "tabaco.p3", "tabaco.p9", "tabaco.p12"] {
        answers.insert(key.parse::<QuestionId>().unwrap(), Answer::Si);
    }

    let (outcome, trace) = run_with_answers(kb.clone(), &answers).expect("total answer map");
    let asked = trace.iter().filter(|e| matches!(e, TraceEvent::Asked { .. })).count();
    println!("{asked} questions asked -> {}", outcome.diagnosis().map_or("no match", |d| &d.name));

    answers.insert("tabaco.p12".parse().unwrap(), Answer::No);
    let (outcome, _) = run_with_answers(kb, &answers).expect("total answer map");
    println!("with p12=no -> {}", serde_json::to_string(&outcome).unwrap());
}
