//! Writes a session log by hand, damages it the way a crash would, and
//! replays it. The torn tail is skipped; the complete session survives.
//!
//! ```text
//! cargo run -p fitodx --example replay_log
//! ```

use std::io::Write;

use chrono::Utc;

use fitodx::log::{replay, KbStamp, LineKind, LogLine, SessionLog};
use fitodx_core::engine::Engine;
use fitodx_core::reference::reference_kb;
use fitodx_core::Answer;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sessions.jsonl");
    let engine = Engine::new(reference_kb().map_err(|_| "invalid reference KB").unwrap()).unwrap();
    let stamp = KbStamp::of(engine.kb());
    let log = SessionLog::open(&path).unwrap();

    // One session, answered until dispatch to the tobacco module.
    let mut state = engine.start();
    let line = |kind, question_id, answer, events| LogLine {
        ts: Utc::now(),
        session_id: "0123456789abcdef0123456789abcdef".into(),
        kind,
        kb: stamp.clone(),
        client_note: None,
        question_id,
        answer,
        events,
    };
    log.append(&line(LineKind::Created, None, None, state.trace().to_vec())).unwrap();
    for answer in [Answer::No, Answer::Si, Answer::No, Answer::No, Answer::No, Answer::No, Answer::No] {
        let q = state.pending().unwrap().clone();
        let before = state.trace().len();
        state.submit_answer(&q, answer).unwrap();
        let events = state.trace()[before..].to_vec();
        log.append(&line(LineKind::Answered, Some(q), Some(answer), events)).unwrap();
    }

    // A crash mid-append leaves half a line behind.
    let mut file = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
    file.write_all(br#"{"ts":"2026-01-01T00:00:00Z","session_id":"0123"#).unwrap();
    drop(file);

    let restored = replay(&path, &engine, None).unwrap();
    for s in &restored.sessions {
        println!(
            "session {}: {} answers, pending {}",
            s.session_id,
            s.state.memo().len(),
            s.state.pending().map_or("none".to_string(), |q| q.global_key())
        );
    }
    for skipped in &restored.skipped {
        println!("skipped line {}: {}", skipped.line, skipped.reason);
    }
}
