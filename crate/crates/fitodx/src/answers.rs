//! Answers files: a JSON object mapping global question keys to `"si"` or
//! `"no"`.
//!
//! ```json
//! { "principal.es_tabaco": "si", "tabaco.p3": "si" }
//! ```

use std::collections::BTreeMap;

use thiserror::Error;

use fitodx_core::engine::Answers;
use fitodx_core::{Answer, KnowledgeBase, QuestionId};

#[derive(Debug, Error)]
pub enum AnswersError {
    #[error("answers file is not a JSON object of \"si\"/\"no\" values: {0}")]
    Json(#[from] serde_json::Error),
    #[error("answers file names unknown question `{0}`")]
    UnknownQuestion(String),
}

/// Parses an answers file against `kb`. Keys must name declared questions.
pub fn parse_answers(kb: &KnowledgeBase, text: &str) -> Result<Answers, AnswersError> {
    let raw: BTreeMap<String, Answer> = serde_json::from_str(text)?;
    raw.into_iter()
        .map(|(key, answer)| {
            let q: QuestionId = key.parse().map_err(|_| AnswersError::UnknownQuestion(key.clone()))?;
            if kb.question(&q).is_none() {
                return Err(AnswersError::UnknownQuestion(key));
            }
            Ok((q, answer))
        })
        .collect()
}

/// Renders `answers` in the same format, keys sorted.
pub fn render_answers(answers: &Answers) -> String {
    let map: BTreeMap<String, Answer> = answers.iter().map(|(q, a)| (q.global_key(), *a)).collect();
    serde_json::to_string_pretty(&map).expect("string keys always serialize")
}
