//! Random well-formed knowledge bases, for property tests and fuzzing.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::model::{
    Answer, Consequent, Diagnosis, Ident, KnowledgeBase, Literal, Question, QuestionId, Rule, RuleModule,
};

/// Size limits for [`random_kb`].
#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub max_modules: usize,
    pub max_questions: usize,
    pub max_rules: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            max_modules: 4,
            max_questions: 6,
            max_rules: 6,
        }
    }
}

// Includes DSL keywords, which are only contextual.
const WORDS: &[&str] = &[
    "rule", "module", "dispatch", "diagnose", "si", "no", "name", "info", "kb", "entry", "hoja", "raiz", "tallo",
    "_x", "p",
];

const TEXT_PIECES: &[&str] = &[
    "¿", "?", "hoja", " ", "\"", "\\", "\n", "\t", "maíz", "ñ", "#", "{", "}", "=", ":", "x", "Ataca",
];

fn ident(rng: &mut impl Rng, n: usize) -> Ident {
    let word = WORDS.choose(rng).expect("nonempty");
    Ident::new(format!("{word}{n}")).expect("valid identifier")
}

fn text(rng: &mut impl Rng, allow_empty: bool) -> String {
    let len = rng.random_range(if allow_empty { 0 } else { 1 }..8);
    let mut s: String = (0..len).map(|_| *TEXT_PIECES.choose(rng).expect("nonempty")).collect();
    if !allow_empty && s.trim().is_empty() {
        s.push('x');
    }
    s
}

/// A random knowledge base that passes validation. Dispatch only goes from a
/// module to a later one, so the dispatch graph is acyclic.
pub fn random_kb(rng: &mut impl Rng, config: &SynthConfig) -> KnowledgeBase {
    let n_modules = rng.random_range(1..=config.max_modules.max(1));
    let names: Vec<Ident> = (0..n_modules).map(|i| ident(rng, i)).collect();
    let mut modules = Vec::with_capacity(n_modules);
    for (mi, name) in names.iter().enumerate() {
        let n_questions = rng.random_range(1..=config.max_questions.max(1));
        let questions: Vec<Question> = (0..n_questions)
            .map(|qi| Question {
                id: QuestionId {
                    module: name.clone(),
                    local: ident(rng, qi),
                },
                text: text(rng, false),
            })
            .collect();
        let n_rules = rng.random_range(0..=config.max_rules);
        let rules = (0..n_rules)
            .map(|ri| {
                let mut picked: Vec<&Question> = questions.iter().collect();
                picked.shuffle(rng);
                picked.truncate(rng.random_range(1..=questions.len()));
                let literals = picked
                    .into_iter()
                    .map(|q| Literal {
                        question: q.id.clone(),
                        expected: if rng.random_bool(0.5) { Answer::Si } else { Answer::No },
                    })
                    .collect();
                let consequent = if mi + 1 < n_modules && rng.random_bool(0.4) {
                    Consequent::Dispatch(names[rng.random_range(mi + 1..n_modules)].clone())
                } else {
                    Consequent::Diagnose(Diagnosis {
                        name: text(rng, false),
                        info: text(rng, true),
                        treatment: text(rng, true),
                        images: (0..rng.random_range(0..3)).map(|_| text(rng, true)).collect(),
                    })
                };
                Rule {
                    id: ident(rng, ri),
                    literals,
                    consequent,
                }
            })
            .collect();
        modules.push(RuleModule {
            name: name.clone(),
            questions,
            rules,
        });
    }
    KnowledgeBase {
        title: text(rng, true),
        version: rng.random_range(0..1000),
        entry: names[0].clone(),
        modules,
    }
}
