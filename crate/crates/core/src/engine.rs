//! Backward-chaining evaluation with first-match rule priority.
//!
//! Evaluation walks a cursor over `(module, rule, literal)`. A literal whose
//! question is already answered is checked against the memo; an unanswered
//! one suspends the session with that question pending. A mismatch fails
//! the rule and moves on to the next one. A rule whose literals all hold
//! fires: it either diagnoses (the session ends) or dispatches into another
//! module, which is then evaluated from its first rule. Dispatch never
//! returns, so a module that runs out of rules ends the session with
//! [`Outcome::NoMatch`].
//!
//! Answers are memoized for the whole session: a question is asked at most
//! once even if several rules mention it.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{validate_kb, ParseDiagnostic};
use crate::model::{Answer, Consequent, Ident, KnowledgeBase, Outcome, Question, QuestionId};

/// Answers supplied up front, keyed by question.
pub type Answers = BTreeMap<QuestionId, Answer>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("knowledge base failed validation ({} errors)", .0.len())]
    InvalidKb(Vec<ParseDiagnostic>),
    #[error("question `{0}` is not the pending question")]
    NotPending(QuestionId),
    #[error("session already finished")]
    SessionFinished,
    #[error("session is not finished yet")]
    SessionUnfinished,
    #[error("no answer supplied for `{0}`")]
    MissingAnswer(QuestionId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceEvent {
    Asked {
        question: QuestionId,
        prompt: String,
        answer: Answer,
    },
    RuleFailed {
        module: Ident,
        rule: Ident,
        failed_at: QuestionId,
    },
    RuleFired {
        module: Ident,
        rule: Ident,
    },
    Dispatched {
        from_module: Ident,
        to_module: Ident,
    },
    Finished {
        outcome: Outcome,
    },
}

/// Write-once answer store keyed by global question key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnswerMemo {
    answers: HashMap<QuestionId, Answer>,
}

impl AnswerMemo {
    pub fn get(&self, q: &QuestionId) -> Option<Answer> {
        self.answers.get(q).copied()
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    fn record(&mut self, q: QuestionId, a: Answer) {
        let previous = self.answers.insert(q, a);
        assert!(previous.is_none(), "answer memo written twice for the same question");
    }
}

/// Evaluation position. `rule == rules.len()` is the end-of-module sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Cursor {
    pub module: usize,
    pub rule: usize,
    pub literal: usize,
}

/// A validated knowledge base ready to start sessions.
#[derive(Debug, Clone)]
pub struct Engine {
    kb: Arc<KnowledgeBase>,
}

impl Engine {
    /// Fails with [`EngineError::InvalidKb`] if validation reports any error.
    /// Warnings (unreachable modules) are accepted.
    pub fn new(kb: impl Into<Arc<KnowledgeBase>>) -> Result<Engine, EngineError> {
        let kb = kb.into();
        let errors: Vec<_> = validate_kb(&kb).into_iter().filter(|d| d.is_error()).collect();
        if errors.is_empty() {
            Ok(Engine { kb })
        } else {
            Err(EngineError::InvalidKb(errors))
        }
    }

    pub fn kb(&self) -> &Arc<KnowledgeBase> {
        &self.kb
    }

    pub fn start(&self) -> EngineState {
        let module = self.kb.module_index(self.kb.entry.as_str()).unwrap_or_default();
        let mut state = EngineState {
            kb: Arc::clone(&self.kb),
            memo: AnswerMemo::default(),
            trace: Vec::new(),
            cursor: Cursor {
                module,
                rule: 0,
                literal: 0,
            },
            pending: None,
            outcome: None,
        };
        state.step();
        state
    }

    /// Drives a session from a preset answer map.
    pub fn run_with_answers(&self, answers: &Answers) -> Result<(Outcome, Vec<TraceEvent>), EngineError> {
        let mut state = self.start();
        loop {
            if let Some(outcome) = state.outcome.clone() {
                return Ok((outcome, state.trace));
            }
            let q = state.pending.clone().expect("unfinished session has a pending question");
            let a = *answers.get(&q).ok_or(EngineError::MissingAnswer(q.clone()))?;
            state.submit_answer(&q, a)?;
        }
    }
}

/// Validates `kb` and starts a session at the entry module's first rule.
pub fn start(kb: impl Into<Arc<KnowledgeBase>>) -> Result<EngineState, EngineError> {
    Ok(Engine::new(kb)?.start())
}

/// Batch driver: validates `kb` and runs a whole session from `answers`.
pub fn run_with_answers(
    kb: impl Into<Arc<KnowledgeBase>>,
    answers: &Answers,
) -> Result<(Outcome, Vec<TraceEvent>), EngineError> {
    Engine::new(kb)?.run_with_answers(answers)
}

/// One diagnosis session. Cheap to clone; the knowledge base is shared.
#[derive(Debug, Clone)]
pub struct EngineState {
    kb: Arc<KnowledgeBase>,
    memo: AnswerMemo,
    trace: Vec<TraceEvent>,
    cursor: Cursor,
    pending: Option<QuestionId>,
    outcome: Option<Outcome>,
}

impl EngineState {
    pub fn kb(&self) -> &Arc<KnowledgeBase> {
        &self.kb
    }

    pub fn memo(&self) -> &AnswerMemo {
        &self.memo
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn cursor(&self) -> Cursor {
        self.cursor
    }

    pub fn pending(&self) -> Option<&QuestionId> {
        self.pending.as_ref()
    }

    /// The pending question with its prompt.
    pub fn pending_question(&self) -> Option<&Question> {
        self.pending.as_ref().and_then(|q| self.kb.question(q))
    }

    /// 1-based position of the pending question among all asked questions.
    pub fn pending_ordinal(&self) -> Option<usize> {
        self.pending.as_ref().map(|_| self.memo.len() + 1)
    }

    pub fn outcome(&self) -> Option<&Outcome> {
        self.outcome.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.outcome.is_some()
    }

    /// Records the answer to the pending question and resumes evaluation
    /// until the next question or the end of the session. On error the
    /// state is left untouched.
    pub fn submit_answer(&mut self, q: &QuestionId, a: Answer) -> Result<(), EngineError> {
        if self.outcome.is_some() {
            return Err(EngineError::SessionFinished);
        }
        if self.pending.as_ref() != Some(q) {
            return Err(EngineError::NotPending(q.clone()));
        }
        let prompt = self.kb.question(q).map(|q| q.text.clone()).unwrap_or_default();
        self.pending = None;
        self.memo.record(q.clone(), a);
        self.trace.push(TraceEvent::Asked {
            question: q.clone(),
            prompt,
            answer: a,
        });
        self.step();
        Ok(())
    }

    /// Questions answered so far, in the order they were asked.
    pub fn asked_questions(&self) -> Vec<QuestionId> {
        self.asked().map(|(q, _, _)| q.clone()).collect()
    }

    /// `(question, prompt, answer)` for every Asked event, in order.
    pub fn asked(&self) -> impl Iterator<Item = (&QuestionId, &str, Answer)> {
        self.trace.iter().filter_map(|e| match e {
            TraceEvent::Asked {
                question,
                prompt,
                answer,
            } => Some((question, prompt.as_str(), *answer)),
            _ => None,
        })
    }

    pub fn explain(&self) -> Result<Explanation, EngineError> {
        let outcome = self.outcome.clone().ok_or(EngineError::SessionUnfinished)?;
        let ask_order: HashMap<&QuestionId, usize> =
            self.asked().enumerate().map(|(i, (q, _, _))| (q, i)).collect();

        let mut dispatch_path = Vec::new();
        let mut failed = Vec::new();
        for (i, event) in self.trace.iter().enumerate() {
            match event {
                TraceEvent::RuleFailed {
                    module,
                    rule,
                    failed_at,
                } => failed.push(FailedRule {
                    module: module.clone(),
                    rule: rule.clone(),
                    failed_at: failed_at.clone(),
                }),
                TraceEvent::Dispatched { from_module, .. } => {
                    // Failures before a dispatch belong to the dispatching
                    // module; the report covers the deciding module only.
                    if let Some(TraceEvent::RuleFired { rule, .. }) = i.checked_sub(1).map(|j| &self.trace[j]) {
                        dispatch_path.push(RuleRef {
                            module: from_module.clone(),
                            rule: rule.clone(),
                        });
                    }
                    failed.clear();
                }
                _ => {}
            }
        }

        let (fired, supporting) = match &outcome {
            Outcome::Diagnosed { module, rule, .. } => {
                let fired_rule = self
                    .kb
                    .module(module.as_str())
                    .and_then(|m| m.rule(rule.as_str()));
                let mut supporting: Vec<SupportingAnswer> = fired_rule
                    .map(|r| {
                        r.literals
                            .iter()
                            .map(|l| SupportingAnswer {
                                question: l.question.clone(),
                                prompt: self.kb.question(&l.question).map(|q| q.text.clone()).unwrap_or_default(),
                                answer: l.expected,
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                supporting.sort_by_key(|s| ask_order.get(&s.question).copied().unwrap_or(usize::MAX));
                (
                    Some(RuleRef {
                        module: module.clone(),
                        rule: rule.clone(),
                    }),
                    supporting,
                )
            }
            Outcome::NoMatch { .. } => (None, Vec::new()),
        };

        Ok(Explanation {
            outcome,
            fired,
            supporting,
            failed,
            dispatch_path,
        })
    }

    fn finish(&mut self, outcome: Outcome) {
        self.trace.push(TraceEvent::Finished {
            outcome: outcome.clone(),
        });
        self.outcome = Some(outcome);
    }

    /// Advances the cursor until a question must be asked or the session ends.
    fn step(&mut self) {
        let kb = Arc::clone(&self.kb);
        loop {
            let module = &kb.modules[self.cursor.module];
            let Some(rule) = module.rules.get(self.cursor.rule) else {
                self.finish(Outcome::NoMatch {
                    last_module: module.name.clone(),
                });
                return;
            };

            match rule.literals.get(self.cursor.literal) {
                Some(lit) => match self.memo.get(&lit.question) {
                    Some(a) if a == lit.expected => self.cursor.literal += 1,
                    Some(_) => {
                        self.trace.push(TraceEvent::RuleFailed {
                            module: module.name.clone(),
                            rule: rule.id.clone(),
                            failed_at: lit.question.clone(),
                        });
                        self.cursor.rule += 1;
                        self.cursor.literal = 0;
                    }
                    None => {
                        self.pending = Some(lit.question.clone());
                        return;
                    }
                },
                None => {
                    self.trace.push(TraceEvent::RuleFired {
                        module: module.name.clone(),
                        rule: rule.id.clone(),
                    });
                    match &rule.consequent {
                        Consequent::Diagnose(d) => {
                            self.finish(Outcome::Diagnosed {
                                module: module.name.clone(),
                                rule: rule.id.clone(),
                                diagnosis: d.clone(),
                            });
                            return;
                        }
                        Consequent::Dispatch(target) => {
                            self.trace.push(TraceEvent::Dispatched {
                                from_module: module.name.clone(),
                                to_module: target.clone(),
                            });
                            // Validated knowledge bases always resolve targets.
                            let to = kb.module_index(target.as_str()).expect("dispatch target resolves");
                            self.cursor = Cursor {
                                module: to,
                                rule: 0,
                                literal: 0,
                            };
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleRef {
    pub module: Ident,
    pub rule: Ident,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedRule {
    pub module: Ident,
    pub rule: Ident,
    pub failed_at: QuestionId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportingAnswer {
    pub question: QuestionId,
    pub prompt: String,
    pub answer: Answer,
}

/// Why a finished session ended the way it did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub outcome: Outcome,
    /// The diagnosing rule; absent on no-match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fired: Option<RuleRef>,
    /// The fired rule's literals, in the order the questions were asked.
    pub supporting: Vec<SupportingAnswer>,
    /// Rules tried and rejected in the module that decided the outcome.
    pub failed: Vec<FailedRule>,
    /// Dispatch rules that led from the entry module to the deciding module.
    pub dispatch_path: Vec<RuleRef>,
}
