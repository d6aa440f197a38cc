//! Static analysis of rule bases and the brute-force reference classifier.
//!
//! [`classify`] is the naive reading of first-match semantics: scan the rules
//! in order and return the first one whose literals all hold under a total
//! assignment. It never asks or memoizes anything, which makes it a useful
//! oracle for the interactive engine.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::dsl::Severity;
use crate::model::{Answer, Consequent, Ident, KnowledgeBase, Outcome, QuestionId, Rule, RuleModule};

/// Default enumeration cap: modules with up to 16 questions.
pub const DEFAULT_MATRIX_CAP: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("assignment has no answer for `{0}`")]
    IncompleteAssignment(QuestionId),
    #[error("module has {n} questions; 2^{n} assignments exceed the cap of {cap}")]
    TooLarge { n: usize, cap: u64 },
    #[error("unknown module `{0}`")]
    UnknownModule(String),
}

/// Anything that can answer a question for the oracle.
pub trait Assignment {
    fn answer(&self, q: &QuestionId) -> Option<Answer>;
}

impl Assignment for std::collections::BTreeMap<QuestionId, Answer> {
    fn answer(&self, q: &QuestionId) -> Option<Answer> {
        self.get(q).copied()
    }
}

impl Assignment for HashMap<QuestionId, Answer> {
    fn answer(&self, q: &QuestionId) -> Option<Answer> {
        self.get(q).copied()
    }
}

/// Result of classifying one module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification<'a> {
    Fired(&'a Rule),
    NoMatch,
}

impl Classification<'_> {
    /// The fired rule id, or `NO_MATCH`.
    pub fn label(&self) -> &str {
        match self {
            Classification::Fired(rule) => rule.id.as_str(),
            Classification::NoMatch => "NO_MATCH",
        }
    }
}

fn satisfies(rule: &Rule, assignment: &impl Assignment) -> bool {
    rule.literals
        .iter()
        .all(|l| assignment.answer(&l.question) == Some(l.expected))
}

/// First rule of `module` satisfied by `assignment`.
///
/// The assignment must answer every question the module's rules mention.
pub fn classify<'m>(
    module: &'m RuleModule,
    assignment: &impl Assignment,
) -> Result<Classification<'m>, AnalysisError> {
    for rule in &module.rules {
        for lit in &rule.literals {
            if assignment.answer(&lit.question).is_none() {
                return Err(AnalysisError::IncompleteAssignment(lit.question.clone()));
            }
        }
    }
    Ok(module
        .rules
        .iter()
        .find(|r| satisfies(r, assignment))
        .map_or(Classification::NoMatch, Classification::Fired))
}

/// Composes [`classify`] along the dispatch path starting at the entry
/// module. This is what the engine must agree with for total assignments.
pub fn classify_kb(kb: &KnowledgeBase, assignment: &impl Assignment) -> Result<Outcome, AnalysisError> {
    let mut module = kb
        .entry_module()
        .ok_or_else(|| AnalysisError::UnknownModule(kb.entry.to_string()))?;
    // A validated dispatch graph is acyclic, so a path visits each module at most once.
    for _ in 0..=kb.modules.len() {
        match classify(module, assignment)? {
            Classification::NoMatch => {
                return Ok(Outcome::NoMatch {
                    last_module: module.name.clone(),
                })
            }
            Classification::Fired(rule) => match &rule.consequent {
                Consequent::Diagnose(d) => {
                    return Ok(Outcome::Diagnosed {
                        module: module.name.clone(),
                        rule: rule.id.clone(),
                        diagnosis: d.clone(),
                    })
                }
                Consequent::Dispatch(target) => {
                    module = kb
                        .module(target.as_str())
                        .ok_or_else(|| AnalysisError::UnknownModule(target.to_string()))?;
                }
            },
        }
    }
    Err(AnalysisError::UnknownModule(format!("dispatch cycle through `{}`", module.name)))
}

/// One row of a decision matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixRow {
    /// Answers in question declaration order.
    pub answers: Vec<Answer>,
    /// Fired rule id, or `None` for no match.
    pub result: Option<Ident>,
}

struct Indexed<'a> {
    questions: &'a [QuestionId],
    values: &'a [Answer],
}

impl Assignment for Indexed<'_> {
    fn answer(&self, q: &QuestionId) -> Option<Answer> {
        self.questions.iter().position(|x| x == q).map(|i| self.values[i])
    }
}

fn nth_assignment(n_questions: usize, index: u64) -> Vec<Answer> {
    (0..n_questions)
        .map(|j| {
            if index >> (n_questions - 1 - j) & 1 == 1 {
                Answer::Si
            } else {
                Answer::No
            }
        })
        .collect()
}

/// Every total assignment over the module's declared questions with its
/// classification. Rows are in lexicographic order of declaration order with
/// `no < si`.
pub fn enumerate_matrix(module: &RuleModule, cap: u64) -> Result<Vec<MatrixRow>, AnalysisError> {
    let n = module.questions.len();
    let too_large = AnalysisError::TooLarge { n, cap };
    let total = 1u64.checked_shl(n as u32).filter(|_| n < 64).ok_or(too_large.clone())?;
    if total > cap {
        return Err(too_large);
    }
    let questions: Vec<QuestionId> = module.questions.iter().map(|q| q.id.clone()).collect();
    (0..total)
        .map(|i| {
            let answers = nth_assignment(n, i);
            let result = classify(
                module,
                &Indexed {
                    questions: &questions,
                    values: &answers,
                },
            )?;
            Ok(MatrixRow {
                answers,
                result: match result {
                    Classification::Fired(rule) => Some(rule.id.clone()),
                    Classification::NoMatch => None,
                },
            })
        })
        .collect()
}

/// CSV rendering of a decision matrix: header `q1,q2,...,result`, cells
/// `si`/`no`, result is a rule id or `NO_MATCH`. LF line endings.
pub fn matrix_csv(module: &RuleModule, rows: &[MatrixRow]) -> String {
    let mut out = String::new();
    for q in &module.questions {
        out.push_str(q.id.local.as_str());
        out.push(',');
    }
    out.push_str("result\n");
    for row in rows {
        for a in &row.answers {
            out.push_str(a.as_str());
            out.push(',');
        }
        out.push_str(row.result.as_ref().map_or("NO_MATCH", |r| r.as_str()));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LintCode {
    #[serde(rename = "SHADOWED_RULE")]
    ShadowedRule,
    #[serde(rename = "UNSATISFIABLE_RULE")]
    UnsatisfiableRule,
    #[serde(rename = "DUPLICATE_DIAGNOSIS_NAME")]
    DuplicateDiagnosisName,
    #[serde(rename = "UNUSED_QUESTION")]
    UnusedQuestion,
    #[serde(rename = "AMBIGUOUS_PAIR")]
    AmbiguousPair,
}

impl LintCode {
    pub fn as_str(self) -> &'static str {
        match self {
            LintCode::ShadowedRule => "SHADOWED_RULE",
            LintCode::UnsatisfiableRule => "UNSATISFIABLE_RULE",
            LintCode::DuplicateDiagnosisName => "DUPLICATE_DIAGNOSIS_NAME",
            LintCode::UnusedQuestion => "UNUSED_QUESTION",
            LintCode::AmbiguousPair => "AMBIGUOUS_PAIR",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            LintCode::ShadowedRule | LintCode::UnsatisfiableRule | LintCode::DuplicateDiagnosisName => {
                Severity::Error
            }
            LintCode::UnusedQuestion | LintCode::AmbiguousPair => Severity::Warning,
        }
    }
}

impl std::fmt::Display for LintCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessAnswer {
    pub question: QuestionId,
    pub answer: Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LintFinding {
    pub code: LintCode,
    pub severity: Severity,
    pub module: Ident,
    /// Rule or question ids the finding is about; for pairs, the later rule
    /// comes first.
    pub subjects: Vec<Ident>,
    pub message: String,
    /// A total assignment over the module's questions demonstrating the
    /// finding, in declaration order.
    pub proof: Option<Vec<WitnessAnswer>>,
}

impl std::fmt::Display for LintFinding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} [{}] {}: {}", self.severity, self.code, self.module, self.message)?;
        if let Some(proof) = &self.proof {
            let parts: Vec<String> = proof
                .iter()
                .map(|w| format!("{}={}", w.question.local, w.answer))
                .collect();
            write!(f, " (witness: {})", parts.join(", "))?;
        }
        Ok(())
    }
}

fn contradictory(rule: &Rule) -> Option<&QuestionId> {
    rule.literals.iter().enumerate().find_map(|(i, l)| {
        rule.literals[..i]
            .iter()
            .any(|p| p.question == l.question && p.expected != l.expected)
            .then_some(&l.question)
    })
}

/// `a`'s literals are a subset of `b`'s.
fn subsumes(a: &Rule, b: &Rule) -> bool {
    a.literals.iter().all(|la| b.literals.contains(la))
}

/// No shared question is required with opposite answers.
fn compatible(a: &Rule, b: &Rule) -> bool {
    a.literals
        .iter()
        .all(|la| b.expects(&la.question).is_none_or(|e| e == la.expected))
}

/// Total assignment over the module's questions that satisfies every rule in
/// `rules`; unmentioned questions default to `no`.
fn witness(module: &RuleModule, rules: &[&Rule]) -> Vec<WitnessAnswer> {
    module
        .questions
        .iter()
        .map(|q| WitnessAnswer {
            question: q.id.clone(),
            answer: rules
                .iter()
                .find_map(|r| r.expects(&q.id))
                .unwrap_or(Answer::No),
        })
        .collect()
}

/// Lints every module of `kb`.
///
/// * `SHADOWED_RULE`: an earlier consistent rule's literals are a subset of
///   this rule's, so this rule can never fire. When the module is within
///   [`DEFAULT_MATRIX_CAP`] the claim is also confirmed by enumeration.
/// * `UNSATISFIABLE_RULE`: the rule requires opposite answers to one question.
/// * `DUPLICATE_DIAGNOSIS_NAME`: two rules of a module diagnose the same name.
/// * `UNUSED_QUESTION` (warning): a declared question no rule mentions.
/// * `AMBIGUOUS_PAIR` (warning): two rules, neither subsuming the other, that
///   some assignment satisfies at once; declaration order decides silently.
pub fn lint(kb: &KnowledgeBase) -> Vec<LintFinding> {
    let mut findings = Vec::new();
    for module in &kb.modules {
        lint_module(module, &mut findings);
    }
    findings
}

fn lint_module(module: &RuleModule, out: &mut Vec<LintFinding>) {
    let finding = |code: LintCode, subjects: Vec<Ident>, message: String, proof| LintFinding {
        code,
        severity: code.severity(),
        module: module.name.clone(),
        subjects,
        message,
        proof,
    };

    let satisfiable: Vec<bool> = module.rules.iter().map(|r| contradictory(r).is_none()).collect();
    for (rule, ok) in module.rules.iter().zip(&satisfiable) {
        if !ok {
            let q = contradictory(rule).expect("contradiction present");
            out.push(finding(
                LintCode::UnsatisfiableRule,
                vec![rule.id.clone()],
                format!("rule `{}` requires both `si` and `no` for `{}`", rule.id, q.local),
                None,
            ));
        }
    }

    let matrix = enumerate_matrix(module, DEFAULT_MATRIX_CAP).ok();
    for (bi, b) in module.rules.iter().enumerate() {
        if !satisfiable[bi] {
            continue;
        }
        let shadow = module.rules[..bi]
            .iter()
            .zip(&satisfiable)
            .find(|(a, ok)| **ok && subsumes(a, b))
            .map(|(a, _)| a);
        if let Some(a) = shadow {
            let confirmation = match &matrix {
                Some(rows) => {
                    let fires = rows.iter().filter(|r| r.result.as_ref() == Some(&b.id)).count();
                    debug_assert_eq!(fires, 0, "subset shadowing must be exact");
                    format!("; confirmed over {} assignments", rows.len())
                }
                None => String::new(),
            };
            out.push(finding(
                LintCode::ShadowedRule,
                vec![b.id.clone(), a.id.clone()],
                format!(
                    "rule `{}` can never fire: every answer set satisfying it already satisfies earlier rule `{}`{}",
                    b.id, a.id, confirmation
                ),
                Some(witness(module, &[b])),
            ));
        }
    }

    for (bi, b) in module.rules.iter().enumerate() {
        if !satisfiable[bi] {
            continue;
        }
        for (ai, a) in module.rules[..bi].iter().enumerate() {
            if !satisfiable[ai] || subsumes(a, b) || !compatible(a, b) {
                continue;
            }
            out.push(finding(
                LintCode::AmbiguousPair,
                vec![b.id.clone(), a.id.clone()],
                format!(
                    "rules `{}` and `{}` can both be satisfied; `{}` wins by order",
                    a.id, b.id, a.id
                ),
                Some(witness(module, &[a, b])),
            ));
        }
    }

    let mut first_with_name: HashMap<&str, &Ident> = HashMap::new();
    for rule in &module.rules {
        if let Consequent::Diagnose(d) = &rule.consequent {
            match first_with_name.get(d.name.as_str()) {
                Some(first) => out.push(finding(
                    LintCode::DuplicateDiagnosisName,
                    vec![rule.id.clone(), (*first).clone()],
                    format!("rule `{}` repeats diagnosis \"{}\" of rule `{}`", rule.id, d.name, first),
                    None,
                )),
                None => {
                    first_with_name.insert(&d.name, &rule.id);
                }
            }
        }
    }

    let used: BTreeSet<&QuestionId> = module
        .rules
        .iter()
        .flat_map(|r| r.literals.iter().map(|l| &l.question))
        .collect();
    for q in &module.questions {
        if !used.contains(&q.id) {
            out.push(finding(
                LintCode::UnusedQuestion,
                vec![q.id.local.clone()],
                format!("question `{}` is not used by any rule", q.id.local),
                None,
            ));
        }
    }
}

/// Plain-text report, one finding per line.
pub fn render_findings(findings: &[LintFinding]) -> String {
    let mut out = String::new();
    for f in findings {
        let _ = writeln!(out, "{f}");
    }
    out
}
