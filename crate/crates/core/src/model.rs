//! Immutable data model for knowledge bases.
//!
//! A [`KnowledgeBase`] is an ordered list of [`RuleModule`]s with one entry
//! module. Each module declares yes/no [`Question`]s and an ordered list of
//! [`Rule`]s; a rule is an ordered conjunction of [`Literal`]s that either
//! diagnoses or dispatches into another module. Order matters everywhere:
//! rules are tried first-to-last and literals are asked left-to-right.
//!
//! The types are plain data. Structural invariants (unique names, resolved
//! references, acyclic dispatch) are checked by [`crate::dsl::validate_kb`],
//! so knowledge bases can be assembled programmatically and validated once.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown answer token `{0}` (expected `si` or `no`)")]
    UnknownAnswerToken(String),
    #[error("invalid identifier `{0}` (expected [a-z_][a-z0-9_]*)")]
    InvalidIdent(String),
    #[error("invalid question key `{0}` (expected `module.local`)")]
    InvalidQuestionKey(String),
}

/// A yes/no answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Answer {
    No,
    Si,
}

impl Answer {
    pub const ALL: [Answer; 2] = [Answer::No, Answer::Si];

    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Si => "si",
            Answer::No => "no",
        }
    }

    pub fn flip(self) -> Answer {
        match self {
            Answer::Si => Answer::No,
            Answer::No => Answer::Si,
        }
    }
}

/// Parses a user answer: trims surrounding whitespace, lowercases ASCII and
/// accepts `si`, `sí` and `no`.
pub fn answer_from_token(token: &str) -> Result<Answer, ModelError> {
    let normalized = token.trim().to_ascii_lowercase();
    match normalized.as_str() {
        "si" | "sí" => Ok(Answer::Si),
        "no" => Ok(Answer::No),
        _ => Err(ModelError::UnknownAnswerToken(token.to_string())),
    }
}

impl FromStr for Answer {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        answer_from_token(s)
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Answer {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        // Serialized forms are canonical: only the exact tokens are accepted.
        let s = String::deserialize(deserializer)?;
        match s.as_str() {
            "si" => Ok(Answer::Si),
            "no" => Ok(Answer::No),
            _ => Err(serde::de::Error::custom(ModelError::UnknownAnswerToken(s))),
        }
    }
}

/// An identifier matching `[a-z_][a-z0-9_]*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ident(String);

impl Ident {
    pub fn new(s: impl Into<String>) -> Result<Ident, ModelError> {
        let s = s.into();
        if is_ident(&s) {
            Ok(Ident(s))
        } else {
            Err(ModelError::InvalidIdent(s))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut bytes = s.bytes();
    match bytes.next() {
        Some(b) if b == b'_' || b.is_ascii_lowercase() => {}
        _ => return false,
    }
    bytes.all(|b| b == b'_' || b.is_ascii_lowercase() || b.is_ascii_digit())
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Ident {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl PartialEq<str> for Ident {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for Ident {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

impl TryFrom<&str> for Ident {
    type Error = ModelError;

    fn try_from(s: &str) -> Result<Self, Self::Error> {
        Ident::new(s)
    }
}

impl std::str::FromStr for Ident {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ident::new(s)
    }
}

impl Serialize for Ident {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Ident {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ident::new(s).map_err(serde::de::Error::custom)
    }
}

/// Module-scoped question identifier; its global key is `module.local`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuestionId {
    pub module: Ident,
    pub local: Ident,
}

impl QuestionId {
    pub fn new(module: &str, local: &str) -> Result<QuestionId, ModelError> {
        Ok(QuestionId {
            module: Ident::new(module)?,
            local: Ident::new(local)?,
        })
    }

    /// `module.local`. Injective because `.` is not an identifier character.
    pub fn global_key(&self) -> String {
        format!("{}.{}", self.module, self.local)
    }
}

/// Free-function form of [`QuestionId::global_key`].
pub fn global_key(q: &QuestionId) -> String {
    q.global_key()
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.module, self.local)
    }
}

impl FromStr for QuestionId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::InvalidQuestionKey(s.to_string());
        let (module, local) = s.split_once('.').ok_or_else(bad)?;
        QuestionId::new(module, local).map_err(|_| bad())
    }
}

impl Serialize for QuestionId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QuestionId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: QuestionId,
    pub text: String,
}

/// One `(question, expected answer)` condition of a rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Literal {
    pub question: QuestionId,
    pub expected: Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Diagnosis {
    pub name: String,
    #[serde(default)]
    pub info: String,
    #[serde(default)]
    pub treatment: String,
    #[serde(default)]
    pub images: Vec<String>,
}

impl Diagnosis {
    pub fn named(name: impl Into<String>) -> Diagnosis {
        Diagnosis {
            name: name.into(),
            ..Diagnosis::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Consequent {
    Diagnose(Diagnosis),
    Dispatch(Ident),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub id: Ident,
    pub literals: Vec<Literal>,
    pub consequent: Consequent,
}

impl Rule {
    /// The expected answer this rule requires for `q`, if it mentions `q`.
    pub fn expects(&self, q: &QuestionId) -> Option<Answer> {
        self.literals
            .iter()
            .find(|l| &l.question == q)
            .map(|l| l.expected)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleModule {
    pub name: Ident,
    pub questions: Vec<Question>,
    pub rules: Vec<Rule>,
}

impl RuleModule {
    pub fn new(name: Ident) -> RuleModule {
        RuleModule {
            name,
            questions: Vec::new(),
            rules: Vec::new(),
        }
    }

    pub fn question(&self, id: &QuestionId) -> Option<&Question> {
        self.questions.iter().find(|q| &q.id == id)
    }

    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Diagnoses in rule order (dispatch rules skipped).
    pub fn diagnoses(&self) -> impl Iterator<Item = &Diagnosis> {
        self.rules.iter().filter_map(|r| match &r.consequent {
            Consequent::Diagnose(d) => Some(d),
            Consequent::Dispatch(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub title: String,
    pub version: u64,
    pub entry: Ident,
    pub modules: Vec<RuleModule>,
}

impl KnowledgeBase {
    pub fn module(&self, name: &str) -> Option<&RuleModule> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn module_index(&self, name: &str) -> Option<usize> {
        self.modules.iter().position(|m| m.name == name)
    }

    pub fn entry_module(&self) -> Option<&RuleModule> {
        self.module(self.entry.as_str())
    }

    pub fn question(&self, id: &QuestionId) -> Option<&Question> {
        self.module(id.module.as_str())?.question(id)
    }

    pub fn questions(&self) -> impl Iterator<Item = &Question> {
        self.modules.iter().flat_map(|m| m.questions.iter())
    }
}

/// Final result of a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Diagnosed {
        module: Ident,
        rule: Ident,
        diagnosis: Diagnosis,
    },
    NoMatch {
        last_module: Ident,
    },
}

impl Outcome {
    pub fn diagnosis(&self) -> Option<&Diagnosis> {
        match self {
            Outcome::Diagnosed { diagnosis, .. } => Some(diagnosis),
            Outcome::NoMatch { .. } => None,
        }
    }

    pub fn module(&self) -> &Ident {
        match self {
            Outcome::Diagnosed { module, .. } => module,
            Outcome::NoMatch { last_module } => last_module,
        }
    }
}
