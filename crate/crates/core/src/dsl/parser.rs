//! Recursive-descent parser for `.fdx` sources.
//!
//! ```text
//! kb_file    := "kb" STRING "version" INT "entry" IDENT module*
//! module     := "module" IDENT "{" (question | rule)* "}"
//! question   := "question" IDENT STRING
//! rule       := "rule" IDENT "{" literal+ consequent "}"
//! literal    := IDENT "=" ("si" | "no")
//! consequent := "dispatch" IDENT
//!             | "diagnose" "{" "name" ":" STRING
//!                 ("info" ":" STRING)? ("treatment" ":" STRING)?
//!                 ("image" ":" STRING)* "}"
//! ```
//!
//! Keywords are contextual, so any identifier may name a question. Inside a
//! rule body a word `dispatch`/`diagnose` starts the consequent unless the
//! next token is `=`.

use super::diagnostic::{DiagCode, ParseDiagnostic, Severity, SourceSpan};
use super::lexer::{Tok, Token};
use crate::model::{
    Answer, Consequent, Diagnosis, Ident, KnowledgeBase, Literal, Question, QuestionId, Rule,
    RuleModule,
};

/// Source positions parallel to the model vectors of a parsed knowledge base.
#[derive(Debug, Clone, Default)]
pub(crate) struct SpanIndex {
    pub entry: Option<SourceSpan>,
    pub modules: Vec<ModuleSpans>,
}

#[derive(Debug, Clone)]
pub(crate) struct ModuleSpans {
    pub name: SourceSpan,
    pub questions: Vec<QuestionSpans>,
    pub rules: Vec<RuleSpans>,
}

#[derive(Debug, Clone)]
pub(crate) struct QuestionSpans {
    pub id: SourceSpan,
    pub text: SourceSpan,
}

#[derive(Debug, Clone)]
pub(crate) struct RuleSpans {
    pub id: SourceSpan,
    pub literals: Vec<SourceSpan>,
    pub consequent: SourceSpan,
}

struct Failed;

type PResult<T> = Result<T, Failed>;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    errors: Vec<ParseDiagnostic>,
}

struct Header {
    title: String,
    version: u64,
    entry: Ident,
    entry_span: SourceSpan,
}

/// Parses a token stream. Returns the knowledge base only if no syntax error
/// was found; structural validation is the caller's job.
pub(crate) fn parse_tokens(
    tokens: Vec<Token>,
) -> (Option<(KnowledgeBase, SpanIndex)>, Vec<ParseDiagnostic>) {
    let mut p = Parser {
        tokens,
        pos: 0,
        errors: Vec::new(),
    };
    let header = match p.header() {
        Ok(h) => Some(h),
        Err(Failed) => {
            p.sync_top();
            None
        }
    };

    let mut modules = Vec::new();
    let mut spans = Vec::new();
    loop {
        match p.peek() {
            Tok::Eof => break,
            Tok::Word(w) if w == "module" => {
                if let Some((m, s)) = p.module() {
                    modules.push(m);
                    spans.push(s);
                }
            }
            other => {
                let msg = format!("expected `module`, found {}", other.describe());
                p.error_here(msg);
                p.bump();
                p.sync_top();
            }
        }
    }

    let errors = p.errors;
    match header {
        Some(h) if errors.is_empty() => {
            let kb = KnowledgeBase {
                title: h.title,
                version: h.version,
                entry: h.entry,
                modules,
            };
            let index = SpanIndex {
                entry: Some(h.entry_span),
                modules: spans,
            };
            (Some((kb, index)), errors)
        }
        _ => (None, errors),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_nth(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> SourceSpan {
        self.tokens[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&mut self, span: SourceSpan, message: String) {
        self.errors.push(ParseDiagnostic {
            severity: Severity::Error,
            code: DiagCode::Syntax,
            span: Some(span),
            location: String::new(),
            message,
        });
    }

    fn error_here(&mut self, message: String) {
        let span = self.span();
        self.error_at(span, message);
    }

    fn expected(&mut self, what: &str) -> Failed {
        let msg = format!("expected {what}, found {}", self.peek().describe());
        self.error_here(msg);
        Failed
    }

    fn is_word(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w == kw)
    }

    fn keyword(&mut self, kw: &str) -> PResult<SourceSpan> {
        if self.is_word(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.expected(&format!("`{kw}`")))
        }
    }

    fn punct(&mut self, tok: Tok) -> PResult<SourceSpan> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            Err(self.expected(&tok.describe()))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(Ident, SourceSpan)> {
        if let Tok::Word(w) = self.peek() {
            // The lexer only produces words matching the identifier grammar.
            let ident = Ident::new(w.as_str()).map_err(|_| Failed)?;
            Ok((ident, self.bump().span))
        } else {
            Err(self.expected(what))
        }
    }

    fn string(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        if let Tok::Str(s) = self.peek() {
            let s = s.clone();
            Ok((s, self.bump().span))
        } else {
            Err(self.expected(what))
        }
    }

    fn header(&mut self) -> PResult<Header> {
        self.keyword("kb")?;
        let (title, _) = self.string("knowledge base title string")?;
        self.keyword("version")?;
        let version = match self.peek() {
            Tok::Int(n) => {
                let n = *n;
                self.bump();
                n
            }
            _ => return Err(self.expected("version number")),
        };
        self.keyword("entry")?;
        let (entry, entry_span) = self.ident("entry module name")?;
        Ok(Header {
            title,
            version,
            entry,
            entry_span,
        })
    }

    /// Skips to the next `module` keyword at the top level.
    fn sync_top(&mut self) {
        while !matches!(self.peek(), Tok::Eof) && !self.is_word("module") {
            self.bump();
        }
    }

    /// Skips to the next item keyword inside a module body. `depth` is the
    /// number of braces opened since the module's own `{`.
    fn sync_item(&mut self, mut depth: usize) {
        loop {
            match self.peek() {
                Tok::Eof => return,
                Tok::Word(w) if depth == 0 && matches!(w.as_str(), "question" | "rule" | "module") => {
                    return
                }
                Tok::LBrace => depth += 1,
                Tok::RBrace if depth == 0 => return,
                Tok::RBrace => depth -= 1,
                _ => {}
            }
            self.bump();
        }
    }

    fn module(&mut self) -> Option<(RuleModule, ModuleSpans)> {
        let module_kw = self.bump().span;
        let header = self
            .ident("module name")
            .and_then(|(name, span)| self.punct(Tok::LBrace).map(|_| (name, span)));
        let (name, name_span) = match header {
            Ok(h) => h,
            Err(Failed) => {
                self.bump();
                self.sync_top();
                return None;
            }
        };

        let mut module = RuleModule::new(name);
        let mut spans = ModuleSpans {
            name: name_span,
            questions: Vec::new(),
            rules: Vec::new(),
        };
        let mut failed = false;
        loop {
            match self.peek().clone() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Eof => {
                    self.error_at(module_kw, format!("module `{}` is never closed", module.name));
                    failed = true;
                    break;
                }
                Tok::Word(w) if w == "question" => match self.question(&module.name) {
                    Ok((q, s)) => {
                        module.questions.push(q);
                        spans.questions.push(s);
                    }
                    Err(Failed) => {
                        failed = true;
                        self.sync_item(0);
                    }
                },
                Tok::Word(w) if w == "rule" => match self.rule(&module.name) {
                    Ok((r, s)) => {
                        module.rules.push(r);
                        spans.rules.push(s);
                    }
                    Err((Failed, depth)) => {
                        failed = true;
                        self.sync_item(depth);
                    }
                },
                Tok::Word(w) if w == "module" => {
                    // Missing `}`; recovery already reported, or report now.
                    if !failed {
                        self.error_here(format!("expected `}}` closing module `{}`", module.name));
                    }
                    failed = true;
                    break;
                }
                _ => {
                    let _ = self.expected("`question`, `rule` or `}`");
                    failed = true;
                    self.bump();
                    self.sync_item(0);
                }
            }
        }
        (!failed).then_some((module, spans))
    }

    fn question(&mut self, module: &Ident) -> PResult<(Question, QuestionSpans)> {
        self.bump();
        let (local, id_span) = self.ident("question identifier")?;
        let (text, text_span) = self.string("question prompt string")?;
        Ok((
            Question {
                id: QuestionId {
                    module: module.clone(),
                    local,
                },
                text,
            },
            QuestionSpans {
                id: id_span,
                text: text_span,
            },
        ))
    }

    /// On failure also returns how many braces were opened, for resync.
    fn rule(&mut self, module: &Ident) -> Result<(Rule, RuleSpans), (Failed, usize)> {
        self.bump();
        let (id, id_span) = self.ident("rule identifier").map_err(|f| (f, 0))?;
        self.punct(Tok::LBrace).map_err(|f| (f, 0))?;

        let mut literals = Vec::new();
        let mut literal_spans = Vec::new();
        loop {
            let starts_consequent = matches!(self.peek(), Tok::Word(w) if w == "dispatch" || w == "diagnose")
                && *self.peek_nth(1) != Tok::Eq;
            if starts_consequent {
                break;
            }
            match self.peek() {
                Tok::Word(_) => {
                    let (lit, span) = self.literal(module).map_err(|f| (f, 1))?;
                    literals.push(lit);
                    literal_spans.push(span);
                }
                _ => return Err((self.expected("literal `question = si|no` or consequent"), 1)),
            }
        }
        if literals.is_empty() {
            self.error_here(format!("rule `{id}` needs at least one literal"));
            return Err((Failed, 1));
        }

        let (consequent, consequent_span) = if self.is_word("dispatch") {
            self.bump();
            let (target, span) = self.ident("dispatch target module").map_err(|f| (f, 1))?;
            (Consequent::Dispatch(target), span)
        } else {
            let (d, span) = self.diagnose().map_err(|(f, d)| (f, 1 + d))?;
            (Consequent::Diagnose(d), span)
        };
        self.punct(Tok::RBrace).map_err(|f| (f, 1))?;
        Ok((
            Rule {
                id,
                literals,
                consequent,
            },
            RuleSpans {
                id: id_span,
                literals: literal_spans,
                consequent: consequent_span,
            },
        ))
    }

    fn literal(&mut self, module: &Ident) -> PResult<(Literal, SourceSpan)> {
        let (local, span) = self.ident("question identifier")?;
        self.punct(Tok::Eq)?;
        let expected = match self.peek() {
            Tok::Word(w) if w == "si" => Answer::Si,
            Tok::Word(w) if w == "no" => Answer::No,
            _ => return Err(self.expected("`si` or `no`")),
        };
        self.bump();
        Ok((
            Literal {
                question: QuestionId {
                    module: module.clone(),
                    local,
                },
                expected,
            },
            span,
        ))
    }

    /// Returns the diagnosis and the span of its name string.
    fn diagnose(&mut self) -> Result<(Diagnosis, SourceSpan), (Failed, usize)> {
        self.bump();
        self.punct(Tok::LBrace).map_err(|f| (f, 0))?;
        let field = |p: &mut Parser, key: &str| -> PResult<(String, SourceSpan)> {
            p.keyword(key)?;
            p.punct(Tok::Colon)?;
            p.string(&format!("string value for `{key}`"))
        };
        let (name, name_span) = field(self, "name").map_err(|f| (f, 1))?;
        let mut d = Diagnosis::named(name);
        if self.is_word("info") {
            d.info = field(self, "info").map_err(|f| (f, 1))?.0;
        }
        if self.is_word("treatment") {
            d.treatment = field(self, "treatment").map_err(|f| (f, 1))?.0;
        }
        while self.is_word("image") {
            d.images.push(field(self, "image").map_err(|f| (f, 1))?.0);
        }
        if *self.peek() != Tok::RBrace {
            return Err((
                self.expected("`info`, `treatment`, `image` (in that order) or `}`"),
                1,
            ));
        }
        self.bump();
        Ok((d, name_span))
    }
}
