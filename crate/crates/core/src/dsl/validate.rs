use std::collections::{HashMap, HashSet};

use super::diagnostic::{DiagCode, ParseDiagnostic, Severity, SourceSpan};
use super::parser::SpanIndex;
use crate::model::{Consequent, KnowledgeBase};

/// Checks every structural invariant of `kb`.
///
/// Returns an empty list iff the knowledge base is well formed. Errors make
/// a knowledge base unusable; the only warning is `UNREACHABLE_MODULE`.
pub fn validate_kb(kb: &KnowledgeBase) -> Vec<ParseDiagnostic> {
    check(kb, None)
}

struct Sink<'a> {
    spans: Option<&'a SpanIndex>,
    out: Vec<ParseDiagnostic>,
}

#[derive(Clone, Copy)]
enum At {
    Entry,
    Module(usize),
    Question(usize, usize),
    QuestionText(usize, usize),
    Rule(usize, usize),
    Literal(usize, usize, usize),
    Consequent(usize, usize),
}

impl Sink<'_> {
    fn span(&self, at: At) -> Option<SourceSpan> {
        let idx = self.spans?;
        match at {
            At::Entry => idx.entry,
            At::Module(m) => idx.modules.get(m).map(|s| s.name),
            At::Question(m, q) => idx.modules.get(m)?.questions.get(q).map(|s| s.id),
            At::QuestionText(m, q) => idx.modules.get(m)?.questions.get(q).map(|s| s.text),
            At::Rule(m, r) => idx.modules.get(m)?.rules.get(r).map(|s| s.id),
            At::Literal(m, r, l) => idx.modules.get(m)?.rules.get(r)?.literals.get(l).copied(),
            At::Consequent(m, r) => idx.modules.get(m)?.rules.get(r).map(|s| s.consequent),
        }
    }

    fn push(&mut self, severity: Severity, code: DiagCode, at: At, location: String, message: String) {
        let span = self.span(at);
        self.out.push(ParseDiagnostic {
            severity,
            code,
            span,
            location,
            message,
        });
    }

    fn error(&mut self, code: DiagCode, at: At, location: String, message: String) {
        self.push(Severity::Error, code, at, location, message);
    }
}

pub(crate) fn check(kb: &KnowledgeBase, spans: Option<&SpanIndex>) -> Vec<ParseDiagnostic> {
    let mut sink = Sink {
        spans,
        out: Vec::new(),
    };

    // First occurrence wins for name resolution.
    let mut module_index: HashMap<&str, usize> = HashMap::new();
    for (mi, module) in kb.modules.iter().enumerate() {
        if module_index.contains_key(module.name.as_str()) {
            sink.error(
                DiagCode::DupModule,
                At::Module(mi),
                format!("module {}", module.name),
                format!("module `{}` is declared more than once", module.name),
            );
        } else {
            module_index.insert(module.name.as_str(), mi);
        }
    }
    let entry = module_index.get(kb.entry.as_str()).copied();
    if entry.is_none() {
        sink.error(
            DiagCode::NoEntry,
            At::Entry,
            "entry".to_string(),
            format!("entry module `{}` is not declared", kb.entry),
        );
    }

    for (mi, module) in kb.modules.iter().enumerate() {
        let mut questions = HashSet::new();
        for (qi, q) in module.questions.iter().enumerate() {
            let loc = format!("question {}", q.id);
            if q.id.module != module.name {
                sink.error(
                    DiagCode::ForeignQuestion,
                    At::Question(mi, qi),
                    loc.clone(),
                    format!("question `{}` is declared inside module `{}`", q.id, module.name),
                );
            }
            if !questions.insert(&q.id.local) {
                sink.error(
                    DiagCode::DupQuestion,
                    At::Question(mi, qi),
                    loc.clone(),
                    format!("question `{}` is declared more than once in module `{}`", q.id.local, module.name),
                );
            }
            if q.text.trim().is_empty() {
                sink.error(
                    DiagCode::EmptyText,
                    At::QuestionText(mi, qi),
                    loc,
                    format!("question `{}` has an empty prompt", q.id.local),
                );
            }
        }

        let mut rule_ids = HashSet::new();
        for (ri, rule) in module.rules.iter().enumerate() {
            let loc = format!("rule {}.{}", module.name, rule.id);
            if !rule_ids.insert(&rule.id) {
                sink.error(
                    DiagCode::DupRule,
                    At::Rule(mi, ri),
                    loc.clone(),
                    format!("rule `{}` is declared more than once in module `{}`", rule.id, module.name),
                );
            }
            if rule.literals.is_empty() {
                sink.error(
                    DiagCode::EmptyRule,
                    At::Rule(mi, ri),
                    loc.clone(),
                    format!("rule `{}` has no literals", rule.id),
                );
            }
            for (li, lit) in rule.literals.iter().enumerate() {
                let declared = lit.question.module == module.name && questions.contains(&lit.question.local);
                if !declared {
                    sink.error(
                        DiagCode::UndefQuestion,
                        At::Literal(mi, ri, li),
                        loc.clone(),
                        format!(
                            "rule `{}` refers to `{}`, which is not a question of module `{}`",
                            rule.id, lit.question, module.name
                        ),
                    );
                }
                if let Some(prev) = rule.literals[..li].iter().find(|p| p.question == lit.question) {
                    let (code, what) = if prev.expected == lit.expected {
                        (DiagCode::DupLiteral, "repeats")
                    } else {
                        (DiagCode::Contradiction, "contradicts")
                    };
                    sink.error(
                        code,
                        At::Literal(mi, ri, li),
                        loc.clone(),
                        format!(
                            "literal `{} = {}` {what} `{} = {}` earlier in rule `{}`",
                            lit.question.local, lit.expected, prev.question.local, prev.expected, rule.id
                        ),
                    );
                }
            }
            match &rule.consequent {
                Consequent::Dispatch(target) => {
                    if !module_index.contains_key(target.as_str()) {
                        sink.error(
                            DiagCode::UndefModule,
                            At::Consequent(mi, ri),
                            loc,
                            format!("rule `{}` dispatches to undeclared module `{target}`", rule.id),
                        );
                    }
                }
                Consequent::Diagnose(d) => {
                    if d.name.trim().is_empty() {
                        sink.error(
                            DiagCode::EmptyText,
                            At::Consequent(mi, ri),
                            loc,
                            format!("rule `{}` diagnoses with an empty name", rule.id),
                        );
                    }
                }
            }
        }
    }

    check_dispatch_graph(kb, &module_index, entry, &mut sink);
    sink.out
}

fn dispatch_edges(kb: &KnowledgeBase, module_index: &HashMap<&str, usize>, mi: usize) -> Vec<(usize, usize)> {
    kb.modules[mi]
        .rules
        .iter()
        .enumerate()
        .filter_map(|(ri, r)| match &r.consequent {
            Consequent::Dispatch(t) => module_index.get(t.as_str()).map(|&to| (ri, to)),
            Consequent::Diagnose(_) => None,
        })
        .collect()
}

fn check_dispatch_graph(
    kb: &KnowledgeBase,
    module_index: &HashMap<&str, usize>,
    entry: Option<usize>,
    sink: &mut Sink<'_>,
) {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = kb.modules.len();
    let edges: Vec<_> = (0..n).map(|mi| dispatch_edges(kb, module_index, mi)).collect();
    let mut marks = vec![Mark::New; n];

    // Iterative DFS; every back edge closes a cycle and is reported once.
    for root in 0..n {
        if marks[root] != Mark::New || module_index.get(kb.modules[root].name.as_str()) != Some(&root) {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        marks[root] = Mark::Active;
        while let Some(top) = stack.last_mut() {
            let mi = top.0;
            if let Some(&(ri, to)) = edges[mi].get(top.1) {
                top.1 += 1;
                match marks[to] {
                    Mark::New => {
                        marks[to] = Mark::Active;
                        stack.push((to, 0));
                    }
                    Mark::Active => {
                        let start = stack.iter().position(|&(m, _)| m == to).unwrap_or(0);
                        let mut path: Vec<&str> =
                            stack[start..].iter().map(|&(m, _)| kb.modules[m].name.as_str()).collect();
                        path.push(kb.modules[to].name.as_str());
                        let rule = &kb.modules[mi].rules[ri];
                        sink.error(
                            DiagCode::DispatchCycle,
                            At::Consequent(mi, ri),
                            format!("rule {}.{}", kb.modules[mi].name, rule.id),
                            format!("dispatch cycle: {}", path.join(" -> ")),
                        );
                    }
                    Mark::Done => {}
                }
            } else {
                marks[mi] = Mark::Done;
                stack.pop();
            }
        }
    }

    let Some(entry) = entry else { return };
    let mut reachable = vec![false; n];
    let mut queue = vec![entry];
    reachable[entry] = true;
    while let Some(mi) = queue.pop() {
        for &(_, to) in &edges[mi] {
            if !reachable[to] {
                reachable[to] = true;
                queue.push(to);
            }
        }
    }
    for (mi, module) in kb.modules.iter().enumerate() {
        let canonical = module_index.get(module.name.as_str()) == Some(&mi);
        if canonical && !reachable[mi] {
            sink.push(
                Severity::Warning,
                DiagCode::UnreachableModule,
                At::Module(mi),
                format!("module {}", module.name),
                format!("module `{}` is not reachable from entry `{}`", module.name, kb.entry),
            );
        }
    }
}
