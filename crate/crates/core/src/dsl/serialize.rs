use std::fmt::Write;

use crate::model::{Consequent, KnowledgeBase};

/// Renders `kb` in canonical form: two-space indentation, one declaration per
/// line, LF line endings. Comments from the original source are not kept.
pub fn serialize_kb(kb: &KnowledgeBase) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "kb {} version {} entry {}",
        quote(&kb.title),
        kb.version,
        kb.entry
    );
    for module in &kb.modules {
        out.push('\n');
        let _ = writeln!(out, "module {} {{", module.name);
        for q in &module.questions {
            let _ = writeln!(out, "  question {} {}", q.id.local, quote(&q.text));
        }
        for rule in &module.rules {
            let _ = writeln!(out, "  rule {} {{", rule.id);
            for lit in &rule.literals {
                let _ = writeln!(out, "    {} = {}", lit.question.local, lit.expected);
            }
            match &rule.consequent {
                Consequent::Dispatch(target) => {
                    let _ = writeln!(out, "    dispatch {target}");
                }
                Consequent::Diagnose(d) => {
                    out.push_str("    diagnose {\n");
                    let _ = writeln!(out, "      name: {}", quote(&d.name));
                    if !d.info.is_empty() {
                        let _ = writeln!(out, "      info: {}", quote(&d.info));
                    }
                    if !d.treatment.is_empty() {
                        let _ = writeln!(out, "      treatment: {}", quote(&d.treatment));
                    }
                    for image in &d.images {
                        let _ = writeln!(out, "      image: {}", quote(image));
                    }
                    out.push_str("    }\n");
                }
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
    }
    out
}

/// Quotes a string using the DSL escapes `\"`, `\\`, `\n` and `\t`.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
