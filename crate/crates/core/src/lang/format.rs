//! Canonical text for rules.

use alloc::format;
use alloc::string::String;
use core::fmt::Write;

use super::ast::*;

/// Renders a rule in canonical syntax. `parse_rule(&format_rule(r))` is
/// structurally equal to `r`.
pub fn format_rule(rule: &Rule) -> String {
    let mut out = String::new();
    if let Some(name) = &rule.name {
        out.push_str(name);
        out.push_str(": ");
    }
    if let RuleKind::Weighted { weight, .. } = rule.kind {
        out.push_str(&format_weight(weight));
        out.push_str(": ");
    }
    match &rule.body {
        RuleBody::Logical(l) => write_logical(&mut out, l),
        RuleBody::Arithmetic(a) => {
            write_expr(&mut out, &a.lhs);
            out.push(' ');
            out.push_str(a.comparator.symbol());
            out.push(' ');
            write_expr(&mut out, &a.rhs);
        }
    }
    match rule.kind {
        RuleKind::Hard => out.push_str(" ."),
        RuleKind::Weighted { squared: true, .. } => out.push_str(" ^2"),
        RuleKind::Weighted { squared: false, .. } => {}
    }
    if let RuleBody::Arithmetic(a) = &rule.body {
        for filter in &a.filters {
            out.push_str(" {");
            out.push_str(&filter.variable);
            out.push_str(": ");
            for (i, lit) in filter.conditions.iter().enumerate() {
                if i > 0 {
                    out.push_str(" & ");
                }
                write_literal(&mut out, lit);
            }
            out.push('}');
        }
    }
    out
}

fn write_logical(out: &mut String, rule: &LogicalRule) {
    for (i, item) in rule.body.iter().enumerate() {
        if i > 0 {
            out.push_str(" & ");
        }
        match item {
            BodyItem::Literal(l) => write_literal(out, l),
            BodyItem::Builtin(b) => {
                write_term(out, &b.lhs);
                out.push_str(match b.op {
                    BuiltinOp::Ne => " != ",
                    BuiltinOp::Eq => " == ",
                });
                write_term(out, &b.rhs);
            }
        }
    }
    if !rule.body.is_empty() {
        out.push_str(" -> ");
    }
    for (i, lit) in rule.head.iter().enumerate() {
        if i > 0 {
            out.push_str(" | ");
        }
        write_literal(out, lit);
    }
}

pub(crate) fn write_literal(out: &mut String, lit: &Literal) {
    if lit.negated {
        out.push('~');
    }
    write_atom(out, &lit.atom);
}

pub(crate) fn write_atom(out: &mut String, atom: &AtomTemplate) {
    out.push_str(&atom.predicate);
    out.push('(');
    for (i, arg) in atom.args.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_term(out, arg);
    }
    out.push(')');
}

fn write_term(out: &mut String, term: &Term) {
    match term {
        Term::Constant(c) => write_constant(out, c),
        Term::Variable(v) => out.push_str(v),
        Term::Summation(v) => {
            out.push('+');
            out.push_str(v);
        }
    }
}

/// Writes a single-quoted constant, escaping quotes and backslashes.
pub fn write_constant(out: &mut String, text: &str) {
    out.push('\'');
    for c in text.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
}

fn write_expr(out: &mut String, expr: &LinearExpr) {
    let mut first = true;
    for term in &expr.terms {
        let c = term.coefficient;
        let magnitude = c.abs();
        if first {
            if c < 0.0 {
                out.push('-');
            }
        } else {
            out.push_str(if c < 0.0 { " - " } else { " + " });
        }
        if magnitude != 1.0 {
            let _ = write!(out, "{} * ", magnitude);
        }
        write_atom(out, &term.atom);
        first = false;
    }
    if first {
        if expr.constant < 0.0 {
            out.push('-');
        }
        let _ = write!(out, "{}", expr.constant.abs());
    } else if expr.constant != 0.0 {
        out.push_str(if expr.constant < 0.0 { " - " } else { " + " });
        let _ = write!(out, "{}", expr.constant.abs());
    }
}

fn format_weight(weight: f64) -> String {
    let text = format!("{weight}");
    if text.contains('.') {
        text
    } else {
        format!("{text}.0")
    }
}
