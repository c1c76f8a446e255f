use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;
use crate::diag::{Diagnostic, DiagnosticCode};

/// Checks a parsed program. Diagnostics are data: the program is never
/// rejected here, callers decide what to do with errors.
///
/// Reported: arity mismatches, undeclared predicates (warning, the first-seen
/// arity is adopted), unsafe head variables (warning), unbound variables in
/// comparisons, duplicate filters, summation variables that do not occur in
/// exactly one argument position, and template placeholders out of range.
pub fn validate_program(program: &Program) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut arities: BTreeMap<&str, usize> = BTreeMap::new();
    for decl in &program.predicates {
        if decl.explicit {
            arities.insert(&decl.name, decl.arity);
        }
    }
    let mut warned: Vec<&str> = Vec::new();

    for rule in &program.rules {
        let mut atoms: Vec<&AtomTemplate> = rule.atoms();
        if let RuleBody::Arithmetic(a) = &rule.body {
            atoms.extend(a.filters.iter().flat_map(|f| f.conditions.iter().map(|l| &l.atom)));
        }
        for atom in atoms {
            match arities.get(atom.predicate.as_str()) {
                Some(&arity) if arity != atom.arity() => diags.push(
                    Diagnostic::error(
                        DiagnosticCode::ArityMismatch,
                        format!(
                            "`{}` used with {} arguments, but its arity is {}",
                            atom.predicate,
                            atom.arity(),
                            arity
                        ),
                    )
                    .at(rule.span)
                    .with_token(atom.predicate.clone()),
                ),
                Some(_) => {}
                None => {
                    arities.insert(&atom.predicate, atom.arity());
                    if !warned.contains(&atom.predicate.as_str()) {
                        warned.push(&atom.predicate);
                        diags.push(
                            Diagnostic::warning(
                                DiagnosticCode::UndeclaredPredicate,
                                format!(
                                    "predicate `{}` is not declared; assuming arity {}",
                                    atom.predicate,
                                    atom.arity()
                                ),
                            )
                            .at(rule.span)
                            .with_token(atom.predicate.clone()),
                        );
                    }
                }
            }
        }

        match &rule.body {
            RuleBody::Logical(l) => check_logical(rule, l, &mut diags),
            RuleBody::Arithmetic(a) => check_arithmetic(rule, a, &mut diags),
        }
        if let Some(template) = &rule.verbalization {
            let vars = rule.variables();
            for placeholder in placeholders(template) {
                if !vars.contains(&placeholder) {
                    diags.push(
                        Diagnostic::warning(
                            DiagnosticCode::TemplatePlaceholder,
                            format!("template placeholder `{{{placeholder}}}` is not a rule variable"),
                        )
                        .at(rule.span),
                    );
                }
            }
        }
    }

    for decl in &program.predicates {
        let arity = arities.get(decl.name.as_str()).copied().unwrap_or(decl.arity);
        for v in &decl.verbalizations {
            if let Some(pattern) = &v.pattern {
                if pattern.len() != arity {
                    diags.push(Diagnostic::error(
                        DiagnosticCode::ArityMismatch,
                        format!("verbalization pattern for `{}` has the wrong arity", decl.name),
                    ));
                }
            }
            for placeholder in placeholders(&v.template) {
                let ok = placeholder == "belief-qualifier"
                    || placeholder
                        .strip_prefix("arg")
                        .and_then(|n| n.parse::<usize>().ok())
                        .is_some_and(|n| n >= 1 && n <= arity);
                if !ok {
                    diags.push(Diagnostic::error(
                        DiagnosticCode::TemplatePlaceholder,
                        format!(
                            "placeholder `{{{placeholder}}}` is out of range for `{}`/{}",
                            decl.name, arity
                        ),
                    ));
                }
            }
        }
    }
    diags
}

fn check_logical(rule: &Rule, l: &LogicalRule, diags: &mut Vec<Diagnostic>) {
    let bound: Vec<&str> = l.body_literals().flat_map(|lit| lit.atom.variables()).collect();
    let all: Vec<&str> = l.atoms().flat_map(AtomTemplate::variables).collect();
    if l.body_literals().next().is_some() {
        let mut reported: Vec<&str> = Vec::new();
        for v in l.head.iter().flat_map(|lit| lit.atom.variables()) {
            if !bound.contains(&v) && !reported.contains(&v) {
                reported.push(v);
                diags.push(
                    Diagnostic::warning(
                        DiagnosticCode::UnsafeVariable,
                        format!("head variable `{v}` is not bound in the body"),
                    )
                    .at(rule.span)
                    .with_token(String::from(v)),
                );
            }
        }
    }
    for b in l.builtins() {
        for t in [&b.lhs, &b.rhs] {
            if let Some(v) = t.variable_name() {
                if !all.contains(&v) {
                    diags.push(
                        Diagnostic::error(
                            DiagnosticCode::UnboundBuiltin,
                            format!("variable `{v}` in a comparison does not occur in any atom"),
                        )
                        .at(rule.span)
                        .with_token(String::from(v)),
                    );
                }
            }
        }
    }
}

fn check_arithmetic(rule: &Rule, a: &ArithmeticRule, diags: &mut Vec<Diagnostic>) {
    let mut positions: BTreeMap<&str, usize> = BTreeMap::new();
    for atom in a.atoms() {
        for arg in &atom.args {
            if let Term::Summation(v) = arg {
                *positions.entry(v).or_default() += 1;
            }
        }
    }
    let plain: Vec<&str> = a
        .atoms()
        .flat_map(|atom| atom.args.iter())
        .filter_map(|t| match t {
            Term::Variable(v) => Some(v.as_str()),
            _ => None,
        })
        .collect();
    for (v, count) in &positions {
        if *count != 1 || plain.contains(v) {
            diags.push(
                Diagnostic::error(
                    DiagnosticCode::SummationMultiplicity,
                    format!("summation variable `{v}` must occur in exactly one argument position"),
                )
                .at(rule.span)
                .with_token(String::from(*v)),
            );
        }
    }
    let mut seen: Vec<&str> = Vec::new();
    for f in &a.filters {
        if seen.contains(&f.variable.as_str()) {
            diags.push(
                Diagnostic::error(
                    DiagnosticCode::DuplicateFilter,
                    format!("summation variable `{}` has more than one filter", f.variable),
                )
                .at(rule.span)
                .with_token(f.variable.clone()),
            );
        }
        seen.push(&f.variable);
    }
}

/// Names inside `{...}` placeholders of a template.
pub fn placeholders(template: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                out.push(&after[..close]);
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    out
}

impl Program {
    /// Adds implicit declarations (first-seen arity) for every predicate used
    /// without an explicit `@predicate` line.
    pub fn declare_implicit(&mut self) {
        let mut first_seen: Vec<(String, usize)> = Vec::new();
        for rule in &self.rules {
            let mut atoms = rule.atoms();
            if let RuleBody::Arithmetic(a) = &rule.body {
                atoms.extend(a.filters.iter().flat_map(|f| f.conditions.iter().map(|l| &l.atom)));
            }
            for atom in atoms {
                if !first_seen.iter().any(|(n, _)| *n == atom.predicate) {
                    first_seen.push((atom.predicate.clone(), atom.arity()));
                }
            }
        }
        for (name, arity) in first_seen {
            match self.predicates.iter_mut().find(|p| p.name == name) {
                Some(p) if !p.explicit && p.arity == 0 => p.arity = arity,
                Some(_) => {}
                None => self.predicates.push(PredicateDecl {
                    name,
                    arity,
                    verbalizations: Vec::new(),
                    explicit: false,
                }),
            }
        }
    }
}
