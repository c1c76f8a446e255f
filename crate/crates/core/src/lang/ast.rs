use alloc::string::String;
use alloc::vec::Vec;

use crate::diag::Span;

/// An argument of an atom template.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Constant(String),
    Variable(String),
    /// A `+V` argument, expanded to a sum over all matching atoms.
    Summation(String),
}

impl Term {
    pub fn variable_name(&self) -> Option<&str> {
        match self {
            Term::Variable(v) | Term::Summation(v) => Some(v),
            Term::Constant(_) => None,
        }
    }
}

/// True if `text` is a well-formed variable name: `[A-Z][A-Za-z0-9_]*`.
pub fn is_variable_name(text: &str) -> bool {
    let mut chars = text.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomTemplate {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl AtomTemplate {
    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::variable_name)
    }

    pub fn has_summation(&self) -> bool {
        self.args.iter().any(|t| matches!(t, Term::Summation(_)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Literal {
    pub atom: AtomTemplate,
    pub negated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinOp {
    Ne,
    Eq,
}

/// A comparison between two terms, evaluated during grounding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Builtin {
    pub lhs: Term,
    pub op: BuiltinOp,
    pub rhs: Term,
}

impl Builtin {
    /// Evaluates the comparison on two constants.
    pub fn holds(&self, lhs: &str, rhs: &str) -> bool {
        match self.op {
            BuiltinOp::Ne => lhs != rhs,
            BuiltinOp::Eq => lhs == rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BodyItem {
    Literal(Literal),
    Builtin(Builtin),
}

/// `body -> head`, where the body is a conjunction and the head a disjunction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LogicalRule {
    pub body: Vec<BodyItem>,
    pub head: Vec<Literal>,
}

impl LogicalRule {
    pub fn body_literals(&self) -> impl Iterator<Item = &Literal> {
        self.body.iter().filter_map(|item| match item {
            BodyItem::Literal(l) => Some(l),
            BodyItem::Builtin(_) => None,
        })
    }

    pub fn builtins(&self) -> impl Iterator<Item = &Builtin> {
        self.body.iter().filter_map(|item| match item {
            BodyItem::Builtin(b) => Some(b),
            BodyItem::Literal(_) => None,
        })
    }

    /// Literals of the equivalent disjunctive clause: body literals flipped,
    /// head literals kept.
    pub fn clause(&self) -> Vec<Literal> {
        let mut out: Vec<Literal> =
            self.body_literals().map(|l| Literal { atom: l.atom.clone(), negated: !l.negated }).collect();
        out.extend(self.head.iter().cloned());
        out
    }

    /// All atom templates, body first, in source order.
    pub fn atoms(&self) -> impl Iterator<Item = &AtomTemplate> {
        self.body_literals().chain(self.head.iter()).map(|l| &l.atom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearTerm {
    pub coefficient: f64,
    pub atom: AtomTemplate,
}

/// `Σ coefficient·atom + constant`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearExpr {
    pub terms: Vec<LinearTerm>,
    pub constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Eq,
    Le,
    Ge,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Le => "<=",
            Comparator::Ge => ">=",
        }
    }
}

/// Condition restricting which atoms a summation variable ranges over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filter {
    pub variable: String,
    pub conditions: Vec<Literal>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArithmeticRule {
    pub lhs: LinearExpr,
    pub comparator: Comparator,
    pub rhs: LinearExpr,
    pub filters: Vec<Filter>,
}

impl ArithmeticRule {
    pub fn atoms(&self) -> impl Iterator<Item = &AtomTemplate> {
        self.lhs.terms.iter().chain(self.rhs.terms.iter()).map(|t| &t.atom)
    }

    pub fn summation_variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for atom in self.atoms() {
            for arg in &atom.args {
                if let Term::Summation(v) = arg {
                    if !out.contains(&v.as_str()) {
                        out.push(v.as_str());
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleBody {
    Logical(LogicalRule),
    Arithmetic(ArithmeticRule),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleKind {
    Hard,
    Weighted { weight: f64, squared: bool },
}

impl RuleKind {
    pub fn is_hard(&self) -> bool {
        matches!(self, RuleKind::Hard)
    }
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub name: Option<String>,
    pub kind: RuleKind,
    pub body: RuleBody,
    pub span: Span,
    /// Sentence template with `{Var}` placeholders.
    pub verbalization: Option<String>,
}

/// Structural equality: source spans and attached verbalizations are ignored.
impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.kind == other.kind && self.body == other.body
    }
}

impl Rule {
    pub fn is_logical(&self) -> bool {
        matches!(self.body, RuleBody::Logical(_))
    }

    /// Every atom template of the rule proper (filters excluded).
    pub fn atoms(&self) -> Vec<&AtomTemplate> {
        match &self.body {
            RuleBody::Logical(l) => l.atoms().collect(),
            RuleBody::Arithmetic(a) => a.atoms().collect(),
        }
    }

    /// Variables in order of first appearance, filters included.
    pub fn variables(&self) -> Vec<&str> {
        fn push<'a>(v: &'a str, out: &mut Vec<&'a str>) {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        let mut out: Vec<&str> = Vec::new();
        match &self.body {
            RuleBody::Logical(l) => {
                for item in &l.body {
                    match item {
                        BodyItem::Literal(lit) => lit.atom.variables().for_each(|v| push(v, &mut out)),
                        BodyItem::Builtin(b) => {
                            for t in [&b.lhs, &b.rhs] {
                                if let Some(v) = t.variable_name() {
                                    push(v, &mut out);
                                }
                            }
                        }
                    }
                }
                for lit in &l.head {
                    lit.atom.variables().for_each(|v| push(v, &mut out));
                }
            }
            RuleBody::Arithmetic(a) => {
                for atom in a.atoms() {
                    atom.variables().for_each(|v| push(v, &mut out));
                }
                for filter in &a.filters {
                    for lit in &filter.conditions {
                        lit.atom.variables().for_each(|v| push(v, &mut out));
                    }
                }
            }
        }
        out
    }
}

/// A predicate-level verbalization, optionally restricted to atoms whose
/// arguments match `pattern` (`None` entries are wildcards).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verbalization {
    pub pattern: Option<Vec<Option<String>>>,
    pub template: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    pub arity: usize,
    pub verbalizations: Vec<Verbalization>,
    /// False when the declaration was inferred from first use.
    pub explicit: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub predicates: Vec<PredicateDecl>,
    pub rules: Vec<Rule>,
}

impl Program {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn rule_named(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name.as_deref() == Some(name))
    }
}
