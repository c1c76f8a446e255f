//! Instantiates rule templates against the atom database.
//!
//! Matching is closed-universe: a template only grounds to atoms that have
//! been committed, whether it occurs positively or negated.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::diag::{Diagnostic, DiagnosticCode};
use crate::lang::{
    format_rule, ArithmeticRule, AtomTemplate, BodyItem, Builtin, Comparator, LinearExpr, LinearTerm,
    Literal, LogicalRule, Program, Rule, RuleBody, RuleKind, Term,
};
use crate::store::{AtomDatabase, AtomId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundConfig {
    /// A filter atom is satisfied when its belief is strictly above this.
    pub filter_threshold: f64,
}

impl Default for GroundConfig {
    fn default() -> Self {
        GroundConfig { filter_threshold: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundLiteral {
    pub atom: AtomId,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroundBody {
    /// Disjunction of literals: body literals negated, head literals kept.
    Clause(Vec<GroundLiteral>),
    /// `Σ coefficient·atom ⋈ constant`, one term per distinct atom.
    Linear { terms: Vec<(f64, AtomId)>, comparator: Comparator, constant: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundRule {
    /// Index of the originating rule in the program.
    pub rule: usize,
    pub kind: RuleKind,
    /// Variable bindings in order of first appearance in the rule.
    pub substitution: Vec<(String, String)>,
    pub body: GroundBody,
    /// Canonical rule syntax with constants substituted.
    pub text: String,
}

impl GroundRule {
    pub fn is_hard(&self) -> bool {
        self.kind.is_hard()
    }

    pub fn is_logical(&self) -> bool {
        matches!(self.body, GroundBody::Clause(_))
    }

    /// Distinct atoms of the rule in order of occurrence.
    pub fn atoms(&self) -> Vec<AtomId> {
        let mut out: Vec<AtomId> = Vec::new();
        let mut push = |a: AtomId| {
            if !out.contains(&a) {
                out.push(a);
            }
        };
        match &self.body {
            GroundBody::Clause(lits) => lits.iter().for_each(|l| push(l.atom)),
            GroundBody::Linear { terms, .. } => terms.iter().for_each(|t| push(t.1)),
        }
        out
    }

    pub fn binding(&self, variable: &str) -> Option<&str> {
        self.substitution.iter().find(|(v, _)| v == variable).map(|(_, c)| c.as_str())
    }
}

/// All ground rule instances of a program. A ground rule's id is its index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundModel {
    pub rules: Vec<GroundRule>,
    /// For every atom, the ids of the ground rules it occurs in.
    pub atom_rules: BTreeMap<AtomId, Vec<usize>>,
}

impl GroundModel {
    pub fn from_rules(rules: Vec<GroundRule>) -> Self {
        let mut atom_rules: BTreeMap<AtomId, Vec<usize>> = BTreeMap::new();
        for (i, r) in rules.iter().enumerate() {
            for a in r.atoms() {
                atom_rules.entry(a).or_default().push(i);
            }
        }
        GroundModel { rules, atom_rules }
    }

    pub fn logical(&self) -> impl Iterator<Item = &GroundRule> {
        self.rules.iter().filter(|r| r.is_logical())
    }

    pub fn arithmetic(&self) -> impl Iterator<Item = &GroundRule> {
        self.rules.iter().filter(|r| !r.is_logical())
    }

    pub fn rules_of(&self, atom: AtomId) -> &[usize] {
        self.atom_rules.get(&atom).map_or(&[], Vec::as_slice)
    }

    /// One ground rule per line in canonical syntax.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            out.push_str(&r.text);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundingReport {
    /// Number of groundings per program rule.
    pub counts: Vec<usize>,
    pub warnings: Vec<Diagnostic>,
}

/// Grounds every rule of `program` in order.
pub fn ground_program(
    program: &Program,
    db: &AtomDatabase,
    config: &GroundConfig,
) -> (GroundModel, GroundingReport) {
    let mut rules = Vec::new();
    let mut report = GroundingReport::default();
    for (index, rule) in program.rules.iter().enumerate() {
        let grounded = match &rule.body {
            RuleBody::Logical(_) => ground_logical_rule(rule, index, db),
            RuleBody::Arithmetic(_) => {
                let (g, w) = ground_arithmetic_rule(rule, index, db, config);
                report.warnings.extend(w);
                g
            }
        };
        report.counts.push(grounded.len());
        rules.extend(grounded);
    }
    (GroundModel::from_rules(rules), report)
}

type Binding<'a> = Vec<(&'a str, &'a str)>;

fn lookup<'a>(b: &Binding<'a>, v: &str) -> Option<&'a str> {
    b.iter().rev().find(|(name, _)| *name == v).map(|(_, c)| *c)
}

fn resolve<'a>(t: &'a Term, b: &Binding<'a>) -> Option<&'a str> {
    match t {
        Term::Constant(c) => Some(c),
        Term::Variable(v) | Term::Summation(v) => lookup(b, v),
    }
}

/// Unifies `template` with `args`, extending `b`. Summation positions are
/// skipped unless `bind_summation` is set. On failure `b` is unchanged.
fn match_atom<'a>(
    template: &'a AtomTemplate,
    args: &'a [String],
    b: &mut Binding<'a>,
    bind_summation: bool,
) -> bool {
    if template.args.len() != args.len() {
        return false;
    }
    let mark = b.len();
    for (t, a) in template.args.iter().zip(args) {
        let ok = match t {
            Term::Constant(c) => c == a,
            Term::Summation(_) if !bind_summation => true,
            Term::Variable(v) | Term::Summation(v) => match lookup(b, v) {
                Some(x) => x == a,
                None => {
                    b.push((v, a));
                    true
                }
            },
        };
        if !ok {
            b.truncate(mark);
            return false;
        }
    }
    true
}

/// Atoms that may match `template` under `b`, using the per-position index.
fn candidates<'a>(
    db: &'a AtomDatabase,
    template: &AtomTemplate,
    b: &Binding<'_>,
    bind_summation: bool,
) -> &'a [AtomId] {
    let Some(pred) = db.predicate_id(&template.predicate) else {
        return &[];
    };
    if db.predicate(pred).arity != template.arity() {
        return &[];
    }
    let bound: Vec<(usize, &str)> = template
        .args
        .iter()
        .enumerate()
        .filter_map(|(i, t)| match t {
            Term::Constant(c) => Some((i, c.as_str())),
            Term::Summation(_) if !bind_summation => None,
            Term::Variable(v) | Term::Summation(v) => lookup(b, v).map(|c| (i, c)),
        })
        .collect();
    db.most_selective(pred, &bound).unwrap_or_else(|| db.atoms_of(pred))
}

fn builtins_consistent(builtins: &[&Builtin], b: &Binding<'_>) -> bool {
    builtins.iter().all(|bi| {
        let (Some(l), Some(r)) = (resolve(&bi.lhs, b), resolve(&bi.rhs, b)) else {
            return true;
        };
        bi.holds(l, r)
    })
}

fn builtins_decided(builtins: &[&Builtin], b: &Binding<'_>) -> bool {
    builtins.iter().all(|bi| resolve(&bi.lhs, b).is_some() && resolve(&bi.rhs, b).is_some())
}

struct Join<'a, 'f> {
    db: &'a AtomDatabase,
    templates: Vec<&'a AtomTemplate>,
    builtins: Vec<&'a Builtin>,
    matched: Vec<Option<AtomId>>,
    emit: &'f mut dyn FnMut(&Binding<'a>, &[Option<AtomId>]),
}

impl<'a> Join<'a, '_> {
    fn run(&mut self, b: &mut Binding<'a>) {
        if !builtins_consistent(&self.builtins, b) {
            return;
        }
        // Most bound positions first, then the shortest candidate list, then
        // leftmost.
        let mut best: Option<(usize, usize, usize)> = None;
        for (i, t) in self.templates.iter().enumerate() {
            if self.matched[i].is_some() {
                continue;
            }
            let bound = t
                .args
                .iter()
                .filter(|a| match a {
                    Term::Constant(_) => true,
                    Term::Summation(_) => false,
                    Term::Variable(v) => lookup(b, v).is_some(),
                })
                .count();
            let n = candidates(self.db, t, b, false).len();
            let better = match best {
                None => true,
                Some((_, bb, bn)) => bound > bb || (bound == bb && n < bn),
            };
            if better {
                best = Some((i, bound, n));
            }
        }
        let Some((i, _, _)) = best else {
            if builtins_decided(&self.builtins, b) {
                (self.emit)(b, &self.matched);
            }
            return;
        };
        let template = self.templates[i];
        for &id in candidates(self.db, template, b, false) {
            let mark = b.len();
            if match_atom(template, &self.db.record(id).atom.args, b, false) {
                self.matched[i] = Some(id);
                self.run(b);
                self.matched[i] = None;
                b.truncate(mark);
            }
        }
    }
}

fn join<'a>(
    db: &'a AtomDatabase,
    templates: Vec<&'a AtomTemplate>,
    builtins: Vec<&'a Builtin>,
    emit: &mut dyn FnMut(&Binding<'a>, &[Option<AtomId>]),
) {
    let n = templates.len();
    let mut j = Join { db, templates, builtins, matched: alloc::vec![None; n], emit };
    j.run(&mut Vec::new());
}

fn ground_template(t: &AtomTemplate, b: &Binding<'_>) -> AtomTemplate {
    AtomTemplate {
        predicate: t.predicate.clone(),
        args: t
            .args
            .iter()
            .map(|a| match resolve(a, b) {
                Some(c) => Term::Constant(String::from(c)),
                None => a.clone(),
            })
            .collect(),
    }
}

fn ground_term(t: &Term, b: &Binding<'_>) -> Term {
    match resolve(t, b) {
        Some(c) => Term::Constant(String::from(c)),
        None => t.clone(),
    }
}

fn plain_variables(templates: &[&AtomTemplate]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for t in templates {
        for a in &t.args {
            if let Term::Variable(v) = a {
                if !out.iter().any(|o| o == v) {
                    out.push(v.clone());
                }
            }
        }
    }
    out
}

fn substitution(vars: &[String], b: &Binding<'_>) -> Vec<(String, String)> {
    vars.iter().filter_map(|v| lookup(b, v).map(|c| (v.clone(), String::from(c)))).collect()
}

fn sort_and_dedup(out: &mut Vec<GroundRule>) {
    out.sort_by(|a, b| {
        let ka = a.substitution.iter().map(|(_, c)| c);
        let kb = b.substitution.iter().map(|(_, c)| c);
        ka.cmp(kb).then_with(|| a.text.cmp(&b.text))
    });
    out.dedup_by(|a, b| a.substitution == b.substitution && a.text == b.text);
}

fn ground_rule_text(rule: &Rule, body: RuleBody) -> String {
    format_rule(&Rule { name: None, kind: rule.kind, body, span: Default::default(), verbalization: None })
}

/// Grounds a logical rule: one instance per substitution under which every
/// atom template matches a committed atom and every comparison holds.
/// Results are ordered by the substituted constants.
pub fn ground_logical_rule(rule: &Rule, index: usize, db: &AtomDatabase) -> Vec<GroundRule> {
    let RuleBody::Logical(logical) = &rule.body else {
        return Vec::new();
    };
    let clause = logical.clause();
    let templates: Vec<&AtomTemplate> = logical.atoms().collect();
    let builtins: Vec<&Builtin> = logical.builtins().collect();
    let vars = plain_variables(&templates);
    let n_body = logical.body_literals().count();
    let mut out = Vec::new();
    join(db, templates, builtins, &mut |b, matched| {
        let lits: Vec<GroundLiteral> = clause
            .iter()
            .zip(matched)
            .map(|(lit, id)| GroundLiteral { atom: id.expect("all templates matched"), negated: lit.negated })
            .collect();
        debug_assert_eq!(lits.len(), n_body + logical.head.len());
        let body = RuleBody::Logical(LogicalRule {
            body: logical
                .body
                .iter()
                .map(|item| match item {
                    BodyItem::Literal(l) => {
                        BodyItem::Literal(Literal { atom: ground_template(&l.atom, b), negated: l.negated })
                    }
                    BodyItem::Builtin(bi) => BodyItem::Builtin(Builtin {
                        lhs: ground_term(&bi.lhs, b),
                        op: bi.op,
                        rhs: ground_term(&bi.rhs, b),
                    }),
                })
                .collect(),
            head: logical
                .head
                .iter()
                .map(|l| Literal { atom: ground_template(&l.atom, b), negated: l.negated })
                .collect(),
        });
        out.push(GroundRule {
            rule: index,
            kind: rule.kind,
            substitution: substitution(&vars, b),
            body: GroundBody::Clause(lits),
            text: ground_rule_text(rule, body),
        });
    });
    sort_and_dedup(&mut out);
    out
}

fn only_summation(t: &AtomTemplate) -> bool {
    t.has_summation() && !t.args.iter().any(|a| matches!(a, Term::Variable(_)))
}

/// True if the filter conditions hold under `b`. Variables left unbound are
/// existential: positive conditions bind them, negated conditions must have
/// no satisfying atom at all.
fn filter_holds<'a>(
    db: &'a AtomDatabase,
    positive: &[&'a Literal],
    negative: &[&'a Literal],
    b: &mut Binding<'a>,
    threshold: f64,
) -> bool {
    if let Some((first, rest)) = positive.split_first() {
        for &id in candidates(db, &first.atom, b, true) {
            let rec = db.record(id);
            if rec.belief <= threshold {
                continue;
            }
            let mark = b.len();
            if match_atom(&first.atom, &rec.atom.args, b, true) {
                let ok = filter_holds(db, rest, negative, b, threshold);
                b.truncate(mark);
                if ok {
                    return true;
                }
            }
        }
        return false;
    }
    negative.iter().all(|lit| {
        !candidates(db, &lit.atom, b, true).iter().any(|&id| {
            let rec = db.record(id);
            let mark = b.len();
            let hit = rec.belief > threshold && match_atom(&lit.atom, &rec.atom.args, b, true);
            b.truncate(mark);
            hit
        })
    })
}

struct Expansion {
    terms: Vec<(f64, AtomId, AtomTemplate)>,
    had_summation: bool,
    empty_sums: usize,
}

fn expand_side<'a>(
    db: &'a AtomDatabase,
    rule: &'a ArithmeticRule,
    expr: &'a LinearExpr,
    matched: &mut core::slice::Iter<'_, Option<AtomId>>,
    b: &Binding<'a>,
    threshold: f64,
) -> Expansion {
    let mut e = Expansion { terms: Vec::new(), had_summation: false, empty_sums: 0 };
    for LinearTerm { coefficient, atom } in &expr.terms {
        let joined = if only_summation(atom) { None } else { *matched.next().expect("joined template") };
        if !atom.has_summation() {
            let id = joined.expect("all templates matched");
            e.terms.push((*coefficient, id, ground_template(atom, b)));
            continue;
        }
        e.had_summation = true;
        let sum_vars: Vec<&str> = atom
            .args
            .iter()
            .filter_map(|a| match a {
                Term::Summation(v) => Some(v.as_str()),
                _ => None,
            })
            .collect();
        let mut found: Vec<AtomId> = Vec::new();
        for &id in candidates(db, atom, b, false) {
            let rec = db.record(id);
            let mut ext = b.clone();
            if !match_atom(atom, &rec.atom.args, &mut ext, true) {
                continue;
            }
            let ok = rule.filters.iter().filter(|f| sum_vars.contains(&f.variable.as_str())).all(|f| {
                let pos: Vec<&Literal> = f.conditions.iter().filter(|l| !l.negated).collect();
                let neg: Vec<&Literal> = f.conditions.iter().filter(|l| l.negated).collect();
                filter_holds(db, &pos, &neg, &mut ext, threshold)
            });
            if ok {
                found.push(id);
            }
        }
        found.sort_by(|x, y| db.record(*x).atom.args.cmp(&db.record(*y).atom.args));
        if found.is_empty() {
            e.empty_sums += 1;
        }
        for id in found {
            let t = AtomTemplate {
                predicate: atom.predicate.clone(),
                args: db.record(id).atom.args.iter().cloned().map(Term::Constant).collect(),
            };
            e.terms.push((*coefficient, id, t));
        }
    }
    e
}

fn as_expr(e: &Expansion, constant: f64) -> LinearExpr {
    LinearExpr {
        terms: e.terms.iter().map(|(c, _, t)| LinearTerm { coefficient: *c, atom: t.clone() }).collect(),
        constant,
    }
}

/// Grounds an arithmetic rule. Plain variables are bound by joining the
/// templates that contain them (summation positions act as wildcards); each
/// summation term then expands to every matching atom whose filters hold.
/// An expansion with no atoms contributes an empty sum and a warning.
pub fn ground_arithmetic_rule(
    rule: &Rule,
    index: usize,
    db: &AtomDatabase,
    config: &GroundConfig,
) -> (Vec<GroundRule>, Vec<Diagnostic>) {
    let RuleBody::Arithmetic(arith) = &rule.body else {
        return (Vec::new(), Vec::new());
    };
    let join_templates: Vec<&AtomTemplate> = arith.atoms().filter(|t| !only_summation(t)).collect();
    let vars = plain_variables(&join_templates);
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    join(db, join_templates, Vec::new(), &mut |b, matched| {
        let mut matched = matched.iter();
        let lhs = expand_side(db, arith, &arith.lhs, &mut matched, b, config.filter_threshold);
        let rhs = expand_side(db, arith, &arith.rhs, &mut matched, b, config.filter_threshold);

        let mut merged: Vec<(f64, AtomId)> = Vec::new();
        for (sign, side) in [(1.0, &lhs), (-1.0, &rhs)] {
            for &(c, id, _) in &side.terms {
                match merged.iter_mut().find(|(_, a)| *a == id) {
                    Some(t) => t.0 += sign * c,
                    None => merged.push((sign * c, id)),
                }
            }
        }
        merged.retain(|(c, _)| *c != 0.0);

        let mut l = as_expr(&lhs, arith.lhs.constant);
        let mut r = as_expr(&rhs, arith.rhs.constant);
        let comparator = arith.comparator;
        // Equalities list the expanded sum first.
        if comparator == Comparator::Eq && rhs.had_summation && !lhs.had_summation {
            core::mem::swap(&mut l, &mut r);
        }
        let text = ground_rule_text(
            rule,
            RuleBody::Arithmetic(ArithmeticRule { lhs: l, comparator, rhs: r, filters: Vec::new() }),
        );
        if lhs.empty_sums + rhs.empty_sums > 0 {
            warnings.push(
                Diagnostic::warning(
                    DiagnosticCode::EmptySummation,
                    format!("summation expands to no atoms in `{text}`"),
                )
                .at(rule.span),
            );
        }
        out.push(GroundRule {
            rule: index,
            kind: rule.kind,
            substitution: substitution(&vars, b),
            body: GroundBody::Linear {
                terms: merged,
                comparator,
                constant: arith.rhs.constant - arith.lhs.constant,
            },
            text,
        });
    });
    sort_and_dedup(&mut out);
    (out, warnings)
}
