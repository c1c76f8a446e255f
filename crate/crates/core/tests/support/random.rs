#![allow(dead_code)]

//! Random problem generators and brute-force oracles shared by the test
//! suites.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use softlogic_core::ground::{GroundBody, GroundLiteral, GroundModel, GroundRule};
use softlogic_core::lang::{BodyItem, Comparator, Program, Rule, RuleBody, RuleKind, Term};
use softlogic_core::{AtomDatabase, AtomId, GroundAtom, Status};

/// A random ground model over `n` open atoms (plus one observed atom) whose
/// hard rules are satisfied exactly by a random grid point.
pub fn random_model(rng: &mut ChaCha8Rng) -> (GroundModel, AtomDatabase) {
    let n = rng.gen_range(1..=4);
    let mut db = AtomDatabase::new();
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=100) as f64 / 100.0).collect();
    for i in 0..n {
        let start = rng.gen_range(0..=100) as f64 / 100.0;
        db.commit_atom(GroundAtom::new("A", [format!("a{i}")]), start, Status::Open).unwrap();
    }
    let observed = rng.gen_range(0..=100) as f64 / 100.0;
    db.commit_atom(GroundAtom::new("O", ["o"]), observed, Status::Observed).unwrap();
    let value = |id: u32| {
        if (id as usize) < n {
            x0[id as usize]
        } else {
            observed
        }
    };
    let total = n as u32 + 1;

    let mut rules = Vec::new();
    for _ in 0..rng.gen_range(1..=6) {
        let hard = rng.gen_bool(0.35);
        let kind = if hard {
            RuleKind::Hard
        } else {
            RuleKind::Weighted { weight: rng.gen_range(1..=50) as f64 / 10.0, squared: rng.gen_bool(0.3) }
        };
        let size = rng.gen_range(1..=3);
        let atoms: Vec<u32> = (0..size).map(|_| rng.gen_range(0..total)).collect();
        let body = if rng.gen_bool(0.5) {
            let mut lits: Vec<GroundLiteral> = atoms
                .iter()
                .map(|&a| GroundLiteral { atom: AtomId(a), negated: rng.gen_bool(0.5) })
                .collect();
            if hard {
                let sat = |l: &[GroundLiteral]| {
                    l.iter()
                        .map(|l| if l.negated { 1.0 - value(l.atom.0) } else { value(l.atom.0) })
                        .sum::<f64>()
                        >= 1.0 - 1e-12
                };
                if !sat(&lits) {
                    // Flip literals until x0 satisfies the clause.
                    for k in 0..lits.len() {
                        let v = value(lits[k].atom.0);
                        lits[k].negated = v < 0.5;
                        if sat(&lits) {
                            break;
                        }
                    }
                    if !sat(&lits) {
                        continue;
                    }
                }
            }
            GroundBody::Clause(lits)
        } else {
            let mut terms: Vec<(f64, AtomId)> = Vec::new();
            for &a in &atoms {
                if !terms.iter().any(|t| t.1 == AtomId(a)) {
                    terms.push((if rng.gen_bool(0.5) { 1.0 } else { -1.0 }, AtomId(a)));
                }
            }
            let e: f64 = terms.iter().map(|&(c, a)| c * value(a.0)).sum();
            let comparator = match rng.gen_range(0..3) {
                0 => Comparator::Le,
                1 => Comparator::Ge,
                _ => Comparator::Eq,
            };
            let shift = if hard && comparator != Comparator::Eq {
                rng.gen_range(0..=30) as f64 / 100.0
            } else if hard {
                0.0
            } else {
                rng.gen_range(-50..=50) as f64 / 100.0
            };
            let constant = match comparator {
                Comparator::Le => e + shift,
                Comparator::Ge => e - shift,
                Comparator::Eq => e + shift,
            };
            GroundBody::Linear { terms, comparator, constant: (constant * 100.0).round() / 100.0 }
        };
        rules.push(GroundRule {
            rule: rules.len(),
            kind,
            substitution: Vec::new(),
            body,
            text: String::new(),
        });
    }
    (GroundModel::from_rules(rules), db)
}

const VARIABLES: [&str; 3] = ["X", "Y", "Z"];

/// A random program (at most 3 predicates of arity at most 2, at most 3
/// rules) with a database drawing at most 4 constants per position.
pub fn random_program(rng: &mut ChaCha8Rng) -> (String, AtomDatabase) {
    let n_preds = rng.gen_range(1..=3);
    let arities: Vec<usize> = (0..n_preds).map(|_| rng.gen_range(1..=2)).collect();
    let mut db = AtomDatabase::new();
    for (p, &arity) in arities.iter().enumerate() {
        db.register_predicate(&format!("P{p}"), arity, Vec::new()).unwrap();
        let domain = rng.gen_range(1..=4);
        let tuples: Vec<Vec<String>> = if arity == 1 {
            (0..domain).map(|c| vec![format!("c{c}")]).collect()
        } else {
            (0..domain)
                .flat_map(|a| (0..domain).map(move |b| vec![format!("c{a}"), format!("c{b}")]))
                .collect()
        };
        for t in tuples {
            if rng.gen_bool(0.6) {
                let belief = if rng.gen_bool(0.7) { 1.0 } else { 0.0 };
                db.commit_atom(GroundAtom::new(format!("P{p}"), t), belief, Status::Observed).unwrap();
            }
        }
    }

    let mut text = String::new();
    for _ in 0..rng.gen_range(1..=3) {
        let atom = |rng: &mut ChaCha8Rng, summation: Option<usize>| {
            let p = rng.gen_range(0..n_preds);
            let args: Vec<String> = (0..arities[p])
                .map(|i| {
                    if summation == Some(i) {
                        "+S".to_string()
                    } else if rng.gen_bool(0.2) {
                        format!("'c{}'", rng.gen_range(0..4))
                    } else {
                        VARIABLES[rng.gen_range(0..3)].to_string()
                    }
                })
                .collect();
            format!("P{p}({})", args.join(","))
        };
        if rng.gen_bool(0.7) {
            let n_atoms = rng.gen_range(1..=4);
            let n_body = rng.gen_range(0..n_atoms);
            let mut body: Vec<String> = (0..n_body)
                .map(|_| {
                    let neg = if rng.gen_bool(0.3) { "~" } else { "" };
                    format!("{neg}{}", atom(rng, None))
                })
                .collect();
            let head: Vec<String> = (n_body..n_atoms)
                .map(|_| {
                    let neg = if rng.gen_bool(0.3) { "~" } else { "" };
                    format!("{neg}{}", atom(rng, None))
                })
                .collect();
            if rng.gen_bool(0.4) {
                let all: String = body.iter().chain(&head).cloned().collect();
                let present: Vec<&str> = VARIABLES.iter().copied().filter(|v| all.contains(v)).collect();
                if !present.is_empty() {
                    let l = present[rng.gen_range(0..present.len())];
                    let r = if rng.gen_bool(0.5) {
                        present[rng.gen_range(0..present.len())].to_string()
                    } else {
                        format!("'c{}'", rng.gen_range(0..4))
                    };
                    let op = if rng.gen_bool(0.7) { "!=" } else { "==" };
                    body.push(format!("{l} {op} {r}"));
                }
            }
            if body.is_empty() {
                text.push_str(&format!("{} .\n", head.join(" | ")));
            } else {
                text.push_str(&format!("{} -> {} .\n", body.join(" & "), head.join(" | ")));
            }
        } else {
            // Arithmetic rule with one summation term.
            let p = rng.gen_range(0..n_preds);
            let pos = rng.gen_range(0..arities[p]);
            let args: Vec<String> = (0..arities[p])
                .map(|i| if i == pos { "+S".to_string() } else { VARIABLES[rng.gen_range(0..3)].to_string() })
                .collect();
            let sum = format!("P{p}({})", args.join(","));
            let other = if rng.gen_bool(0.5) { atom(rng, None) } else { "1".to_string() };
            let op = ["=", "<=", ">="][rng.gen_range(0..3)];
            text.push_str(&format!("{sum} {op} {other} .\n"));
        }
    }
    (text, db)
}

/// A ground rule as a comparable value: substituted clause literals or
/// expanded linear terms, rendered with atom text.
pub type GroundKey = (usize, Vec<(String, bool)>, Vec<(String, i64)>, Option<i64>);

pub fn key_of(rule: &GroundRule, db: &AtomDatabase) -> GroundKey {
    let name = |a: AtomId| db.record(a).atom.to_string();
    match &rule.body {
        GroundBody::Clause(lits) => {
            let mut l: Vec<(String, bool)> = lits.iter().map(|l| (name(l.atom), l.negated)).collect();
            l.sort();
            (rule.rule, l, Vec::new(), None)
        }
        GroundBody::Linear { terms, constant, .. } => {
            let mut t: Vec<(String, i64)> =
                terms.iter().map(|&(c, a)| (name(a), (c * 1e6).round() as i64)).collect();
            t.sort();
            (rule.rule, Vec::new(), t, Some((constant * 1e6).round() as i64))
        }
    }
}

fn constants_by_position(db: &AtomDatabase, predicate: &str, position: usize) -> BTreeSet<String> {
    db.records()
        .iter()
        .filter(|r| r.atom.predicate == predicate && r.atom.args.len() > position)
        .map(|r| r.atom.args[position].clone())
        .collect()
}

fn find(db: &AtomDatabase, predicate: &str, args: Vec<String>) -> Option<AtomId> {
    db.find(&GroundAtom::new(predicate, args))
}

/// Exhaustive enumeration of every substitution of the rule's plain variables
/// drawn from the constants seen at each variable's argument positions.
pub fn brute_force_ground(program: &Program, db: &AtomDatabase) -> Vec<GroundKey> {
    let mut out = Vec::new();
    for (index, rule) in program.rules.iter().enumerate() {
        let atoms = rule.atoms();
        let mut vars: Vec<String> = Vec::new();
        let mut domains: Vec<BTreeSet<String>> = Vec::new();
        for atom in &atoms {
            for (pos, t) in atom.args.iter().enumerate() {
                if let Term::Variable(v) = t {
                    let d = constants_by_position(db, &atom.predicate, pos);
                    match vars.iter().position(|x| x == v) {
                        Some(i) => domains[i].extend(d),
                        None => {
                            vars.push(v.clone());
                            domains.push(d);
                        }
                    }
                }
            }
        }
        let domains: Vec<Vec<String>> = domains.into_iter().map(|d| d.into_iter().collect()).collect();
        let mut choice = vec![0usize; vars.len()];
        if domains.iter().any(|d| d.is_empty()) {
            continue;
        }
        loop {
            let value = |t: &Term| match t {
                Term::Constant(c) => Some(c.clone()),
                Term::Variable(v) => {
                    let i = vars.iter().position(|x| x == v).unwrap();
                    Some(domains[i][choice[i]].clone())
                }
                Term::Summation(_) => None,
            };
            if let Some(k) = ground_one(rule, index, db, &value) {
                out.push(k);
            }
            // Odometer increment.
            let mut i = 0;
            loop {
                if i == choice.len() {
                    break;
                }
                choice[i] += 1;
                if choice[i] < domains[i].len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
            if i == choice.len() {
                break;
            }
        }
    }
    out.sort();
    out
}

fn ground_one(
    rule: &Rule,
    index: usize,
    db: &AtomDatabase,
    value: &dyn Fn(&Term) -> Option<String>,
) -> Option<GroundKey> {
    match &rule.body {
        RuleBody::Logical(l) => {
            for item in &l.body {
                if let BodyItem::Builtin(b) = item {
                    if !b.holds(&value(&b.lhs)?, &value(&b.rhs)?) {
                        return None;
                    }
                }
            }
            let mut lits = Vec::new();
            for lit in l.clause() {
                let args: Vec<String> = lit.atom.args.iter().map(value).collect::<Option<_>>()?;
                let id = find(db, &lit.atom.predicate, args)?;
                lits.push(GroundLiteral { atom: id, negated: lit.negated });
            }
            let rule = GroundRule {
                rule: index,
                kind: rule.kind,
                substitution: Vec::new(),
                body: GroundBody::Clause(lits),
                text: String::new(),
            };
            Some(key_of(&rule, db))
        }
        RuleBody::Arithmetic(a) => {
            let mut terms: Vec<(f64, AtomId)> = Vec::new();
            let mut add = |c: f64, id: AtomId| match terms.iter_mut().find(|t| t.1 == id) {
                Some(t) => t.0 += c,
                None => terms.push((c, id)),
            };
            for (sign, expr) in [(1.0, &a.lhs), (-1.0, &a.rhs)] {
                for t in &expr.terms {
                    if t.atom.has_summation() {
                        let mut any = false;
                        for r in db.records() {
                            if r.atom.predicate != t.atom.predicate || r.atom.args.len() != t.atom.arity() {
                                continue;
                            }
                            let fits = t.atom.args.iter().zip(&r.atom.args).all(|(p, c)| match value(p) {
                                Some(v) => &v == c,
                                None => true,
                            });
                            if fits {
                                any = true;
                                add(sign * t.coefficient, db.find(&r.atom).unwrap());
                            }
                        }
                        // A plain variable in a summation atom must be
                        // supported by some atom.
                        if !any && t.atom.args.iter().any(|x| matches!(x, Term::Variable(_))) {
                            return None;
                        }
                    } else {
                        let args: Vec<String> = t.atom.args.iter().map(value).collect::<Option<_>>()?;
                        add(sign * t.coefficient, find(db, &t.atom.predicate, args)?);
                    }
                }
            }
            terms.retain(|t| t.0 != 0.0);
            let rule = GroundRule {
                rule: index,
                kind: rule.kind,
                substitution: Vec::new(),
                body: GroundBody::Linear {
                    terms,
                    comparator: a.comparator,
                    constant: a.rhs.constant - a.lhs.constant,
                },
                text: String::new(),
            };
            Some(key_of(&rule, db))
        }
    }
}

/// Ground rules of `model`, as comparable keys.
pub fn model_keys(model: &GroundModel, db: &AtomDatabase) -> Vec<GroundKey> {
    let mut k: Vec<GroundKey> = model.rules.iter().map(|r| key_of(r, db)).collect();
    k.sort();
    k
}
