//! Acceptance suite. Every criterion runs in isolation and prints one
//! `PASS` or `FAIL` line; the target exits non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softlogic::demo::{ablate, add_prior, run_demo};
use softlogic::engine::{ground, infer};
use softlogic::fixture::{builtin, BUILTIN};
use softlogic::session::{Outcome, Session};
use softlogic_core::explain::{explain_atom, QualifierConfig};
use softlogic_core::ground::{ground_program, GroundBody, GroundConfig, GroundRule};
use softlogic_core::lang::{
    format_rule, parse_program, parse_rule, validate_program, ArithmeticRule, AtomTemplate, BodyItem,
    Builtin, BuiltinOp, Comparator, Filter, LinearExpr, LinearTerm, Literal, LogicalRule, RuleBody, RuleKind,
    Term,
};
use softlogic_core::rag::Direction;
use softlogic_core::solve::{compile, grid_search_oracle, objective_value, solve_map, SolverConfig};
use softlogic_core::{has_errors, AtomId, GroundAtom};

#[path = "../../core/tests/support/random.rs"]
mod random;

mod common;

type Check = fn() -> Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure!(took < limit, "took {took:?}, limit {limit:?}");
    Ok(())
}

fn v(name: &str) -> Term {
    Term::Variable(name.into())
}

fn c(name: &str) -> Term {
    Term::Constant(name.into())
}

fn s(name: &str) -> Term {
    Term::Summation(name.into())
}

fn atom(predicate: &str, args: Vec<Term>) -> AtomTemplate {
    AtomTemplate { predicate: predicate.into(), args }
}

fn lit(predicate: &str, args: Vec<Term>, negated: bool) -> Literal {
    Literal { atom: atom(predicate, args), negated }
}

fn sum(atoms: Vec<AtomTemplate>, constant: f64) -> LinearExpr {
    LinearExpr {
        terms: atoms.into_iter().map(|atom| LinearTerm { coefficient: 1.0, atom }).collect(),
        constant,
    }
}

fn logical(body: Vec<BodyItem>, head: Vec<Literal>) -> RuleBody {
    RuleBody::Logical(LogicalRule { body, head })
}

fn arithmetic(lhs: LinearExpr, rhs: LinearExpr, filters: Vec<Filter>) -> RuleBody {
    RuleBody::Arithmetic(ArithmeticRule { lhs, comparator: Comparator::Eq, rhs, filters })
}

fn parser_fidelity() -> Result<(), String> {
    let start = Instant::now();
    // Logical constraints need their closing ` .`, added where a quote omits it.
    let cases: Vec<(&str, RuleBody)> = vec![
        (
            "Pcat(T,C1) & C1 != C2 -> ~Pcat(T,C2) .",
            logical(
                vec![
                    BodyItem::Literal(lit("Pcat", vec![v("T"), v("C1")], false)),
                    BodyItem::Builtin(Builtin { lhs: v("C1"), op: BuiltinOp::Ne, rhs: v("C2") }),
                ],
                vec![lit("Pcat", vec![v("T"), v("C2")], true)],
            ),
        ),
        (
            "Pcat(T,+C) = 1 .",
            arithmetic(sum(vec![atom("Pcat", vec![v("T"), s("C")])], 0.0), sum(vec![], 1.0), vec![]),
        ),
        (
            "Pcat(T,C) = Pana(+PA,+TA) . {PA: Xcat(PA,T,C)}",
            arithmetic(
                sum(vec![atom("Pcat", vec![v("T"), v("C")])], 0.0),
                sum(vec![atom("Pana", vec![s("PA"), s("TA")])], 0.0),
                vec![Filter {
                    variable: "PA".into(),
                    conditions: vec![lit("Xcat", vec![v("PA"), v("T"), v("C")], false)],
                }],
            ),
        ),
        (
            "Dlnk(H,D) & Pcat(H,'PNOUN') -> !Pcat(D,'DET') .",
            logical(
                vec![
                    BodyItem::Literal(lit("Dlnk", vec![v("H"), v("D")], false)),
                    BodyItem::Literal(lit("Pcat", vec![v("H"), c("PNOUN")], false)),
                ],
                vec![lit("Pcat", vec![v("D"), c("DET")], true)],
            ),
        ),
        (
            "Pana(+P) = Pcat(T,C) {P: Xcat(P,T,C)}",
            arithmetic(
                sum(vec![atom("Pana", vec![s("P")])], 0.0),
                sum(vec![atom("Pcat", vec![v("T"), v("C")])], 0.0),
                vec![Filter {
                    variable: "P".into(),
                    conditions: vec![lit("Xcat", vec![v("P"), v("T"), v("C")], false)],
                }],
            ),
        ),
        (
            "Cent(X) -> Sent(X) .",
            logical(
                vec![BodyItem::Literal(lit("Cent", vec![v("X")], false))],
                vec![lit("Sent", vec![v("X")], false)],
            ),
        ),
        (
            "Crel(X,R,Y) -> Srel(X,R,Y) .",
            logical(
                vec![BodyItem::Literal(lit("Crel", vec![v("X"), v("R"), v("Y")], false))],
                vec![lit("Srel", vec![v("X"), v("R"), v("Y")], false)],
            ),
        ),
    ];
    for (text, expected) in &cases {
        let rule = parse_rule(text).map_err(|d| format!("{text}: {d:?}"))?;
        ensure!(rule.kind == RuleKind::Hard, "{text}: not a hard rule");
        ensure!(&rule.body == expected, "{text}: parsed as {:?}", rule.body);
        let program = parse_program(text).map_err(|d| format!("{text}: {d:?}"))?;
        let diags = validate_program(&program);
        ensure!(!has_errors(&diags), "{text}: {diags:?}");
        let canonical = format_rule(&rule);
        let again = parse_rule(&canonical).map_err(|d| format!("{canonical}: {d:?}"))?;
        ensure!(again == rule, "{text} does not round-trip through {canonical}");
    }
    within(start, Duration::from_secs(1))
}

fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn grounding_reproduction() -> Result<(), String> {
    let start = Instant::now();
    let weiss = builtin("weiss").map_err(|e| e.to_string())?;
    let (model, _) = ground(&weiss.program, &weiss.db);
    let expected = [
        "Pcat('weiß','ADJ') & 'ADJ' != 'VERB' -> ~Pcat('weiß','VERB') .",
        "Pcat('weiß','VERB') & 'VERB' != 'ADJ' -> ~Pcat('weiß','ADJ') .",
        "Pcat('weiß','ADJ') + Pcat('weiß','VERB') = 1 .",
    ];
    let dump: Vec<String> = model.dump().lines().map(normalize).collect();
    let expected: Vec<String> = expected.iter().map(|l| normalize(l)).collect();
    ensure!(dump == expected, "weiss dump:\n{}", dump.join("\n"));
    ensure!(model.logical().count() == 2 && model.arithmetic().count() == 1, "weiss counts");

    let das = builtin("das").map_err(|e| e.to_string())?;
    let (model, _) = ground(&das.program, &das.db);
    let want = normalize("Pana('P1','T1') + Pana('P3','T1') = Pcat('das_1','PRON') .");
    ensure!(model.dump().lines().any(|l| normalize(l) == want), "das dump lacks {want}:\n{}", model.dump());
    within(start, Duration::from_secs(1))
}

fn grounding_oracle() -> Result<(), String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut agree = 0;
    for case in 0..100 {
        let (text, db) = random::random_program(&mut rng);
        let program = parse_program(&text).map_err(|d| format!("case {case}: {d:?}"))?;
        let (model, _) = ground_program(&program, &db, &GroundConfig::default());
        if random::model_keys(&model, &db) == random::brute_force_ground(&program, &db) {
            agree += 1;
        } else {
            eprintln!("grounding oracle disagrees on case {case}:\n{text}");
        }
    }
    ensure!(agree == 100, "{agree}/100 cases agree");
    within(start, Duration::from_secs(10))
}

fn solver_oracle() -> Result<(), String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut good = 0;
    for case in 0..50 {
        let (model, db) = random::random_model(&mut rng);
        let problem = compile(&model, &db);
        let oracle = grid_search_oracle(&problem, 0.01, 1e-9).map_err(|e| format!("case {case}: {e:?}"))?;
        let (_, best) = oracle.best.ok_or(format!("case {case}: oracle found no feasible point"))?;
        let sol = solve_map(&problem, &model, &db, &SolverConfig::default())
            .map_err(|e| format!("case {case}: {e}"))?;
        let x: Vec<f64> = problem.variables.iter().map(|&a| sol.belief(a)).collect();
        let objective = objective_value(&problem, &x);
        let ok = objective <= best + 1e-3
            && problem.max_violation(&x) <= 1e-4
            && sol.beliefs.iter().all(|b| (0.0..=1.0).contains(b));
        if ok {
            good += 1;
        } else {
            eprintln!("solver case {case}: objective {objective} vs oracle {best}");
        }
    }
    ensure!(good == 50, "{good}/50 cases within bounds");
    within(start, Duration::from_secs(60))
}

fn convexity() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut checked = 0;
    for _ in 0..10 {
        let (model, db) = random::random_model(&mut rng);
        let p = compile(&model, &db);
        let n = p.variables.len();
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let l: f64 = rng.gen();
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| l * a + (1.0 - l) * b).collect();
            let lhs = objective_value(&p, &mid);
            let rhs = l * objective_value(&p, &x) + (1.0 - l) * objective_value(&p, &y);
            ensure!(lhs <= rhs + 1e-9, "convexity fails: {lhs} > {rhs} at {x:?} {y:?} {l}");
            checked += 1;
        }
    }
    ensure!(checked == 1000, "{checked} triples");
    Ok(())
}

fn weiss_optimum() -> Result<(), String> {
    let mut f = builtin("weiss").map_err(|e| e.to_string())?;
    let adj = GroundAtom::new("Pcat", ["weiß", "ADJ"]);
    let verb = GroundAtom::new("Pcat", ["weiß", "VERB"]);
    add_prior(&mut f, &adj, 1.0);
    add_prior(&mut f, &verb, 2.0);
    let inf = infer(&f.program, &f.db, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let b = |a: &GroundAtom| inf.solution.belief(f.db.find(a).unwrap());
    ensure!((b(&adj) - 0.0).abs() <= 1e-3, "ADJ = {}", b(&adj));
    ensure!((b(&verb) - 1.0).abs() <= 1e-3, "VERB = {}", b(&verb));
    ensure!((inf.solution.objective - 1.0).abs() <= 1e-3, "objective {}", inf.solution.objective);
    Ok(())
}

fn top_down_guidance() -> Result<(), String> {
    let start = Instant::now();
    let holz = builtin("holz").map_err(|e| e.to_string())?;
    let cfg = SolverConfig::default();
    let report = run_demo(&holz, &cfg).map_err(|e| e.to_string())?;
    let belief = |r: &softlogic::demo::DemoReport, name: &str| {
        r.ranking.iter().find(|c| c.ground.to_string() == name).map(|c| c.belief).unwrap_or(f64::NAN)
    };
    let (f1, f2) = (belief(&report, "Fvar('F1')"), belief(&report, "Fvar('F2')"));
    ensure!(f2 >= 0.99 && f1 <= 0.01, "with context: F1 {f1}, F2 {f2}");
    let ablated = run_demo(&ablate(&holz), &cfg).map_err(|e| e.to_string())?;
    let f1 = belief(&ablated, "Fvar('F1')");
    ensure!(f1 >= 0.99, "ablated: F1 {f1}");
    within(start, Duration::from_secs(5))
}

/// Distance to satisfaction computed straight from Łukasiewicz semantics.
fn reference_distance(rule: &GroundRule, x: &[f64]) -> f64 {
    match &rule.body {
        GroundBody::Clause(lits) => {
            let truth: f64 = lits
                .iter()
                .map(|l| if l.negated { 1.0 - x[l.atom.index()] } else { x[l.atom.index()] })
                .sum();
            (1.0 - truth).max(0.0)
        }
        GroundBody::Linear { terms, comparator, constant } => {
            let lhs: f64 = terms.iter().map(|(k, a)| k * x[a.index()]).sum::<f64>() - constant;
            match comparator {
                Comparator::Eq => lhs.abs(),
                Comparator::Le => lhs.max(0.0),
                Comparator::Ge => (-lhs).max(0.0),
            }
        }
    }
}

fn reference_penalty(rule: &GroundRule, x: &[f64]) -> f64 {
    let d = reference_distance(rule, x);
    match rule.kind {
        RuleKind::Hard => d,
        RuleKind::Weighted { weight, squared } => weight * if squared { d * d } else { d },
    }
}

fn freezing() -> Result<(), String> {
    let cfg = SolverConfig::default();
    for name in ["weiss", "holz"] {
        let f = builtin(name).map_err(|e| e.to_string())?;
        for atom in f.db.ids() {
            let mut session = Session::create(&f.program_text, &f.atoms_text).map_err(|e| e.to_string())?;
            session.infer(&cfg);
            let (view, _) = session.freeze(&[(atom, Some(0.25))], &cfg).map_err(|e| e.to_string())?;
            let label = f.db.record(atom).atom.to_string();
            let beliefs = view.beliefs().ok_or("no beliefs after freezing")?;
            ensure!(beliefs[atom.index()] == 0.25, "{name}: {label} moved to {}", beliefs[atom.index()]);
            match view.outcome.as_ref() {
                Some(Outcome::Solved(inf)) => {
                    for r in inf.model.rules.iter().filter(|r| r.is_hard()) {
                        let d = reference_distance(r, beliefs);
                        ensure!(d <= 1e-4, "{name}: freezing {label} leaves `{}` violated by {d}", r.text);
                    }
                }
                Some(Outcome::Infeasible(inf)) => {
                    ensure!(!inf.violated.is_empty(), "{name}: {label} infeasible without violated rules");
                }
                None => return Err(format!("{name}: {label} not solved")),
            }
        }
    }
    Ok(())
}

fn rag_properties() -> Result<(), String> {
    let cfg = SolverConfig::default();
    for name in BUILTIN {
        let f = builtin(name).map_err(|e| e.to_string())?;
        let inf = infer(&f.program, &f.db, &cfg).map_err(|e| format!("{name}: {e}"))?;
        let g = &inf.graph;
        ensure!(g.is_bipartite(), "{name}: not bipartite");
        let incidence: BTreeSet<(usize, AtomId)> = inf
            .model
            .rules
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.atoms().into_iter().map(move |a| (i, a)))
            .collect();
        let edges: BTreeSet<(usize, AtomId)> =
            g.edges.iter().map(|e| (g.rule(e.rule).unwrap().rule, g.atom(e.atom).unwrap().atom)).collect();
        ensure!(edges.len() == g.edges.len(), "{name}: duplicate edges");
        ensure!(edges == incidence, "{name}: edges differ from rule incidence");
        let atoms: BTreeSet<AtomId> = incidence.iter().map(|&(_, a)| a).collect();
        ensure!(g.atom_count() == atoms.len(), "{name}: atom nodes {} vs {}", g.atom_count(), atoms.len());
        ensure!(g.rule_count() == inf.model.rules.len(), "{name}: rule nodes");
    }

    // Finite differences on the weiss graph.
    let f = builtin("weiss").map_err(|e| e.to_string())?;
    let inf = infer(&f.program, &f.db, &cfg).map_err(|e| e.to_string())?;
    let eps = 1e-6;
    for e in &inf.graph.edges {
        let rule = &inf.model.rules[inf.graph.rule(e.rule).unwrap().rule];
        let atom = inf.graph.atom(e.atom).unwrap().atom;
        let x = &inf.solution.beliefs;
        let moved = |delta: f64| {
            let mut y = x.clone();
            y[atom.index()] += delta;
            reference_penalty(rule, &y)
        };
        let base = reference_penalty(rule, x);
        let up = (moved(eps) - base) / eps;
        let down = (moved(-eps) - base) / eps;
        let label = format!("{} on {}", rule.text, f.db.record(atom).atom);
        let tol = 1e-4;
        match e.direction {
            Direction::Upward => {
                ensure!(up < 0.0 && (-up - e.magnitude).abs() < tol, "{label}: upward but {up}")
            }
            Direction::Downward => {
                ensure!(down < 0.0 && (-down - e.magnitude).abs() < tol, "{label}: downward but {down}")
            }
            Direction::Both => ensure!(
                up > 0.0 && down > 0.0 && (up.min(down) - e.magnitude).abs() < tol,
                "{label}: both but {up} {down}"
            ),
            Direction::Inactive => {
                ensure!(up >= -tol && down >= -tol && e.magnitude == 0.0, "{label}: inactive but {up} {down}")
            }
        }
    }
    Ok(())
}

fn explanation() -> Result<(), String> {
    let f = builtin("weiss").map_err(|e| e.to_string())?;
    let inf = infer(&f.program, &f.db, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let verb = f.db.find(&GroundAtom::new("Pcat", ["weiß", "VERB"])).unwrap();
    let adj = f.db.find(&GroundAtom::new("Pcat", ["weiß", "ADJ"])).unwrap();
    let e = explain_atom(verb, &inf.graph, &inf.model, &f.program, &f.db, &QualifierConfig::default())
        .map_err(|e| e.to_string())?;
    ensure!(e.why_not.len() == 1, "{} why-not entries", e.why_not.len());
    let entry = &e.why_not[0];
    ensure!(
        entry.text == "exactly one part-of-speech must be assigned to each token",
        "why-not text: {}",
        entry.text
    );
    ensure!(
        entry.links.len() == 1 && entry.links[0].atom == adj,
        "links: {:?}",
        entry.links.iter().map(|l| &l.text).collect::<Vec<_>>()
    );
    Ok(())
}

fn service_coherence() -> Result<(), String> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(common::coherence_script())
}

fn main() {
    let criteria: [(&str, Check); 11] = [
        ("parser fidelity", parser_fidelity),
        ("grounding reproduction", grounding_reproduction),
        ("grounding oracle", grounding_oracle),
        ("solver oracle", solver_oracle),
        ("convexity", convexity),
        ("weiss analytic optimum", weiss_optimum),
        ("top-down guidance", top_down_guidance),
        ("freezing", freezing),
        ("rag properties", rag_properties),
        ("explanation", explanation),
        ("service coherence", service_coherence),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        match &result {
            Ok(()) => println!("PASS {name} ({took:.2?})"),
            Err(why) => {
                println!("FAIL {name} ({took:.2?}): {why}");
                failed.push(name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
