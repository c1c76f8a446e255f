//! Demo runs over fixtures: ground, solve, rank candidates and explain the
//! top and bottom ones.

use std::fmt::Write;

use softlogic_core::explain::{explain_atom, Explanation, QualifierConfig};
use softlogic_core::lang::{parse_rule, Program};
use softlogic_core::solve::SolverConfig;
use softlogic_core::{AtomId, GroundAtom};

use crate::engine::{infer, load_program, InferError, Inference};
use crate::fixture::Fixture;

/// The generic layered program the holz fixture runs on.
pub fn build_architecture_program() -> Program {
    let text = include_str!("../fixtures/holz/program.psl");
    load_program(text).expect("shipped program is valid").0
}

#[derive(Debug, Clone)]
pub struct Ranked {
    pub atom: AtomId,
    pub ground: GroundAtom,
    pub belief: f64,
    /// Surface text from `variant.<arg>` metadata, if any.
    pub text: Option<String>,
}

#[derive(Debug, Clone)]
pub struct DemoReport {
    pub fixture: String,
    pub ranking: Vec<Ranked>,
    pub inference: Inference,
    pub explanations: Vec<Explanation>,
}

/// Candidates ranked by solved belief: `Fvar` atoms when the fixture has
/// any, otherwise every open atom. Ties keep atom order.
pub fn rank(fixture: &Fixture, inference: &Inference) -> Vec<Ranked> {
    let db = &fixture.db;
    let has_variants = db.records().iter().any(|r| r.atom.predicate == "Fvar");
    let mut out: Vec<Ranked> = db
        .ids()
        .filter(|&id| {
            let r = db.record(id);
            if has_variants {
                r.atom.predicate == "Fvar"
            } else {
                r.status.is_open()
            }
        })
        .map(|id| {
            let ground = db.record(id).atom.clone();
            let text =
                ground.args.first().and_then(|a| fixture.meta(&format!("variant.{a}"))).map(String::from);
            Ranked { atom: id, belief: inference.solution.belief(id), ground, text }
        })
        .collect();
    out.sort_by(|a, b| b.belief.total_cmp(&a.belief));
    out
}

pub fn run_demo(fixture: &Fixture, config: &SolverConfig) -> Result<DemoReport, InferError> {
    let inference = infer(&fixture.program, &fixture.db, config)?;
    let ranking = rank(fixture, &inference);
    let mut focus: Vec<AtomId> = ranking.first().map(|r| r.atom).into_iter().collect();
    if let Some(last) = ranking.last().filter(|_| ranking.len() > 1) {
        focus.push(last.atom);
    }
    let explanations = focus
        .into_iter()
        .filter_map(|a| {
            explain_atom(
                a,
                &inference.graph,
                &inference.model,
                &fixture.program,
                &fixture.db,
                &QualifierConfig::default(),
            )
            .ok()
        })
        .collect();
    Ok(DemoReport { fixture: fixture.name.clone(), ranking, inference, explanations })
}

/// The fixture without atoms of the predicates listed in its
/// `ablation.remove` metadata.
pub fn ablate(fixture: &Fixture) -> Fixture {
    let remove: Vec<&str> =
        fixture.meta("ablation.remove").map(|v| v.split(',').map(str::trim).collect()).unwrap_or_default();
    let mut out = fixture.clone();
    out.name = format!("{}-ablated", fixture.name);
    out.db = fixture.db.filtered(|r| !remove.contains(&r.atom.predicate.as_str()));
    out
}

/// Adds a weighted single-atom prior such as `2.0: Pcat('weiß','VERB')`.
pub fn add_prior(fixture: &mut Fixture, atom: &GroundAtom, weight: f64) {
    let rule = parse_rule(&format!("{weight:?}: {atom}")).expect("prior rule is well formed");
    fixture.program.rules.push(rule);
}

pub fn render_explanation(e: &Explanation) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} = {:.4}: {}", e.ground, e.belief, e.focus);
    for (title, block) in [("why", &e.why), ("why not", &e.why_not)] {
        let _ = writeln!(out, "  {title}:");
        if block.is_empty() {
            let _ = writeln!(out, "    (nothing)");
        }
        for entry in block {
            let _ = writeln!(out, "    [{:.3}] {}", entry.magnitude, entry.text);
            for link in &entry.links {
                let _ = writeln!(out, "        -> {} = {:.4}", link.text, link.belief);
            }
        }
    }
    out
}

pub fn render_report(report: &DemoReport) -> String {
    let mut out = String::new();
    let s = &report.inference.solution;
    let _ = writeln!(out, "fixture {}", report.fixture);
    let _ = writeln!(
        out,
        "objective {:.6}, {} iterations, max violation {:.1e}",
        s.objective, s.iterations, s.max_violation
    );
    let _ = writeln!(out, "ranking:");
    for (i, r) in report.ranking.iter().enumerate() {
        let _ = write!(out, "  {}. {} {:.4}", i + 1, r.ground, r.belief);
        if let Some(t) = &r.text {
            let _ = write!(out, "  \"{t}\"");
        }
        out.push('\n');
    }
    for e in &report.explanations {
        out.push('\n');
        out.push_str(&render_explanation(e));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::builtin;
    use softlogic_core::lang::validate_program;

    #[test]
    fn architecture_program_quotes() {
        let p = build_architecture_program();
        assert!(validate_program(&p).is_empty());
        let text: Vec<String> = p.rules.iter().map(softlogic_core::lang::format_rule).collect();
        for needle in [
            "Cent(X) -> Sent(X) .",
            "Crel(X,R,Y) -> Srel(X,R,Y) .",
            "Dlnk(H,D) & Pcat(H,'PNOUN') -> ~Pcat(D,'DET') .",
            "Tana(+T) = 1 .",
            "Fvar(+V) = 1 .",
        ] {
            assert!(text.iter().any(|t| t.ends_with(needle)), "{needle} missing from {text:#?}");
        }
    }

    #[test]
    fn holz_ranks_f2_first() {
        let f = builtin("holz").unwrap();
        let r = run_demo(&f, &SolverConfig::default()).unwrap();
        assert_eq!(r.ranking[0].ground.to_string(), "Fvar('F2')");
        assert_eq!(r.ranking[0].text.as_deref(), Some("Das Holz roch beinahe wie Kuchen."));
        assert_eq!(r.explanations.len(), 2);
        let text = render_report(&r);
        assert!(text.contains("1. Fvar('F2')"), "{text}");
    }

    #[test]
    fn ablation_drops_context() {
        let f = ablate(&builtin("holz").unwrap());
        assert!(f.db.records().iter().all(|r| !r.atom.predicate.starts_with('C')));
        let r = run_demo(&f, &SolverConfig::default()).unwrap();
        assert_eq!(r.ranking[0].ground.to_string(), "Fvar('F1')");
    }

    #[test]
    fn priors_decide_weiss() {
        let mut f = builtin("weiss").unwrap();
        add_prior(&mut f, &GroundAtom::new("Pcat", ["weiß", "ADJ"]), 1.0);
        add_prior(&mut f, &GroundAtom::new("Pcat", ["weiß", "VERB"]), 2.0);
        let r = run_demo(&f, &SolverConfig::default()).unwrap();
        assert_eq!(r.ranking[0].ground.to_string(), "Pcat('weiß','VERB')");
        assert!((r.inference.solution.objective - 1.0).abs() < 1e-3);
    }
}
