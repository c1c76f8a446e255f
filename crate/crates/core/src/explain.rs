//! Verbalized atoms, ground rules and why / why-not explanations.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::ground::{GroundModel, GroundRule};
use crate::lang::Program;
use crate::rag::{Direction, RuleAtomGraph};
use crate::store::{AtomDatabase, AtomId, GroundAtom};

/// Belief thresholds for the qualifier phrases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualifierConfig {
    /// At or above: "very likely".
    pub very_likely: f64,
    /// At or above: "likely".
    pub likely: f64,
    /// At or below: "unlikely".
    pub unlikely: f64,
    /// At or below: "very unlikely".
    pub very_unlikely: f64,
}

impl Default for QualifierConfig {
    fn default() -> Self {
        QualifierConfig { very_likely: 0.9, likely: 0.7, unlikely: 0.3, very_unlikely: 0.1 }
    }
}

impl QualifierConfig {
    pub fn qualifier(&self, belief: f64) -> &'static str {
        if belief >= self.very_likely {
            "very likely"
        } else if belief >= self.likely {
            "likely"
        } else if belief <= self.very_unlikely {
            "very unlikely"
        } else if belief <= self.unlikely {
            "unlikely"
        } else {
            "uncertain whether"
        }
    }
}

fn prefix(qualifier: &str) -> String {
    if qualifier.ends_with("whether") {
        format!("it is {qualifier} ")
    } else {
        format!("it is {qualifier} that ")
    }
}

/// Replaces each `{name}` whose name `lookup` knows; others are left as is.
fn fill(template: &str, lookup: impl Fn(&str) -> Option<String>) -> String {
    let mut out = String::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                match lookup(name) {
                    Some(v) => out.push_str(&v),
                    None => {
                        out.push('{');
                        out.push_str(name);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            None => {
                rest = &rest[open..];
                break;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Natural-language rendering of an atom at a belief. The most specific
/// matching predicate template wins; `{argN}` is 1-based. Templates without
/// `{belief-qualifier}` get an "it is ... that" prefix.
pub fn verbalize_atom(atom: &GroundAtom, belief: f64, db: &AtomDatabase, config: &QualifierConfig) -> String {
    let qualifier = config.qualifier(belief);
    let mut template: Option<(usize, &str)> = None;
    for v in db.predicate_named(&atom.predicate).map_or(&[][..], |i| &i.verbalizations) {
        let fixed = match &v.pattern {
            None => 0,
            Some(p)
                if p.len() == atom.args.len()
                    && p.iter().zip(&atom.args).all(|(p, a)| p.as_ref().is_none_or(|p| p == a)) =>
            {
                p.iter().flatten().count()
            }
            Some(_) => continue,
        };
        // Earlier templates win ties.
        if template.is_none_or(|(best, _)| fixed > best) {
            template = Some((fixed, &v.template));
        }
    }
    let template = template.map(|(_, t)| t);
    let Some(template) = template else {
        return format!("{}{atom} holds", prefix(qualifier));
    };
    let body = fill(template, |name| {
        if name == "belief-qualifier" {
            return Some(String::from(qualifier));
        }
        let n: usize = name.strip_prefix("arg")?.parse().ok()?;
        atom.args.get(n.checked_sub(1)?).cloned()
    });
    if template.contains("{belief-qualifier}") {
        body
    } else {
        format!("{}{body}", prefix(qualifier))
    }
}

/// The rule's template with its substitution applied, or the canonical text
/// of the ground rule when the rule has no template.
pub fn verbalize_ground_rule(rule: &GroundRule, program: &Program) -> String {
    match program.rules.get(rule.rule).and_then(|r| r.verbalization.as_deref()) {
        Some(template) => fill(template, |v| rule.binding(v).map(String::from)),
        None => rule.text.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkedAtom {
    pub atom: AtomId,
    pub text: String,
    pub belief: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationEntry {
    /// Ground rule id.
    pub rule: usize,
    pub text: String,
    pub direction: Direction,
    pub magnitude: f64,
    /// The other atoms of the rule.
    pub links: Vec<LinkedAtom>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub atom: AtomId,
    pub ground: GroundAtom,
    pub belief: f64,
    pub focus: String,
    /// Rules pushing the belief up, strongest first.
    pub why: Vec<ExplanationEntry>,
    /// Rules pushing the belief down, strongest first.
    pub why_not: Vec<ExplanationEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExplainError {
    UnknownAtom(AtomId),
}

impl fmt::Display for ExplainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExplainError::UnknownAtom(a) => write!(f, "atom #{} is not in the graph", a.0),
        }
    }
}

impl core::error::Error for ExplainError {}

/// Why and why-not blocks for `atom`. Equalities holding the atom in place
/// appear in both blocks; inactive rules in neither.
pub fn explain_atom(
    atom: AtomId,
    graph: &RuleAtomGraph,
    model: &GroundModel,
    program: &Program,
    db: &AtomDatabase,
    config: &QualifierConfig,
) -> Result<Explanation, ExplainError> {
    let node = graph.atom_node(atom).ok_or(ExplainError::UnknownAtom(atom))?;
    let focus = graph.atom(node).ok_or(ExplainError::UnknownAtom(atom))?;
    let mut why = Vec::new();
    let mut why_not = Vec::new();
    for edge in graph.edges_of(node) {
        if edge.direction == Direction::Inactive {
            continue;
        }
        let Some(rule_node) = graph.rule(edge.rule) else {
            continue;
        };
        let rule = &model.rules[rule_node.rule];
        let links = rule
            .atoms()
            .into_iter()
            .filter(|&a| a != atom)
            .map(|a| {
                let belief =
                    graph.atom_node(a).and_then(|n| graph.atom(n)).map_or_else(|| db.belief(a), |n| n.belief);
                LinkedAtom { atom: a, text: format!("{}", db.record(a).atom), belief }
            })
            .collect();
        let entry = ExplanationEntry {
            rule: rule_node.rule,
            text: verbalize_ground_rule(rule, program),
            direction: edge.direction,
            magnitude: edge.magnitude,
            links,
        };
        if edge.direction.is_upward() {
            why.push(entry.clone());
        }
        if edge.direction.is_downward() {
            why_not.push(entry);
        }
    }
    for block in [&mut why, &mut why_not] {
        block.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude).then(a.rule.cmp(&b.rule)));
    }
    Ok(Explanation {
        atom,
        ground: focus.ground.clone(),
        belief: focus.belief,
        focus: verbalize_atom(&focus.ground, focus.belief, db, config),
        why,
        why_not,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::{ground_program, GroundConfig};
    use crate::lang::parse_program;
    use crate::rag::build_rag;
    use crate::solve::{compile, solve_map, SolverConfig};
    use crate::store::Status;

    const WEISS: &str = "\
@predicate Pcat/2
@verbalize Pcat(*,'ADJ'): \"{arg1} is an adjective\"
@verbalize Pcat: \"{arg1} is tagged {arg2}\"
Pcat(T,C1) & C1 != C2 -> ~Pcat(T,C2) .
functional: Pcat(T,+C) = 1 .
@verbalize rule functional: \"exactly one part-of-speech must be assigned to each token\"
";

    fn weiss() -> (Program, AtomDatabase) {
        let p = parse_program(WEISS).unwrap();
        let mut db = AtomDatabase::new();
        db.register_program(&p).unwrap();
        db.commit_atom(GroundAtom::new("Pcat", ["weiß", "ADJ"]), 0.9, Status::Open).unwrap();
        db.commit_atom(GroundAtom::new("Pcat", ["weiß", "VERB"]), 0.1, Status::Open).unwrap();
        (p, db)
    }

    #[test]
    fn atom_templates() {
        let (_, db) = weiss();
        let q = QualifierConfig::default();
        let adj = GroundAtom::new("Pcat", ["weiß", "ADJ"]);
        assert_eq!(verbalize_atom(&adj, 0.95, &db, &q), "it is very likely that weiß is an adjective");
        let verb = GroundAtom::new("Pcat", ["weiß", "VERB"]);
        assert_eq!(verbalize_atom(&verb, 0.5, &db, &q), "it is uncertain whether weiß is tagged VERB");
        let x = GroundAtom::new("Xcat", ["P1", "das_1", "PRON"]);
        assert_eq!(
            verbalize_atom(&x, 1.0, &db, &q),
            "it is very likely that Xcat('P1','das_1','PRON') holds"
        );
    }

    #[test]
    fn qualifier_boundaries() {
        let q = QualifierConfig::default();
        let table = [
            (0.9, "very likely"),
            (0.7, "likely"),
            (0.69, "uncertain whether"),
            (0.31, "uncertain whether"),
            (0.3, "unlikely"),
            (0.1, "very unlikely"),
            (0.0, "very unlikely"),
        ];
        for (b, text) in table {
            assert_eq!(q.qualifier(b), text, "{b}");
        }
    }

    #[test]
    fn rule_templates_substitute() {
        let p = parse_program("tag: Pcat(T,C) -> Ok(T) .\n@verbalize rule tag: \"{T} is tagged {C}, {Z}\"")
            .unwrap();
        let mut db = AtomDatabase::new();
        db.commit_atom(GroundAtom::new("Pcat", ["weiß", "ADJ"]), 1.0, Status::Observed).unwrap();
        db.commit_atom(GroundAtom::new("Ok", ["weiß"]), 1.0, Status::Open).unwrap();
        let (model, _) = ground_program(&p, &db, &GroundConfig::default());
        assert_eq!(verbalize_ground_rule(&model.rules[0], &p), "weiß is tagged ADJ, {Z}");
        let bare = parse_program("Pcat(T,C) -> Ok(T) .").unwrap();
        assert_eq!(verbalize_ground_rule(&model.rules[0], &bare), model.rules[0].text);
    }

    #[test]
    fn weiss_why_not() {
        let (p, db) = weiss();
        let (model, _) = ground_program(&p, &db, &GroundConfig::default());
        let s = solve_map(&compile(&model, &db), &model, &db, &SolverConfig::default()).unwrap();
        let g = build_rag(&model, &s, &db).unwrap();
        let verb = db.find(&GroundAtom::new("Pcat", ["weiß", "VERB"])).unwrap();
        let adj = db.find(&GroundAtom::new("Pcat", ["weiß", "ADJ"])).unwrap();
        let e = explain_atom(verb, &g, &model, &p, &db, &QualifierConfig::default()).unwrap();
        assert_eq!(e.why_not.len(), 1);
        assert_eq!(e.why_not[0].text, "exactly one part-of-speech must be assigned to each token");
        assert_eq!(e.why_not[0].links.iter().map(|l| l.atom).collect::<Vec<_>>(), [adj]);
        assert!(explain_atom(AtomId(9), &g, &model, &p, &db, &QualifierConfig::default()).is_err());
    }
}
