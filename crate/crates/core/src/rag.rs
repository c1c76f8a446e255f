//! Rule-atom graphs: a bipartite graph of atom nodes and ground-rule nodes,
//! annotated with each rule's stress and the pressure it puts on each atom.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use serde::{Deserialize, Serialize};

use crate::ground::{GroundBody, GroundModel, GroundRule};
use crate::lang::{Comparator, RuleKind};
use crate::solve::{residual, MapSolution, MissingValue, Shape};
use crate::store::{AtomDatabase, AtomId, GroundAtom, Status};

/// Residuals this close to zero count as being on the hinge's kink.
const KINK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Raising the belief lowers the rule's penalty.
    Upward,
    /// Lowering the belief lowers the rule's penalty.
    Downward,
    /// A satisfied equality: moving the belief either way is penalized.
    Both,
    Inactive,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Upward => "upward",
            Direction::Downward => "downward",
            Direction::Both => "both",
            Direction::Inactive => "inactive",
        }
    }

    /// Pushes the belief up, or holds it against moving down.
    pub fn is_upward(self) -> bool {
        matches!(self, Direction::Upward | Direction::Both)
    }

    pub fn is_downward(self) -> bool {
        matches!(self, Direction::Downward | Direction::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pressure {
    pub direction: Direction,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RagError {
    /// The solution was computed for a different model or database.
    StaleSolution,
    AtomNotInRule {
        atom: AtomId,
        rule: usize,
    },
    MissingValue(AtomId),
}

impl fmt::Display for RagError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RagError::StaleSolution => f.write_str("solution does not match the ground model"),
            RagError::AtomNotInRule { atom, rule } => {
                write!(f, "atom #{} does not occur in ground rule {rule}", atom.0)
            }
            RagError::MissingValue(a) => write!(f, "no belief for atom #{}", a.0),
        }
    }
}

impl core::error::Error for RagError {}

impl From<MissingValue> for RagError {
    fn from(m: MissingValue) -> Self {
        RagError::MissingValue(m.0)
    }
}

/// Coefficient of `atom` in the rule's residual `h`.
fn coefficient(rule: &GroundRule, atom: AtomId) -> Option<f64> {
    let mut found = false;
    let mut a = 0.0;
    match &rule.body {
        GroundBody::Clause(lits) => {
            for l in lits.iter().filter(|l| l.atom == atom) {
                found = true;
                a += if l.negated { 1.0 } else { -1.0 };
            }
        }
        GroundBody::Linear { terms, comparator, .. } => {
            let sign = if *comparator == Comparator::Ge { -1.0 } else { 1.0 };
            for &(c, _) in terms.iter().filter(|t| t.1 == atom) {
                found = true;
                a += sign * c;
            }
        }
    }
    found.then_some(a)
}

fn weight_and_exponent(kind: RuleKind) -> (f64, u32) {
    match kind {
        RuleKind::Hard => (1.0, 1),
        RuleKind::Weighted { weight, squared } => (weight, if squared { 2 } else { 1 }),
    }
}

/// The rule's penalty: `w·d^p` for weighted rules, `d` for hard ones.
pub fn penalty(rule: &GroundRule, beliefs: &[f64]) -> Result<f64, MissingValue> {
    let (h, shape) = residual(rule, beliefs)?;
    let d = shape.apply(h);
    let (w, p) = weight_and_exponent(rule.kind);
    Ok(if p == 2 { w * d * d } else { w * d })
}

/// Classifies the pressure `rule` exerts on `atom` from the one-sided
/// derivatives of its penalty with respect to the atom's belief.
pub fn compute_pressure(rule: &GroundRule, atom: AtomId, beliefs: &[f64]) -> Result<Pressure, RagError> {
    let a = coefficient(rule, atom).ok_or(RagError::AtomNotInRule { atom, rule: rule.rule })?;
    let (h, shape) = residual(rule, beliefs)?;
    let (w, p) = weight_and_exponent(rule.kind);
    // Slope of the penalty per unit of |h| away from the kink.
    let g = if p == 2 { 2.0 * w * shape.apply(h) } else { w };
    let (up, down) = match shape {
        Shape::Hinge if h > KINK => (a * g, -a * g),
        Shape::Hinge if h < -KINK => (0.0, 0.0),
        Shape::Hinge if p == 1 => (a.max(0.0) * w, (-a).max(0.0) * w),
        Shape::Abs if h > KINK => (a * g, -a * g),
        Shape::Abs if h < -KINK => (-a * g, a * g),
        Shape::Abs if p == 1 => (a.abs() * w, a.abs() * w),
        _ => (0.0, 0.0),
    };
    let (direction, magnitude) = if up < 0.0 {
        (Direction::Upward, -up)
    } else if down < 0.0 {
        (Direction::Downward, -down)
    } else if up > 0.0 && down > 0.0 {
        (Direction::Both, up.min(down))
    } else {
        (Direction::Inactive, 0.0)
    };
    Ok(Pressure { direction, magnitude })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomNode {
    pub atom: AtomId,
    pub ground: GroundAtom,
    pub belief: f64,
    pub status: Status,
    pub layer: char,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleNode {
    /// Ground rule id.
    pub rule: usize,
    pub stress: f64,
    pub hard: bool,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RagNode {
    Atom(AtomNode),
    Rule(RuleNode),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureEdge {
    /// Node index of the rule.
    pub rule: usize,
    /// Node index of the atom.
    pub atom: usize,
    pub direction: Direction,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleAtomGraph {
    pub nodes: Vec<RagNode>,
    pub edges: Vec<PressureEdge>,
    atom_nodes: BTreeMap<AtomId, usize>,
    rule_nodes: Vec<usize>,
    /// Edge indices per node.
    adjacency: Vec<Vec<usize>>,
}

impl RuleAtomGraph {
    pub fn atom_node(&self, atom: AtomId) -> Option<usize> {
        self.atom_nodes.get(&atom).copied()
    }

    pub fn rule_node(&self, rule: usize) -> Option<usize> {
        self.rule_nodes.get(rule).copied()
    }

    pub fn edges_of(&self, node: usize) -> impl Iterator<Item = &PressureEdge> {
        self.adjacency[node].iter().map(move |&e| &self.edges[e])
    }

    pub fn atom_count(&self) -> usize {
        self.atom_nodes.len()
    }

    pub fn rule_count(&self) -> usize {
        self.rule_nodes.len()
    }

    pub fn atom(&self, node: usize) -> Option<&AtomNode> {
        match &self.nodes[node] {
            RagNode::Atom(a) => Some(a),
            RagNode::Rule(_) => None,
        }
    }

    pub fn rule(&self, node: usize) -> Option<&RuleNode> {
        match &self.nodes[node] {
            RagNode::Rule(r) => Some(r),
            RagNode::Atom(_) => None,
        }
    }

    /// True if every edge joins a rule node to an atom node.
    pub fn is_bipartite(&self) -> bool {
        self.edges.iter().all(|e| {
            matches!(self.nodes.get(e.rule), Some(RagNode::Rule(_)))
                && matches!(self.nodes.get(e.atom), Some(RagNode::Atom(_)))
        })
    }

    /// Node id used by the exports: the atom text or `r<ground rule id>`.
    pub fn node_id(&self, node: usize) -> String {
        match &self.nodes[node] {
            RagNode::Atom(a) => format!("{}", a.ground),
            RagNode::Rule(r) => format!("r{}", r.rule),
        }
    }
}

/// Builds the graph for `model` at `solution`. Atom nodes come first, in atom
/// id order, followed by one node per ground rule.
pub fn build_rag(
    model: &GroundModel,
    solution: &MapSolution,
    db: &AtomDatabase,
) -> Result<RuleAtomGraph, RagError> {
    if solution.beliefs.len() != db.len() || solution.distances.len() != model.rules.len() {
        return Err(RagError::StaleSolution);
    }
    let mut g = RuleAtomGraph::default();
    for &atom in model.atom_rules.keys() {
        let rec = db.record(atom);
        g.atom_nodes.insert(atom, g.nodes.len());
        g.nodes.push(RagNode::Atom(AtomNode {
            atom,
            ground: rec.atom.clone(),
            belief: solution.belief(atom),
            status: rec.status,
            layer: rec.atom.layer().unwrap_or('?'),
        }));
    }
    for (id, rule) in model.rules.iter().enumerate() {
        g.rule_nodes.push(g.nodes.len());
        g.nodes.push(RagNode::Rule(RuleNode {
            rule: id,
            stress: solution.distances[id],
            hard: rule.is_hard(),
            text: rule.text.clone(),
        }));
    }
    g.adjacency = alloc::vec![Vec::new(); g.nodes.len()];
    for (id, rule) in model.rules.iter().enumerate() {
        let r = g.rule_nodes[id];
        for atom in rule.atoms() {
            let pressure = compute_pressure(rule, atom, &solution.beliefs)?;
            let a = g.atom_nodes[&atom];
            let e = g.edges.len();
            g.edges.push(PressureEdge {
                rule: r,
                atom: a,
                direction: pressure.direction,
                magnitude: pressure.magnitude,
            });
            g.adjacency[r].push(e);
            g.adjacency[a].push(e);
        }
    }
    Ok(g)
}

/// Colors and scales for the DOT export.
#[derive(Debug, Clone, PartialEq)]
pub struct DotStyle {
    /// Fill color per layer prefix, as RGB.
    pub palette: BTreeMap<char, [u8; 3]>,
    pub fallback: [u8; 3],
    /// Font color of rule nodes at stress 0 and at stress 1 or more.
    pub calm: [u8; 3],
    pub stressed: [u8; 3],
}

impl Default for DotStyle {
    fn default() -> Self {
        let palette = [
            ('T', [0x9e, 0x9e, 0x9e]),
            ('F', [0xff, 0x98, 0x00]),
            ('P', [0xff, 0xff, 0x00]),
            ('L', [0x8d, 0x6e, 0x63]),
            ('M', [0xe9, 0x1e, 0x63]),
            ('D', [0x00, 0xc8, 0x53]),
            ('S', [0x21, 0x96, 0xf3]),
            ('C', [0x00, 0xbc, 0xd4]),
            ('X', [0xbd, 0xbd, 0xbd]),
        ]
        .into_iter()
        .collect();
        DotStyle { palette, fallback: [0xff, 0xff, 0xff], calm: [0, 0, 0], stressed: [0xff, 0, 0] }
    }
}

fn dot_escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

fn lerp(a: [u8; 3], b: [u8; 3], t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let mut out = [0u8; 3];
    for i in 0..3 {
        out[i] = libm::round(a[i] as f64 + (b[i] as f64 - a[i] as f64) * t) as u8;
    }
    out
}

/// Graphviz text. Atom fill opacity follows belief; rule font color follows
/// stress. Output is deterministic.
pub fn export_dot(graph: &RuleAtomGraph, style: &DotStyle) -> String {
    let mut out = String::from("graph rag {\n");
    for node in &graph.nodes {
        match node {
            RagNode::Atom(a) => {
                let [r, g, b] = style.palette.get(&a.layer).copied().unwrap_or(style.fallback);
                let alpha = libm::round(a.belief.clamp(0.0, 1.0) * 255.0) as u8;
                let _ = writeln!(
                    out,
                    "  \"a{}\" [shape=ellipse, style=filled, label=\"{}\", fillcolor=\"#{r:02x}{g:02x}{b:02x}{alpha:02x}\", tooltip=\"{:.3}\"];",
                    a.atom.0,
                    dot_escape(&format!("{}", a.ground)),
                    a.belief
                );
            }
            RagNode::Rule(rule) => {
                let [r, g, b] = lerp(style.calm, style.stressed, rule.stress);
                let _ = writeln!(
                    out,
                    "  \"r{}\" [shape=box, color=black, penwidth={}, label=\"{}\", fontcolor=\"#{r:02x}{g:02x}{b:02x}\", tooltip=\"stress {:.3}\"];",
                    rule.rule,
                    if rule.hard { 2 } else { 1 },
                    dot_escape(&rule.text),
                    rule.stress
                );
            }
        }
    }
    for e in &graph.edges {
        let (Some(rule), Some(atom)) = (graph.rule(e.rule), graph.atom(e.atom)) else {
            continue;
        };
        let color = match e.direction {
            Direction::Upward => "#2e7d32",
            Direction::Downward => "#c62828",
            Direction::Both => "#1565c0",
            Direction::Inactive => "#9e9e9e",
        };
        let _ = writeln!(
            out,
            "  \"r{}\" -- \"a{}\" [color=\"{color}\", label=\"{} {:.3}\"];",
            rule.rule,
            atom.atom.0,
            e.direction.as_str(),
            e.magnitude
        );
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonNode {
    pub id: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub predicate: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub args: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub belief: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub status: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub layer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stress: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hard: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonEdge {
    pub rule: String,
    pub atom: String,
    pub direction: Direction,
    pub magnitude: f64,
}

/// The explorer's view of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonGraph {
    pub nodes: Vec<JsonNode>,
    pub edges: Vec<JsonEdge>,
}

impl JsonGraph {
    pub fn from_graph(graph: &RuleAtomGraph) -> Self {
        let nodes = graph
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| match n {
                RagNode::Atom(a) => JsonNode {
                    id: graph.node_id(i),
                    kind: String::from("atom"),
                    predicate: Some(a.ground.predicate.clone()),
                    args: Some(a.ground.args.clone()),
                    belief: Some(a.belief),
                    status: Some(String::from(a.status.as_str())),
                    layer: Some(String::from(a.layer)),
                    stress: None,
                    hard: None,
                    text: None,
                },
                RagNode::Rule(r) => JsonNode {
                    id: graph.node_id(i),
                    kind: String::from("rule"),
                    predicate: None,
                    args: None,
                    belief: None,
                    status: None,
                    layer: None,
                    stress: Some(r.stress),
                    hard: Some(r.hard),
                    text: Some(r.text.clone()),
                },
            })
            .collect();
        let edges = graph
            .edges
            .iter()
            .map(|e| JsonEdge {
                rule: graph.node_id(e.rule),
                atom: graph.node_id(e.atom),
                direction: e.direction,
                magnitude: e.magnitude,
            })
            .collect();
        JsonGraph { nodes, edges }
    }
}

pub fn export_json(graph: &RuleAtomGraph) -> String {
    serde_json::to_string(&JsonGraph::from_graph(graph)).expect("graph serializes")
}
