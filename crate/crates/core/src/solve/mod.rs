//! MAP inference: ground rules compile to hinge potentials over the beliefs of
//! open atoms plus linear hard constraints, and the resulting convex problem
//! is minimized over the unit box.

mod admm;
mod oracle;

use alloc::vec::Vec;
use core::fmt;

use crate::ground::{GroundBody, GroundModel, GroundRule};
use crate::lang::{Comparator, RuleKind};
use crate::store::{AtomDatabase, AtomId};

pub use admm::{solve_map, SolverConfig};
pub use oracle::{grid_search_oracle, OracleError, OracleResult};

/// `Σ coefficient·x[variable] + constant`, over problem variable indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearForm {
    pub coefficients: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinearForm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coefficients.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    /// Smallest and largest value over the unit box with the variables in
    /// `assigned` fixed to their values in `x`.
    pub(crate) fn range(&self, x: &[f64], assigned: impl Fn(usize) -> bool) -> (f64, f64) {
        let mut lo = self.constant;
        let mut hi = self.constant;
        for &(i, c) in &self.coefficients {
            if assigned(i) {
                lo += c * x[i];
                hi += c * x[i];
            } else if c > 0.0 {
                hi += c;
            } else {
                lo += c;
            }
        }
        (lo, hi)
    }

    fn squared_norm(&self) -> f64 {
        self.coefficients.iter().map(|&(_, c)| c * c).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// `max(0, h)`
    Hinge,
    /// `|h|`
    Abs,
}

impl Shape {
    pub fn apply(self, h: f64) -> f64 {
        match self {
            Shape::Hinge => h.max(0.0),
            Shape::Abs => h.abs(),
        }
    }
}

/// A weighted penalty `weight · shape(form)^exponent`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub form: LinearForm,
    pub shape: Shape,
    pub weight: f64,
    pub exponent: u32,
    /// Id of the ground rule it came from.
    pub origin: usize,
}

impl Potential {
    pub fn value(&self, x: &[f64]) -> f64 {
        let d = self.shape.apply(self.form.eval(x));
        if self.exponent == 2 {
            self.weight * d * d
        } else {
            self.weight * d
        }
    }
}

/// A hard constraint: `form <= 0` (hinge shape) or `form = 0` (abs shape).
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub form: LinearForm,
    pub shape: Shape,
    pub origin: usize,
}

impl Constraint {
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.shape.apply(self.form.eval(x))
    }

    pub fn is_equality(&self) -> bool {
        self.shape == Shape::Abs
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MapProblem {
    /// The open atoms that occur in some potential or constraint.
    pub variables: Vec<AtomId>,
    /// Warm start per variable, taken from the stored beliefs.
    pub initial: Vec<f64>,
    pub potentials: Vec<Potential>,
    pub constraints: Vec<Constraint>,
}

impl MapProblem {
    pub fn variable_index(&self, atom: AtomId) -> Option<usize> {
        self.variables.iter().position(|&a| a == atom)
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.violation(x)).fold(0.0, f64::max)
    }
}

/// Sum of weighted penalties; hard constraints do not contribute.
pub fn objective_value(problem: &MapProblem, x: &[f64]) -> f64 {
    problem.potentials.iter().map(|p| p.value(x)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MissingValue(pub AtomId);

impl fmt::Display for MissingValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no belief for atom #{}", self.0 .0)
    }
}

/// The rule's residual `h` with distance `shape(h)`, before clipping.
pub(crate) fn residual(rule: &GroundRule, beliefs: &[f64]) -> Result<(f64, Shape), MissingValue> {
    let get = |a: AtomId| beliefs.get(a.index()).copied().ok_or(MissingValue(a));
    match &rule.body {
        GroundBody::Clause(lits) => {
            let mut sum = 0.0;
            for l in lits {
                let x = get(l.atom)?;
                sum += if l.negated { 1.0 - x } else { x };
            }
            Ok((1.0 - sum, Shape::Hinge))
        }
        GroundBody::Linear { terms, comparator, constant } => {
            let mut e = 0.0;
            for &(c, a) in terms {
                e += c * get(a)?;
            }
            Ok(match comparator {
                Comparator::Le => (e - constant, Shape::Hinge),
                Comparator::Ge => (constant - e, Shape::Hinge),
                Comparator::Eq => (e - constant, Shape::Abs),
            })
        }
    }
}

/// Distance to satisfaction under Łukasiewicz semantics. `beliefs` is indexed
/// by atom id.
pub fn distance_to_satisfaction(rule: &GroundRule, beliefs: &[f64]) -> Result<f64, MissingValue> {
    residual(rule, beliefs).map(|(h, s)| s.apply(h))
}

/// Builds the optimization problem. Observed and frozen atoms enter as
/// constants; open atoms become variables.
pub fn compile(model: &GroundModel, db: &AtomDatabase) -> MapProblem {
    let mut problem = MapProblem::default();
    let mut index_of: alloc::collections::BTreeMap<AtomId, usize> = Default::default();
    for (origin, rule) in model.rules.iter().enumerate() {
        // h = Σ a·x + b, with the distance shape(h).
        let mut raw: Vec<(AtomId, f64)> = Vec::new();
        let (mut constant, shape) = match &rule.body {
            GroundBody::Clause(lits) => {
                let mut b = 1.0;
                for l in lits {
                    if l.negated {
                        b -= 1.0;
                        raw.push((l.atom, 1.0));
                    } else {
                        raw.push((l.atom, -1.0));
                    }
                }
                (b, Shape::Hinge)
            }
            GroundBody::Linear { terms, comparator, constant } => {
                let sign = if *comparator == Comparator::Ge { -1.0 } else { 1.0 };
                raw.extend(terms.iter().map(|&(c, a)| (a, sign * c)));
                let shape = if *comparator == Comparator::Eq { Shape::Abs } else { Shape::Hinge };
                (-sign * constant, shape)
            }
        };
        let mut coefficients: Vec<(usize, f64)> = Vec::new();
        for (atom, c) in raw {
            let rec = db.record(atom);
            if !rec.status.is_open() {
                constant += c * rec.belief;
                continue;
            }
            let next = index_of.len();
            let i = *index_of.entry(atom).or_insert_with(|| {
                problem.variables.push(atom);
                problem.initial.push(rec.belief);
                next
            });
            match coefficients.iter_mut().find(|(j, _)| *j == i) {
                Some(t) => t.1 += c,
                None => coefficients.push((i, c)),
            }
        }
        coefficients.retain(|(_, c)| *c != 0.0);
        let form = LinearForm { coefficients, constant };
        match rule.kind {
            RuleKind::Hard => problem.constraints.push(Constraint { form, shape, origin }),
            RuleKind::Weighted { weight, squared } => problem.potentials.push(Potential {
                form,
                shape,
                weight,
                exponent: if squared { 2 } else { 1 },
                origin,
            }),
        }
    }
    problem
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSolution {
    /// Belief per atom id of the database the problem was compiled from.
    pub beliefs: Vec<f64>,
    pub objective: f64,
    /// Distance to satisfaction per ground rule id.
    pub distances: Vec<f64>,
    pub iterations: usize,
    pub max_violation: f64,
    pub converged: bool,
}

impl MapSolution {
    pub fn belief(&self, atom: AtomId) -> f64 {
        self.beliefs[atom.index()]
    }

    /// Key-value diagnostics block.
    pub fn diagnostics(&self) -> alloc::string::String {
        alloc::format!(
            "iterations={}\nobjective={}\nmax_violation={:e}\nconverged={}\n",
            self.iterations,
            self.objective,
            self.max_violation,
            self.converged
        )
    }
}

/// Assembles a solution from problem-variable values.
pub fn solution_from(
    problem: &MapProblem,
    model: &GroundModel,
    db: &AtomDatabase,
    x: &[f64],
    iterations: usize,
    converged: bool,
) -> MapSolution {
    let mut beliefs: Vec<f64> = db.records().iter().map(|r| r.belief).collect();
    for (&atom, &v) in problem.variables.iter().zip(x) {
        beliefs[atom.index()] = v;
    }
    let distances = model
        .rules
        .iter()
        .map(|r| distance_to_satisfaction(r, &beliefs).expect("model grounded against db"))
        .collect();
    MapSolution {
        objective: objective_value(problem, x),
        max_violation: problem.max_violation(x),
        beliefs,
        distances,
        iterations,
        converged,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    /// The hard constraints admit no assignment in the unit box. `violated`
    /// lists ground rule ids still violated by the best-effort assignment.
    Infeasible { violated: Vec<usize>, best_effort: MapSolution },
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::Infeasible { violated, best_effort } => write!(
                f,
                "hard constraints are infeasible: {} violated (max violation {:e})",
                violated.len(),
                best_effort.max_violation
            ),
        }
    }
}

impl core::error::Error for SolveError {}
