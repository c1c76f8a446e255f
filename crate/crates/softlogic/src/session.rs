//! Inference sessions: a program and database that can be solved, inspected,
//! pinned and re-solved. Every published state carries a revision number.

use std::collections::BTreeMap;
use std::sync::Arc;

use softlogic_core::lang::Program;
use softlogic_core::solve::{MapSolution, SolveError, SolverConfig};
use softlogic_core::store::StoreError;
use softlogic_core::{AtomDatabase, AtomId, Diagnostic, GroundAtom, Selection, Status};

use crate::engine::{infer, load_database, load_program, InferError, Inference, LoadError};

/// Why the latest solve produced no solution.
#[derive(Debug, Clone)]
pub struct Infeasibility {
    /// `(ground rule id, rule text)` of violated hard rules.
    pub violated: Vec<(usize, String)>,
    pub best_effort: MapSolution,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Solved(Arc<Inference>),
    Infeasible(Arc<Infeasibility>),
}

/// An immutable, published session state.
#[derive(Debug, Clone)]
pub struct View {
    pub revision: u64,
    pub db: Arc<AtomDatabase>,
    pub program: Arc<Program>,
    /// `None` until the first solve after the last mutation.
    pub outcome: Option<Outcome>,
}

impl View {
    pub fn inference(&self) -> Option<&Inference> {
        match &self.outcome {
            Some(Outcome::Solved(i)) => Some(i),
            _ => None,
        }
    }

    /// Beliefs of the latest solve, best-effort ones included.
    pub fn beliefs(&self) -> Option<&[f64]> {
        match &self.outcome {
            Some(Outcome::Solved(i)) => Some(&i.solution.beliefs),
            Some(Outcome::Infeasible(f)) => Some(&f.best_effort.beliefs),
            None => None,
        }
    }

    /// Current belief of every atom: solved where available, stored otherwise.
    pub fn belief(&self, atom: AtomId) -> f64 {
        self.beliefs().map_or_else(|| self.db.belief(atom), |b| b[atom.index()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delta {
    pub atom: AtomId,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SessionError {
    #[error("unknown atom {0}")]
    UnknownAtom(String),
    #[error("malformed atom id `{0}`")]
    MalformedAtom(String),
    #[error("belief {0} is outside [0,1]")]
    BeliefOutOfRange(f64),
}

#[derive(Debug)]
pub struct Session {
    program: Arc<Program>,
    db: AtomDatabase,
    /// Status and belief of each pinned atom before its first pin.
    originals: BTreeMap<AtomId, (Status, f64)>,
    view: Arc<View>,
    pub warnings: Vec<Diagnostic>,
}

impl Session {
    pub fn create(program: &str, atoms: &str) -> Result<Session, LoadError> {
        let (program, mut warnings) = load_program(program)?;
        let (db, more) = load_database(&program, atoms)?;
        warnings.extend(more);
        let program = Arc::new(program);
        let view =
            Arc::new(View { revision: 0, db: Arc::new(db.clone()), program: program.clone(), outcome: None });
        Ok(Session { program, db, originals: BTreeMap::new(), view, warnings })
    }

    pub fn view(&self) -> Arc<View> {
        self.view.clone()
    }

    pub fn revision(&self) -> u64 {
        self.view.revision
    }

    pub fn resolve(&self, id: &str) -> Result<AtomId, SessionError> {
        let atom = GroundAtom::parse(id).ok_or_else(|| SessionError::MalformedAtom(id.to_string()))?;
        self.db.find(&atom).ok_or_else(|| SessionError::UnknownAtom(atom.to_string()))
    }

    fn solve(&self, config: &SolverConfig) -> Outcome {
        match infer(&self.program, &self.db, config) {
            Ok(i) => Outcome::Solved(Arc::new(i)),
            Err(e @ InferError::Infeasible { .. }) => {
                let violated = e.violated().iter().map(|&r| (r, e.model().rules[r].text.clone())).collect();
                let InferError::Infeasible { error, .. } = e;
                let SolveError::Infeasible { best_effort, .. } = *error;
                Outcome::Infeasible(Arc::new(Infeasibility { violated, best_effort }))
            }
        }
    }

    fn publish(&mut self, outcome: Outcome) -> Vec<Delta> {
        let before = self.view.clone();
        self.view = Arc::new(View {
            revision: before.revision + 1,
            db: Arc::new(self.db.clone()),
            program: self.program.clone(),
            outcome: Some(outcome),
        });
        let Some(old) = before.beliefs() else {
            return Vec::new();
        };
        let new = self.view.beliefs().expect("just solved");
        old.iter()
            .zip(new)
            .enumerate()
            .filter(|(_, (a, b))| a.to_bits() != b.to_bits())
            .map(|(i, (&before, &after))| Delta { atom: AtomId(i as u32), before, after })
            .collect()
    }

    /// Solves unless the published state is already solved; a repeated call
    /// returns the same view without a new revision.
    pub fn infer(&mut self, config: &SolverConfig) -> Arc<View> {
        if self.view.outcome.is_none() {
            let outcome = self.solve(config);
            self.publish(outcome);
        }
        self.view()
    }

    /// Freezes atoms at the given beliefs (their current belief when `None`)
    /// and re-solves. Nothing changes if any pin is invalid.
    pub fn freeze(
        &mut self,
        pins: &[(AtomId, Option<f64>)],
        config: &SolverConfig,
    ) -> Result<(Arc<View>, Vec<Delta>), SessionError> {
        for &(atom, belief) in pins {
            if atom.index() >= self.db.len() {
                return Err(SessionError::UnknownAtom(format!("#{}", atom.0)));
            }
            if let Some(b) = belief.filter(|b| !(0.0..=1.0).contains(b)) {
                return Err(SessionError::BeliefOutOfRange(b));
            }
        }
        for &(atom, belief) in pins {
            let rec = self.db.record(atom);
            self.originals.entry(atom).or_insert((rec.status, rec.belief));
            let pinned = belief.unwrap_or_else(|| self.view.belief(atom));
            self.set(atom, Status::Frozen, Some(pinned));
        }
        let outcome = self.solve(config);
        let deltas = self.publish(outcome);
        Ok((self.view(), deltas))
    }

    /// Restores pinned atoms (all of them when `atoms` is `None`) to their
    /// status before pinning and re-solves. Observed atoms also get their
    /// original belief back; open ones keep the pin as a starting value.
    pub fn thaw(
        &mut self,
        atoms: Option<&[AtomId]>,
        config: &SolverConfig,
    ) -> Result<(Arc<View>, Vec<Delta>), SessionError> {
        let targets: Vec<AtomId> = match atoms {
            None => self.originals.keys().copied().collect(),
            Some(list) => {
                if let Some(bad) = list.iter().find(|a| a.index() >= self.db.len()) {
                    return Err(SessionError::UnknownAtom(format!("#{}", bad.0)));
                }
                list.iter().copied().filter(|a| self.originals.contains_key(a)).collect()
            }
        };
        for atom in targets {
            let (status, belief) = self.originals.remove(&atom).expect("pinned");
            let restore = (!status.is_open()).then_some(belief);
            self.set(atom, status, restore);
        }
        let outcome = self.solve(config);
        let deltas = self.publish(outcome);
        Ok((self.view(), deltas))
    }

    fn set(&mut self, atom: AtomId, status: Status, belief: Option<f64>) {
        let r: Result<usize, StoreError> = self.db.set_status(&Selection::Ids(vec![atom]), status, belief);
        r.expect("atom and belief were checked");
    }

    pub fn pinned(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.originals.keys().copied()
    }
}
