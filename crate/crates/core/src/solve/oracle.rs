//! Exhaustive grid search, used as an independent check on the solver.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::{MapProblem, Shape};

pub const MAX_ORACLE_VARIABLES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Best feasible grid point and its objective; `None` if no grid point
    /// satisfies the hard constraints.
    pub best: Option<(Vec<f64>, f64)>,
    /// Number of complete grid points evaluated.
    pub evaluated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleError {
    TooManyVariables(usize),
    InvalidStep(f64),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::TooManyVariables(n) => {
                write!(f, "grid search supports at most {MAX_ORACLE_VARIABLES} variables, got {n}")
            }
            OracleError::InvalidStep(s) => write!(f, "grid step {s} must be in (0, 1]"),
        }
    }
}

/// Minimum objective over the grid `{0, step, ..., 1}^n` among points whose
/// constraint violation is at most `slack`.
///
/// Partial assignments are pruned with bounds that are exact over the box, so
/// the result equals plain enumeration.
pub fn grid_search_oracle(problem: &MapProblem, step: f64, slack: f64) -> Result<OracleResult, OracleError> {
    let n = problem.variables.len();
    if n > MAX_ORACLE_VARIABLES {
        return Err(OracleError::TooManyVariables(n));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(OracleError::InvalidStep(step));
    }
    let levels = libm::round(1.0 / step).max(1.0) as usize;
    let mut search = Search { problem, levels, slack, x: vec![0.0; n], best: None, evaluated: 0 };
    search.descend(0);
    Ok(OracleResult { best: search.best, evaluated: search.evaluated })
}

struct Search<'a> {
    problem: &'a MapProblem,
    levels: usize,
    slack: f64,
    x: Vec<f64>,
    best: Option<(Vec<f64>, f64)>,
    evaluated: usize,
}

impl Search<'_> {
    /// Lower bound on the objective with variables `< depth` assigned, or
    /// `None` if some constraint can no longer be met.
    fn bound(&self, depth: usize) -> Option<f64> {
        let assigned = |i: usize| i < depth;
        for c in &self.problem.constraints {
            let (lo, hi) = c.form.range(&self.x, assigned);
            let dead = match c.shape {
                Shape::Hinge => lo > self.slack,
                Shape::Abs => lo > self.slack || hi < -self.slack,
            };
            if dead {
                return None;
            }
        }
        let mut total = 0.0;
        for p in &self.problem.potentials {
            let (lo, hi) = p.form.range(&self.x, assigned);
            let d = match p.shape {
                Shape::Hinge => lo.max(0.0),
                Shape::Abs if lo > 0.0 => lo,
                Shape::Abs if hi < 0.0 => -hi,
                Shape::Abs => 0.0,
            };
            total += if p.exponent == 2 { p.weight * d * d } else { p.weight * d };
        }
        Some(total)
    }

    fn descend(&mut self, depth: usize) {
        let n = self.x.len();
        if depth == n {
            self.evaluated += 1;
            let Some(value) = self.bound(n) else {
                return;
            };
            if self.best.as_ref().is_none_or(|(_, b)| value < *b) {
                self.best = Some((self.x.clone(), value));
            }
            return;
        }
        if depth > 0 {
            match self.bound(depth) {
                None => return,
                Some(lb) if self.best.as_ref().is_some_and(|(_, b)| lb >= *b) => return,
                _ => {}
            }
        }
        for k in 0..=self.levels {
            self.x[depth] = k as f64 / self.levels as f64;
            self.descend(depth + 1);
        }
        self.x[depth] = 0.0;
    }
}
