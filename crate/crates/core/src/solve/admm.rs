//! Consensus ADMM with closed-form local steps.
//!
//! Every potential and constraint keeps a local copy of its variables; the
//! consensus step averages the copies and clips to the unit box. Hard
//! constraints are first made feasible by alternating projections and are
//! re-imposed exactly at the end by a Dykstra projection.

use alloc::vec;
use alloc::vec::Vec;

use super::{
    objective_value, solution_from, Constraint, LinearForm, MapProblem, MapSolution, Shape, SolveError,
};
use crate::ground::GroundModel;
use crate::store::AtomDatabase;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Convergence threshold on residuals and on the objective change over a
    /// 50-iteration window.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Accepted for interface stability; the algorithm is deterministic.
    pub seed: u64,
    /// Initial ADMM step parameter.
    pub rho: f64,
    /// Start from the stored beliefs instead of zero.
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tolerance: 1e-6, max_iterations: 10_000, seed: 0, rho: 1.0, warm_start: true }
    }
}

/// Constraint violation above which a problem counts as infeasible.
const FEASIBILITY_TOLERANCE: f64 = 1e-6;
const WINDOW: usize = 50;

enum Role {
    Penalty { weight: f64, exponent: u32 },
    Hard,
}

struct Block {
    vars: Vec<usize>,
    coeffs: Vec<f64>,
    constant: f64,
    norm2: f64,
    shape: Shape,
    role: Role,
    offset: usize,
}

impl Block {
    fn new(form: &LinearForm, shape: Shape, role: Role, offset: usize) -> Self {
        Block {
            vars: form.coefficients.iter().map(|&(i, _)| i).collect(),
            coeffs: form.coefficients.iter().map(|&(_, c)| c).collect(),
            constant: form.constant,
            norm2: form.squared_norm(),
            shape,
            role,
            offset,
        }
    }

    /// argmin_y f(y) + rho/2 |y - v|^2, written into `y` (which holds `v`).
    fn prox(&self, y: &mut [f64], rho: f64) {
        if self.norm2 == 0.0 {
            return;
        }
        let h0 = self.constant + self.coeffs.iter().zip(y.iter()).map(|(a, v)| a * v).sum::<f64>();
        let t = match (&self.role, self.shape) {
            (Role::Hard, Shape::Hinge) if h0 <= 0.0 => return,
            (Role::Hard, _) => h0 / self.norm2,
            (Role::Penalty { .. }, Shape::Hinge) if h0 <= 0.0 => return,
            (Role::Penalty { weight, exponent: 2 }, _) => {
                2.0 * weight * h0 / (rho + 2.0 * weight * self.norm2)
            }
            (Role::Penalty { weight, .. }, Shape::Hinge) => (weight / rho).min(h0 / self.norm2),
            (Role::Penalty { weight, .. }, Shape::Abs) => {
                let full = weight / rho;
                if h0.abs() > full * self.norm2 {
                    full.copysign(h0)
                } else {
                    h0 / self.norm2
                }
            }
        };
        for (yi, a) in y.iter_mut().zip(&self.coeffs) {
            *yi -= t * a;
        }
    }
}

fn project(c: &Constraint, x: &mut [f64], norm2: f64) {
    if norm2 == 0.0 {
        return;
    }
    let h = c.form.eval(x);
    if c.shape == Shape::Hinge && h <= 0.0 {
        return;
    }
    let t = h / norm2;
    for &(i, a) in &c.form.coefficients {
        x[i] -= t * a;
    }
}

fn clip(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Cyclic projections onto the constraints and the box until the violation
/// drops below `target` or the sweep budget runs out.
fn alternating_projections(problem: &MapProblem, x: &mut [f64], norms: &[f64], sweeps: usize, target: f64) {
    clip(x);
    for _ in 0..sweeps {
        if problem.max_violation(x) <= target {
            return;
        }
        for (c, &n) in problem.constraints.iter().zip(norms) {
            project(c, x, n);
        }
        clip(x);
    }
}

/// Simultaneous projections, averaged per variable. On an infeasible system
/// this settles at a compromise that spreads the violation over every
/// conflicting constraint instead of leaving it all on one.
fn averaged_projections(problem: &MapProblem, x: &mut [f64], norms: &[f64], sweeps: usize) {
    let n = x.len();
    let mut count = vec![0usize; n];
    for (c, &norm) in problem.constraints.iter().zip(norms) {
        if norm > 0.0 {
            for &(i, _) in &c.form.coefficients {
                count[i] += 1;
            }
        }
    }
    for _ in 0..sweeps {
        let mut step = vec![0.0; n];
        for (c, &norm) in problem.constraints.iter().zip(norms) {
            let mut p = x.to_vec();
            project(c, &mut p, norm);
            for &(i, _) in &c.form.coefficients {
                step[i] += p[i] - x[i];
            }
        }
        let mut moved: f64 = 0.0;
        for i in 0..n {
            if count[i] > 0 {
                let v = (x[i] + step[i] / count[i] as f64).clamp(0.0, 1.0);
                moved = moved.max((v - x[i]).abs());
                x[i] = v;
            }
        }
        if moved <= 1e-12 {
            return;
        }
    }
}

/// Euclidean projection of `x` onto the intersection of the constraints and
/// the box, by Dykstra's algorithm.
fn dykstra(problem: &MapProblem, x: &mut [f64], norms: &[f64], sweeps: usize) {
    let m = problem.constraints.len();
    if m == 0 {
        clip(x);
        return;
    }
    let n = x.len();
    let mut increments: Vec<Vec<(usize, f64)>> = problem
        .constraints
        .iter()
        .map(|c| c.form.coefficients.iter().map(|&(i, _)| (i, 0.0)).collect())
        .collect();
    let mut box_inc = vec![0.0; n];
    for _ in 0..sweeps {
        let before: Vec<f64> = x.to_vec();
        for (k, c) in problem.constraints.iter().enumerate() {
            for &(i, p) in &increments[k] {
                x[i] += p;
            }
            let snapshot: Vec<f64> = increments[k].iter().map(|&(i, _)| x[i]).collect();
            project(c, x, norms[k]);
            for ((i, p), s) in increments[k].iter_mut().zip(snapshot) {
                *p = s - x[*i];
            }
        }
        for i in 0..n {
            let v = x[i] + box_inc[i];
            x[i] = v.clamp(0.0, 1.0);
            box_inc[i] = v - x[i];
        }
        let moved = x.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved <= 1e-13 && problem.max_violation(x) <= 1e-10 {
            break;
        }
    }
}

/// Minimizes the weighted penalties subject to the hard constraints and the
/// unit box. Non-open atoms keep their stored beliefs bit for bit.
pub fn solve_map(
    problem: &MapProblem,
    model: &GroundModel,
    db: &AtomDatabase,
    config: &SolverConfig,
) -> Result<MapSolution, SolveError> {
    let n = problem.variables.len();
    let norms: Vec<f64> = problem.constraints.iter().map(|c| c.form.squared_norm()).collect();
    let mut z: Vec<f64> = if config.warm_start { problem.initial.clone() } else { vec![0.0; n] };

    alternating_projections(problem, &mut z, &norms, 20_000, 1e-10);
    if problem.max_violation(&z) > FEASIBILITY_TOLERANCE {
        return Err(infeasible(problem, model, db, &z, 0));
    }

    let mut blocks: Vec<Block> = Vec::new();
    let mut offset = 0;
    for p in &problem.potentials {
        let b =
            Block::new(&p.form, p.shape, Role::Penalty { weight: p.weight, exponent: p.exponent }, offset);
        offset += b.vars.len();
        blocks.push(b);
    }
    for c in &problem.constraints {
        let b = Block::new(&c.form, c.shape, Role::Hard, offset);
        offset += b.vars.len();
        blocks.push(b);
    }
    let copies = offset;
    let mut count = vec![0usize; n];
    for b in &blocks {
        for &i in &b.vars {
            count[i] += 1;
        }
    }

    let mut y = vec![0.0; copies];
    let mut u = vec![0.0; copies];
    let mut rho = config.rho;
    let mut iterations = 0;
    let mut converged = copies == 0;
    let mut window_objective = objective_value(problem, &z);
    let scale = libm::sqrt(copies.max(1) as f64);

    while !converged && iterations < config.max_iterations {
        iterations += 1;
        for b in &blocks {
            let ys = &mut y[b.offset..b.offset + b.vars.len()];
            for (j, &i) in b.vars.iter().enumerate() {
                ys[j] = z[i] - u[b.offset + j];
            }
            b.prox(ys, rho);
        }

        let z_old = z.clone();
        let mut sum = vec![0.0; n];
        for b in &blocks {
            for (j, &i) in b.vars.iter().enumerate() {
                sum[i] += y[b.offset + j] + u[b.offset + j];
            }
        }
        for i in 0..n {
            if count[i] > 0 {
                z[i] = (sum[i] / count[i] as f64).clamp(0.0, 1.0);
            }
        }

        let mut primal = 0.0;
        let mut dual = 0.0;
        for b in &blocks {
            for (j, &i) in b.vars.iter().enumerate() {
                let k = b.offset + j;
                let r = y[k] - z[i];
                u[k] += r;
                primal += r * r;
                let s = z[i] - z_old[i];
                dual += s * s;
            }
        }
        let primal = libm::sqrt(primal) / scale;
        let dual = rho * libm::sqrt(dual) / scale;

        if primal <= config.tolerance && dual <= config.tolerance {
            converged = true;
        } else if iterations % WINDOW == 0 {
            let obj = objective_value(problem, &z);
            let stalled = (obj - window_objective).abs() <= config.tolerance * obj.abs().max(1.0);
            let loose = libm::sqrt(config.tolerance) * 1e-2;
            if stalled && primal <= loose && dual <= loose {
                converged = true;
            }
            window_objective = obj;
        }

        if iterations % 10 == 0 {
            let factor = if primal > 10.0 * dual && rho < 1e4 {
                2.0
            } else if dual > 10.0 * primal && rho > 1e-4 {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                for v in &mut u {
                    *v /= factor;
                }
            }
        }
    }

    dykstra(problem, &mut z, &norms, 20_000);
    if problem.max_violation(&z) > 1e-4 {
        return Err(infeasible(problem, model, db, &z, iterations));
    }
    Ok(solution_from(problem, model, db, &z, iterations, converged))
}

fn infeasible(
    problem: &MapProblem,
    model: &GroundModel,
    db: &AtomDatabase,
    start: &[f64],
    iterations: usize,
) -> SolveError {
    let norms: Vec<f64> = problem.constraints.iter().map(|c| c.form.squared_norm()).collect();
    let mut x = start.to_vec();
    averaged_projections(problem, &mut x, &norms, 10_000);
    let x = &x[..];
    let violated = problem
        .constraints
        .iter()
        .filter(|c| c.violation(x) > FEASIBILITY_TOLERANCE)
        .map(|c| c.origin)
        .collect();
    SolveError::Infeasible { violated, best_effort: solution_from(problem, model, db, x, iterations, false) }
}
