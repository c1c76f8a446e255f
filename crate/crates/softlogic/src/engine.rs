//! Program loading and the ground / solve / graph pipeline shared by the CLI,
//! demos and the session service.

use softlogic_core::ground::{ground_program, GroundConfig, GroundModel, GroundingReport};
use softlogic_core::lang::{parse_program, validate_program, Program};
use softlogic_core::rag::{build_rag, RuleAtomGraph};
use softlogic_core::solve::{compile, solve_map, MapSolution, SolveError, SolverConfig};
use softlogic_core::{has_errors, AtomDatabase, Diagnostic, DiagnosticCode};

use crate::tsv::{load_atoms, TsvError};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{}", render_diagnostics(.0))]
    Program(Vec<Diagnostic>),
    #[error("{0}")]
    Atoms(#[from] TsvError),
    #[error("{0}")]
    Store(#[from] softlogic_core::store::StoreError),
}

pub fn render_diagnostics(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")
}

/// Parses and validates a program. Warnings are returned alongside it.
pub fn load_program(text: &str) -> Result<(Program, Vec<Diagnostic>), LoadError> {
    let mut program = parse_program(text).map_err(LoadError::Program)?;
    let diags = validate_program(&program);
    if has_errors(&diags) {
        return Err(LoadError::Program(diags));
    }
    program.declare_implicit();
    Ok((program, diags))
}

/// Builds the database for `program` from atom file text. Atoms of
/// undeclared predicates produce warnings.
pub fn load_database(program: &Program, atoms: &str) -> Result<(AtomDatabase, Vec<Diagnostic>), LoadError> {
    let mut db = AtomDatabase::new();
    db.register_program(program)?;
    let loaded = load_atoms(atoms, &mut db)?;
    let warnings = loaded
        .auto_registered
        .iter()
        .map(|p| {
            Diagnostic::warning(
                DiagnosticCode::UndeclaredPredicate,
                format!("predicate `{p}` is not used by the program; registered from the atom file"),
            )
        })
        .collect();
    Ok((db, warnings))
}

/// A solved model with its graph.
#[derive(Debug, Clone)]
pub struct Inference {
    pub model: GroundModel,
    pub report: GroundingReport,
    pub solution: MapSolution,
    pub graph: RuleAtomGraph,
}

#[derive(Debug, thiserror::Error)]
pub enum InferError {
    #[error("{error}")]
    Infeasible { model: Box<GroundModel>, error: Box<SolveError> },
}

impl InferError {
    /// Ground rule ids violated by the best-effort assignment.
    pub fn violated(&self) -> &[usize] {
        let InferError::Infeasible { error, .. } = self;
        let SolveError::Infeasible { violated, .. } = error.as_ref();
        violated
    }

    pub fn model(&self) -> &GroundModel {
        let InferError::Infeasible { model, .. } = self;
        model
    }
}

pub fn ground(program: &Program, db: &AtomDatabase) -> (GroundModel, GroundingReport) {
    ground_program(program, db, &GroundConfig::default())
}

pub fn infer(program: &Program, db: &AtomDatabase, config: &SolverConfig) -> Result<Inference, InferError> {
    let (model, report) = ground(program, db);
    let problem = compile(&model, db);
    let solution = match solve_map(&problem, &model, db, config) {
        Ok(s) => s,
        Err(error) => return Err(InferError::Infeasible { model: Box::new(model), error: Box::new(error) }),
    };
    let graph = build_rag(&model, &solution, db).expect("solution matches the model it was solved for");
    Ok(Inference { model, report, solution, graph })
}
