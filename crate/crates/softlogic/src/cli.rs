//! Command-line front end. Data goes to stdout, diagnostics to stderr.
//!
//! Exit codes: 0 on success, 1 on diagnostics, infeasibility or I/O
//! failure, 2 on usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use softlogic_core::explain::{explain_atom, QualifierConfig};
use softlogic_core::lang::Program;
use softlogic_core::rag::{export_dot, export_json, DotStyle};
use softlogic_core::solve::SolverConfig;
use softlogic_core::{has_errors, AtomDatabase, Diagnostic, GroundAtom};

use crate::demo::{ablate, render_explanation, render_report, run_demo};
use crate::engine::{ground, infer, load_database, load_program, InferError, Inference, LoadError};
use crate::fixture::{builtin, load_fixture, FixtureError};
use crate::server::{serve, ServiceConfig};
use crate::tsv::write_atoms;

#[derive(Debug, Parser)]
#[command(name = "softlogic", version, about = "Soft-logic grounding, inference and explanation")]
pub struct Cli {
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Accepted for reproducibility records; the solver is deterministic.
    #[arg(long, global = true, env = "SOFTLOGIC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, env = "SOFTLOGIC_TOLERANCE", default_value_t = 1e-6)]
    pub tolerance: f64,
    #[arg(long = "max-iters", global = true, env = "SOFTLOGIC_MAX_ITERS", default_value_t = 10_000)]
    pub max_iters: usize,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            tolerance: self.tolerance,
            max_iterations: self.max_iters,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct Inputs {
    pub program: PathBuf,
    pub atoms: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a program.
    Validate { program: PathBuf },
    /// Ground a program against an atom file.
    Ground {
        #[command(flatten)]
        inputs: Inputs,
        /// Print every ground rule.
        #[arg(long)]
        dump: bool,
    },
    /// Solve for MAP beliefs and print them as an atom file.
    Infer {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the rule-atom graph of the solved model.
    #[command(group = clap::ArgGroup::new("format").required(true))]
    Rag {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, group = "format")]
        dot: Option<PathBuf>,
        #[arg(long, group = "format")]
        json: Option<PathBuf>,
    },
    /// Explain the solved belief of one atom.
    Explain {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        atom: String,
    },
    /// Run a shipped fixture (or a fixture directory) end to end.
    Demo { fixture: String },
    /// Start the HTTP session service.
    Serve {
        #[arg(long, env = "SOFTLOGIC_BIND", default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Idle minutes before a session is dropped.
        #[arg(long, env = "SOFTLOGIC_SESSION_TIMEOUT", default_value_t = 30)]
        session_timeout: u64,
    },
}

struct Failure(String);

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure(e.to_string())
    }
}

impl From<FixtureError> for Failure {
    fn from(e: FixtureError) -> Self {
        Failure(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(e.to_string())
    }
}

impl From<InferError> for Failure {
    fn from(e: InferError) -> Self {
        let mut msg = e.to_string();
        for &r in e.violated() {
            msg.push_str(&format!("\n  violated r{r}: {}", e.model().rules[r].text));
        }
        Failure(msg)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure(format!("cannot write {}: {e}", path.display())))
}

fn print_warnings(err: &mut dyn Write, diags: &[Diagnostic]) {
    for d in diags {
        let _ = writeln!(err, "{d}");
    }
}

fn load(inputs: &Inputs, err: &mut dyn Write) -> Result<(Program, AtomDatabase), Failure> {
    let (program, mut warnings) = load_program(&read(&inputs.program)?)?;
    let (db, more) = load_database(&program, &read(&inputs.atoms)?)?;
    warnings.extend(more);
    print_warnings(err, &warnings);
    Ok((program, db))
}

fn solve(
    inputs: &Inputs,
    solver: &SolverArgs,
    err: &mut dyn Write,
) -> Result<(Program, AtomDatabase, Inference), Failure> {
    let (program, db) = load(inputs, err)?;
    let inference = infer(&program, &db, &solver.config())?;
    let s = &inference.solution;
    if !s.converged {
        let _ = writeln!(err, "warning: solver stopped after {} iterations without converging", s.iterations);
    }
    Ok((program, db, inference))
}

fn load_demo(name: &str) -> Result<crate::fixture::Fixture, Failure> {
    match builtin(name) {
        Err(FixtureError::Unknown(_)) if Path::new(name).is_dir() => Ok(load_fixture(Path::new(name))?),
        other => Ok(other?),
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { program } => {
            let text = read(&program)?;
            let diags = match load_program(&text) {
                Ok((_, warnings)) => warnings,
                Err(LoadError::Program(diags)) => diags,
                Err(e) => return Err(e.into()),
            };
            print_warnings(err, &diags);
            if has_errors(&diags) {
                return Err(Failure(format!("{}: invalid program", program.display())));
            }
            let _ = writeln!(out, "{}: ok", program.display());
        }
        Command::Ground { inputs, dump } => {
            let (program, db) = load(&inputs, err)?;
            let (model, report) = ground(&program, &db);
            print_warnings(err, &report.warnings);
            if dump {
                let _ = write!(out, "{}", model.dump());
            } else {
                for (i, n) in report.counts.iter().enumerate() {
                    let _ = writeln!(out, "rule {i}: {n} groundings");
                }
                let _ = writeln!(
                    out,
                    "total: {} ({} logical, {} arithmetic)",
                    model.rules.len(),
                    model.logical().count(),
                    model.arithmetic().count()
                );
            }
        }
        Command::Infer { inputs, out: path } => {
            let (_, db, inference) = solve(&inputs, &cli.solver, err)?;
            let s = &inference.solution;
            let _ = writeln!(err, "objective {:.6} after {} iterations", s.objective, s.iterations);
            let text = write_atoms(&db, Some(&s.beliefs));
            match path {
                Some(p) => write_file(&p, &text)?,
                None => {
                    let _ = write!(out, "{text}");
                }
            }
        }
        Command::Rag { inputs, dot, json } => {
            let (_, _, inference) = solve(&inputs, &cli.solver, err)?;
            if let Some(p) = dot {
                write_file(&p, &export_dot(&inference.graph, &DotStyle::default()))?;
            }
            if let Some(p) = json {
                write_file(&p, &export_json(&inference.graph))?;
            }
        }
        Command::Explain { inputs, atom } => {
            let ground_atom =
                GroundAtom::parse(&atom).ok_or_else(|| Failure(format!("malformed atom `{atom}`")))?;
            let (program, db, inference) = solve(&inputs, &cli.solver, err)?;
            let id = db
                .find(&ground_atom)
                .ok_or_else(|| Failure(format!("{ground_atom} is not in the atom file")))?;
            let e = explain_atom(
                id,
                &inference.graph,
                &inference.model,
                &program,
                &db,
                &QualifierConfig::default(),
            )
            .map_err(|e| Failure(e.to_string()))?;
            let _ = write!(out, "{}", render_explanation(&e));
        }
        Command::Demo { fixture } => {
            let f = load_demo(&fixture)?;
            print_warnings(err, &f.warnings);
            let report = run_demo(&f, &cli.solver.config())?;
            let _ = write!(out, "{}", render_report(&report));
            if f.meta("ablation.remove").is_some() {
                let ablated = ablate(&f);
                let r = run_demo(&ablated, &cli.solver.config())?;
                let _ = writeln!(out, "\nwithout {}:", f.meta("ablation.remove").unwrap_or_default());
                for (i, c) in r.ranking.iter().enumerate() {
                    let _ = writeln!(out, "  {}. {} {:.4}", i + 1, c.ground, c.belief);
                }
            }
        }
        Command::Serve { bind, session_timeout } => {
            let config = ServiceConfig {
                solver: cli.solver.config(),
                idle_timeout: Duration::from_secs(session_timeout * 60),
                ..ServiceConfig::default()
            };
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve(bind, config, |addr| eprintln!("listening on http://{addr}")))?;
        }
    }
    Ok(())
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run(
    args: impl IntoIterator<Item = impl Into<OsString> + Clone>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}
