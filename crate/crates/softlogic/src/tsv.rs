//! Tab-separated atom files.
//!
//! One record per line: `predicate<TAB>arg1|arg2|...<TAB>belief<TAB>status`.
//! Arguments escape `|`, `\`, tabs and newlines with a backslash. Blank lines
//! and lines starting with `#` are skipped.

use std::fmt::Write;

use softlogic_core::store::StoreError;
use softlogic_core::{AtomDatabase, GroundAtom, Status};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TsvError {
    #[error("line {line}: expected 4 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: invalid belief `{text}`")]
    Belief { line: usize, text: String },
    #[error("line {line}: unknown status `{text}` (expected open, observed or frozen)")]
    Status { line: usize, text: String },
    #[error("line {line}: invalid escape in `{text}`")]
    Escape { line: usize, text: String },
    #[error("line {line}: {source}")]
    Store { line: usize, source: StoreError },
}

impl TsvError {
    pub fn line(&self) -> usize {
        match self {
            TsvError::FieldCount { line, .. }
            | TsvError::Belief { line, .. }
            | TsvError::Status { line, .. }
            | TsvError::Escape { line, .. }
            | TsvError::Store { line, .. } => *line,
        }
    }
}

/// Result of loading atoms into a database.
#[derive(Debug, Default, PartialEq)]
pub struct Loaded {
    pub records: usize,
    /// Predicates registered on first use because no declaration existed.
    pub auto_registered: Vec<String>,
}

fn split_args(field: &str) -> Option<Vec<String>> {
    let mut args = vec![String::new()];
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                let e = match chars.next()? {
                    '|' => '|',
                    '\\' => '\\',
                    't' => '\t',
                    'n' => '\n',
                    _ => return None,
                };
                args.last_mut().unwrap().push(e);
            }
            '|' => args.push(String::new()),
            c => args.last_mut().unwrap().push(c),
        }
    }
    Some(args)
}

fn escape_arg(out: &mut String, arg: &str) {
    for c in arg.chars() {
        match c {
            '|' => out.push_str("\\|"),
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
}

/// Belief text with at most 6 fraction digits and no trailing zeros.
pub fn format_belief(belief: f64) -> String {
    let mut s = format!("{belief:.6}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Commits every record of `text` into `db`, stopping at the first error.
pub fn load_atoms(text: &str, db: &mut AtomDatabase) -> Result<Loaded, TsvError> {
    let mut loaded = Loaded::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        let [predicate, args, belief, status] = fields[..] else {
            return Err(TsvError::FieldCount { line, found: fields.len() });
        };
        let args = split_args(args).ok_or_else(|| TsvError::Escape { line, text: args.into() })?;
        let belief: f64 =
            belief.trim().parse().map_err(|_| TsvError::Belief { line, text: belief.into() })?;
        let status =
            Status::parse(status.trim()).ok_or_else(|| TsvError::Status { line, text: status.into() })?;
        let committed = db
            .commit_atom(GroundAtom::new(predicate.trim(), args), belief, status)
            .map_err(|source| TsvError::Store { line, source })?;
        if committed.auto_registered {
            loaded.auto_registered.push(predicate.trim().to_string());
        }
        loaded.records += 1;
    }
    Ok(loaded)
}

/// Parses a standalone atom file into a fresh database.
pub fn read_atoms(text: &str) -> Result<AtomDatabase, TsvError> {
    let mut db = AtomDatabase::new();
    load_atoms(text, &mut db)?;
    Ok(db)
}

/// Writes every record of `db`, in atom id order. `beliefs` overrides the
/// stored beliefs when given, e.g. with a solution.
pub fn write_atoms(db: &AtomDatabase, beliefs: Option<&[f64]>) -> String {
    let mut out = String::new();
    for (i, rec) in db.records().iter().enumerate() {
        out.push_str(&rec.atom.predicate);
        out.push('\t');
        for (j, arg) in rec.atom.args.iter().enumerate() {
            if j > 0 {
                out.push('|');
            }
            escape_arg(&mut out, arg);
        }
        let belief = beliefs.map_or(rec.belief, |b| b[i]);
        let _ = writeln!(out, "\t{}\t{}", format_belief(belief), rec.status.as_str());
    }
    out
}
