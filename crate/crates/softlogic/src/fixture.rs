//! Demo fixtures: a program, an atom file and expected values.
//!
//! A fixture directory holds `program.psl`, `atoms.tsv` and `metadata.txt`.
//! Metadata is `key=value` per line with `#` comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use softlogic_core::lang::Program;
use softlogic_core::{AtomDatabase, Diagnostic};

use crate::engine::{load_database, load_program, LoadError};

/// Names of the fixtures shipped with the crate.
pub const BUILTIN: &[&str] = &["weiss", "das", "holz", "marginal"];

macro_rules! embedded {
    ($name:literal) => {
        (
            include_str!(concat!("../fixtures/", $name, "/program.psl")),
            include_str!(concat!("../fixtures/", $name, "/atoms.tsv")),
            include_str!(concat!("../fixtures/", $name, "/metadata.txt")),
        )
    };
}

fn sources(name: &str) -> Option<(&'static str, &'static str, &'static str)> {
    Some(match name {
        "weiss" => embedded!("weiss"),
        "das" => embedded!("das"),
        "holz" => embedded!("holz"),
        "marginal" => embedded!("marginal"),
        _ => return None,
    })
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub program_text: String,
    pub atoms_text: String,
    pub program: Program,
    pub db: AtomDatabase,
    pub metadata: BTreeMap<String, String>,
    pub warnings: Vec<Diagnostic>,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("unknown fixture `{0}`")]
    Unknown(String),
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{file}:\n{source}")]
    Load { file: String, source: LoadError },
    #[error("{file}:{line}: expected key=value")]
    Metadata { file: String, line: usize },
}

pub fn parse_metadata(text: &str, file: &str) -> Result<BTreeMap<String, String>, FixtureError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| FixtureError::Metadata { file: file.to_string(), line: i + 1 })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn assemble(
    name: &str,
    program: &str,
    atoms: &str,
    metadata: &str,
    dir: &str,
) -> Result<Fixture, FixtureError> {
    let file = |f: &str| format!("{dir}/{f}");
    let (parsed, mut warnings) =
        load_program(program).map_err(|source| FixtureError::Load { file: file("program.psl"), source })?;
    let (db, more) = load_database(&parsed, atoms)
        .map_err(|source| FixtureError::Load { file: file("atoms.tsv"), source })?;
    warnings.extend(more);
    Ok(Fixture {
        name: name.to_string(),
        program_text: program.to_string(),
        atoms_text: atoms.to_string(),
        program: parsed,
        db,
        metadata: parse_metadata(metadata, &file("metadata.txt"))?,
        warnings,
    })
}

/// One of the fixtures compiled into the crate.
pub fn builtin(name: &str) -> Result<Fixture, FixtureError> {
    let (program, atoms, metadata) = sources(name).ok_or_else(|| FixtureError::Unknown(name.to_string()))?;
    assemble(name, program, atoms, metadata, &format!("fixtures/{name}"))
}

/// Loads a fixture directory. A missing `metadata.txt` yields empty metadata.
pub fn load_fixture(dir: &Path) -> Result<Fixture, FixtureError> {
    let read = |f: &str| {
        let path = dir.join(f);
        std::fs::read_to_string(&path).map_err(|source| FixtureError::Io { path, source })
    };
    let program = read("program.psl")?;
    let atoms = read("atoms.tsv")?;
    let metadata = match read("metadata.txt") {
        Ok(m) => m,
        Err(FixtureError::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => {
            String::new()
        }
        Err(e) => return Err(e),
    };
    let name = dir.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    assemble(&name, &program, &atoms, &metadata, &dir.display().to_string())
}

/// Path of a shipped fixture inside the source tree.
pub fn source_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

impl Fixture {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta(key).and_then(|v| v.parse().ok())
    }

    /// Metadata entries under `prefix.`, with the prefix removed.
    pub fn meta_prefixed<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.metadata.iter().filter_map(move |(k, v)| {
            k.strip_prefix(prefix).and_then(|k| k.strip_prefix('.')).map(|k| (k, v.as_str()))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_lines() {
        let m = parse_metadata("# c\na=1\n\nb.x = two words\n", "m").unwrap();
        assert_eq!(m["a"], "1");
        assert_eq!(m["b.x"], "two words");
        assert!(matches!(parse_metadata("oops", "m"), Err(FixtureError::Metadata { line: 1, .. })));
    }

    #[test]
    fn every_builtin_loads() {
        for name in BUILTIN {
            let f = builtin(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!softlogic_core::has_errors(&f.warnings), "{name}: {:?}", f.warnings);
            assert!(!f.db.is_empty());
        }
        assert!(matches!(builtin("nope"), Err(FixtureError::Unknown(_))));
    }

    #[test]
    fn embedded_copies_match_source_tree() {
        for name in BUILTIN {
            let disk = load_fixture(&source_dir(name)).unwrap();
            let embedded = builtin(name).unwrap();
            assert_eq!(disk.program_text, embedded.program_text);
            assert_eq!(disk.atoms_text, embedded.atoms_text);
            assert_eq!(disk.metadata, embedded.metadata);
        }
    }
}
