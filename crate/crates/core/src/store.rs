//! The atom database: a closed universe of ground atoms with beliefs and a
//! status partition (open / observed / frozen).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::lang::{write_constant, Program, Verbalization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PredicateId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomId(pub u32);

impl AtomId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A predicate applied to constants. Identity is the `(predicate, args)` pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new<P, I, S>(predicate: P, args: I) -> Self
    where
        P: Into<String>,
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        GroundAtom { predicate: predicate.into(), args: args.into_iter().map(Into::into).collect() }
    }

    /// Parses an atom id such as `Pcat('weiß','ADJ')`. Unquoted arguments are
    /// accepted as constants too.
    pub fn parse(text: &str) -> Option<GroundAtom> {
        let (predicate, args) = split_call(text)?;
        let args = args
            .into_iter()
            .map(|a| match a {
                ArgText::Quoted(s) | ArgText::Bare(s) if !s.is_empty() => Some(s),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(GroundAtom { predicate, args })
    }

    /// The first character of the predicate name, which names its layer.
    pub fn layer(&self) -> Option<char> {
        self.predicate.chars().next()
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        out.push_str(&self.predicate);
        out.push('(');
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write_constant(&mut out, a);
        }
        out.push(')');
        f.write_str(&out)
    }
}

enum ArgText {
    Quoted(String),
    Bare(String),
    Wildcard,
}

fn split_call(text: &str) -> Option<(String, Vec<ArgText>)> {
    let text = text.trim();
    let open = text.find('(')?;
    let predicate = text[..open].trim();
    if predicate.is_empty() || !text.ends_with(')') {
        return None;
    }
    let inner = &text[open + 1..text.len() - 1];
    let mut args = Vec::new();
    let mut chars = inner.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        match chars.peek() {
            Some('\'') => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next()? {
                        '\\' => s.push(chars.next()?),
                        '\'' => break,
                        c => s.push(c),
                    }
                }
                args.push(ArgText::Quoted(s));
            }
            Some(_) => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c == ',' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                let s = String::from(s.trim());
                args.push(if s == "*" || s == "_" { ArgText::Wildcard } else { ArgText::Bare(s) });
            }
            None => return None,
        }
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        match chars.next() {
            Some(',') => continue,
            None => break,
            Some(_) => return None,
        }
    }
    Some((String::from(predicate), args))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Status {
    /// A decision variable for inference.
    Open,
    /// Evidence; keeps its belief through inference.
    Observed,
    /// Temporarily pinned for debugging; treated like evidence by the solver.
    Frozen,
}

impl Status {
    pub fn is_open(self) -> bool {
        self == Status::Open
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Open => "open",
            Status::Observed => "observed",
            Status::Frozen => "frozen",
        }
    }

    pub fn parse(text: &str) -> Option<Status> {
        match text {
            "open" => Some(Status::Open),
            "observed" => Some(Status::Observed),
            "frozen" => Some(Status::Frozen),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomRecord {
    pub atom: GroundAtom,
    pub predicate: PredicateId,
    pub belief: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredicateInfo {
    pub name: String,
    pub arity: usize,
    pub verbalizations: Vec<Verbalization>,
}

/// Lookup pattern: a predicate plus a constant or wildcard per position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomPattern {
    pub predicate: String,
    pub args: Vec<Option<String>>,
}

impl AtomPattern {
    pub fn any(predicate: impl Into<String>, arity: usize) -> Self {
        AtomPattern { predicate: predicate.into(), args: alloc::vec![None; arity] }
    }

    /// Parses `Pcat('weiß',*)`. A lone `*` (`Dana(*)`) matches every arity.
    pub fn parse(text: &str) -> Option<AtomPattern> {
        let (predicate, args) = split_call(text)?;
        let args = args
            .into_iter()
            .map(|a| match a {
                ArgText::Wildcard => None,
                ArgText::Quoted(s) | ArgText::Bare(s) => Some(s),
            })
            .collect();
        Some(AtomPattern { predicate, args })
    }

    pub fn matches(&self, atom: &GroundAtom) -> bool {
        atom.predicate == self.predicate
            && (self.is_lone_wildcard()
                || (self.args.len() == atom.args.len()
                    && self.args.iter().zip(&atom.args).all(|(p, a)| p.as_ref().is_none_or(|p| p == a))))
    }

    fn is_lone_wildcard(&self) -> bool {
        self.args.len() == 1 && self.args[0].is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StoreError {
    DuplicatePredicate(String),
    InvalidArity { predicate: String, arity: usize },
    ArityMismatch { predicate: String, expected: usize, found: usize },
    BeliefOutOfRange(f64),
    UnknownAtom(String),
    EmptyConstant,
}

impl fmt::Display for StoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoreError::DuplicatePredicate(p) => write!(f, "predicate `{p}` is already registered"),
            StoreError::InvalidArity { predicate, arity } => {
                write!(f, "predicate `{predicate}` has invalid arity {arity}")
            }
            StoreError::ArityMismatch { predicate, expected, found } => {
                write!(f, "`{predicate}` expects {expected} arguments, got {found}")
            }
            StoreError::BeliefOutOfRange(b) => write!(f, "belief {b} is outside [0,1]"),
            StoreError::UnknownAtom(a) => write!(f, "unknown atom {a}"),
            StoreError::EmptyConstant => f.write_str("constants must not be empty"),
        }
    }
}

impl core::error::Error for StoreError {}

/// Which atoms a status change applies to.
#[derive(Debug, Clone)]
pub enum Selection {
    Pattern(AtomPattern),
    Atoms(Vec<GroundAtom>),
    Ids(Vec<AtomId>),
}

/// Outcome of [`AtomDatabase::commit_atom`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Committed {
    pub id: AtomId,
    /// The predicate was not registered and has been registered with the
    /// atom's arity. Callers should surface this as a warning.
    pub auto_registered: bool,
    pub created: bool,
}

#[derive(Debug, Clone, Default)]
pub struct AtomDatabase {
    predicates: Vec<PredicateInfo>,
    by_name: BTreeMap<String, PredicateId>,
    records: Vec<AtomRecord>,
    by_atom: BTreeMap<GroundAtom, AtomId>,
    by_predicate: Vec<Vec<AtomId>>,
    // [predicate][position][constant] -> atoms
    by_position: Vec<Vec<BTreeMap<String, Vec<AtomId>>>>,
}

fn check_belief(belief: f64) -> Result<(), StoreError> {
    if (0.0..=1.0).contains(&belief) {
        Ok(())
    } else {
        Err(StoreError::BeliefOutOfRange(belief))
    }
}

impl AtomDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_predicate(
        &mut self,
        name: &str,
        arity: usize,
        verbalizations: Vec<Verbalization>,
    ) -> Result<PredicateId, StoreError> {
        if self.by_name.contains_key(name) {
            return Err(StoreError::DuplicatePredicate(String::from(name)));
        }
        if arity < 1 {
            return Err(StoreError::InvalidArity { predicate: String::from(name), arity });
        }
        let id = PredicateId(self.predicates.len() as u32);
        self.predicates.push(PredicateInfo { name: String::from(name), arity, verbalizations });
        self.by_name.insert(String::from(name), id);
        self.by_predicate.push(Vec::new());
        self.by_position.push(alloc::vec![BTreeMap::new(); arity]);
        Ok(id)
    }

    /// Registers every predicate declared by `program` that is not yet known;
    /// verbalizations of already registered predicates are added.
    pub fn register_program(&mut self, program: &Program) -> Result<(), StoreError> {
        for decl in &program.predicates {
            if decl.arity == 0 {
                continue;
            }
            match self.predicate_id(&decl.name) {
                Some(id) => {
                    let info = &mut self.predicates[id.0 as usize];
                    if info.arity != decl.arity {
                        return Err(StoreError::ArityMismatch {
                            predicate: decl.name.clone(),
                            expected: info.arity,
                            found: decl.arity,
                        });
                    }
                    for v in &decl.verbalizations {
                        if !info.verbalizations.contains(v) {
                            info.verbalizations.push(v.clone());
                        }
                    }
                }
                None => {
                    self.register_predicate(&decl.name, decl.arity, decl.verbalizations.clone())?;
                }
            }
        }
        Ok(())
    }

    pub fn predicate_id(&self, name: &str) -> Option<PredicateId> {
        self.by_name.get(name).copied()
    }

    pub fn predicate(&self, id: PredicateId) -> &PredicateInfo {
        &self.predicates[id.0 as usize]
    }

    pub fn predicate_named(&self, name: &str) -> Option<&PredicateInfo> {
        self.predicate_id(name).map(|id| self.predicate(id))
    }

    pub fn predicates(&self) -> &[PredicateInfo] {
        &self.predicates
    }

    /// Stores an atom, or updates belief and status if it already exists.
    pub fn commit_atom(
        &mut self,
        atom: GroundAtom,
        belief: f64,
        status: Status,
    ) -> Result<Committed, StoreError> {
        check_belief(belief)?;
        if atom.args.iter().any(String::is_empty) {
            return Err(StoreError::EmptyConstant);
        }
        let mut auto_registered = false;
        let pred = match self.predicate_id(&atom.predicate) {
            Some(id) => {
                let expected = self.predicate(id).arity;
                if expected != atom.args.len() {
                    return Err(StoreError::ArityMismatch {
                        predicate: atom.predicate,
                        expected,
                        found: atom.args.len(),
                    });
                }
                id
            }
            None => {
                auto_registered = true;
                self.register_predicate(&atom.predicate, atom.args.len(), Vec::new())?
            }
        };
        if let Some(&id) = self.by_atom.get(&atom) {
            let rec = &mut self.records[id.index()];
            rec.belief = belief;
            rec.status = status;
            return Ok(Committed { id, auto_registered, created: false });
        }
        let id = AtomId(self.records.len() as u32);
        for (pos, arg) in atom.args.iter().enumerate() {
            self.by_position[pred.0 as usize][pos].entry(arg.clone()).or_default().push(id);
        }
        self.by_predicate[pred.0 as usize].push(id);
        self.by_atom.insert(atom.clone(), id);
        self.records.push(AtomRecord { atom, predicate: pred, belief, status });
        Ok(Committed { id, auto_registered, created: true })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, id: AtomId) -> &AtomRecord {
        &self.records[id.index()]
    }

    pub fn records(&self) -> &[AtomRecord] {
        &self.records
    }

    pub fn ids(&self) -> impl Iterator<Item = AtomId> {
        (0..self.records.len() as u32).map(AtomId)
    }

    pub fn find(&self, atom: &GroundAtom) -> Option<AtomId> {
        self.by_atom.get(atom).copied()
    }

    pub fn belief(&self, id: AtomId) -> f64 {
        self.records[id.index()].belief
    }

    pub fn status(&self, id: AtomId) -> Status {
        self.records[id.index()].status
    }

    /// Overwrites beliefs of open atoms; `beliefs` is indexed by atom id.
    pub fn set_open_beliefs(&mut self, beliefs: &[f64]) {
        for (rec, &b) in self.records.iter_mut().zip(beliefs) {
            if rec.status.is_open() {
                rec.belief = b;
            }
        }
    }

    /// Changes the status of the selected atoms, optionally pinning their
    /// belief. Returns the number of atoms selected.
    pub fn set_status(
        &mut self,
        selection: &Selection,
        status: Status,
        pinned: Option<f64>,
    ) -> Result<usize, StoreError> {
        if let Some(b) = pinned {
            check_belief(b)?;
        }
        let ids: Vec<AtomId> = match selection {
            Selection::Pattern(p) => self.query_atoms(p),
            Selection::Atoms(atoms) => atoms
                .iter()
                .map(|a| self.find(a).ok_or_else(|| StoreError::UnknownAtom(alloc::format!("{a}"))))
                .collect::<Result<_, _>>()?,
            Selection::Ids(ids) => {
                if let Some(bad) = ids.iter().find(|id| id.index() >= self.records.len()) {
                    return Err(StoreError::UnknownAtom(alloc::format!("#{}", bad.0)));
                }
                ids.clone()
            }
        };
        for id in &ids {
            let rec = &mut self.records[id.index()];
            rec.status = status;
            if let Some(b) = pinned {
                rec.belief = b;
            }
        }
        Ok(ids.len())
    }

    /// All records matching `pattern`, ordered by argument tuple.
    pub fn query_atoms(&self, pattern: &AtomPattern) -> Vec<AtomId> {
        let Some(pred) = self.predicate_id(&pattern.predicate) else {
            return Vec::new();
        };
        let p = pred.0 as usize;
        let arity = self.predicates[p].arity;
        let lone = pattern.args.len() == 1 && pattern.args[0].is_none();
        if !lone && pattern.args.len() != arity {
            return Vec::new();
        }
        let bound: Vec<(usize, &str)> = if lone {
            Vec::new()
        } else {
            pattern.args.iter().enumerate().filter_map(|(i, a)| a.as_deref().map(|a| (i, a))).collect()
        };
        let mut out: Vec<AtomId> = match self.most_selective(pred, &bound) {
            Some(list) => list
                .iter()
                .copied()
                .filter(|id| {
                    let args = &self.records[id.index()].atom.args;
                    bound.iter().all(|&(i, c)| args[i] == c)
                })
                .collect(),
            None => self.by_predicate[p].clone(),
        };
        out.sort_by(|a, b| self.records[a.index()].atom.args.cmp(&self.records[b.index()].atom.args));
        out
    }

    /// Smallest posting list among the bound positions; `None` when no
    /// position is bound.
    pub(crate) fn most_selective(&self, pred: PredicateId, bound: &[(usize, &str)]) -> Option<&[AtomId]> {
        const EMPTY: &[AtomId] = &[];
        let lists = &self.by_position[pred.0 as usize];
        bound.iter().map(|&(i, c)| lists[i].get(c).map_or(EMPTY, Vec::as_slice)).min_by_key(|l| l.len())
    }

    pub(crate) fn atoms_of(&self, pred: PredicateId) -> &[AtomId] {
        &self.by_predicate[pred.0 as usize]
    }

    /// A copy holding only the records accepted by `keep`. Predicates are
    /// kept; atom ids are renumbered.
    pub fn filtered(&self, mut keep: impl FnMut(&AtomRecord) -> bool) -> AtomDatabase {
        let mut db = AtomDatabase::new();
        for p in &self.predicates {
            db.register_predicate(&p.name, p.arity, p.verbalizations.clone()).expect("predicates are unique");
        }
        for rec in self.records.iter().filter(|r| keep(r)) {
            db.commit_atom(rec.atom.clone(), rec.belief, rec.status).expect("records are valid");
        }
        db
    }
}
