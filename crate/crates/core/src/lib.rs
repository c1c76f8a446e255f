//! Soft-logic inference core: a rule language over fuzzy truth values, a
//! closed-universe atom store, a grounder, a MAP solver, rule-atom graphs and
//! verbalized explanations.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diag;
pub mod explain;
pub mod ground;
pub mod lang;
pub mod rag;
pub mod solve;
pub mod store;

pub use diag::{has_errors, Diagnostic, DiagnosticCode, Severity, Span};
pub use store::{AtomDatabase, AtomId, AtomPattern, GroundAtom, Selection, Status};
