//! The rule templating language: syntax tree, parser, validator and
//! canonical formatter.

mod ast;
mod format;
mod lexer;
mod parser;
mod validate;

pub use ast::*;
pub use format::{format_rule, write_constant};
pub use parser::{parse_program, parse_rule};
pub use validate::{placeholders, validate_program};
