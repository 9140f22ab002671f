//! A small STRIPS dialect: typed predicates, action schemas with
//! (possibly negated) precondition conjunctions and add/delete lists.
//!
//! Domains and instances are written in a line-oriented text format (see
//! `docs/domain-format.md`). Parsing is total: every input produces either a
//! validated value or a [`Diagnostic`] carrying a 1-based line and column.

mod bundle;
mod lex;
mod model;
mod parse;
mod state;

pub use bundle::{parse_plan, BundleError, DomainBundle};
pub use model::{ActionSchema, Atom, DomainDefinition, Literal, Object, Param, Predicate, TypeDecl};
pub use parse::{parse_domain, parse_instance, Instance};
pub use state::{GroundAction, GroundError, StateError, WorldState};

use std::fmt;

/// A parse or validation failure located in source text.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {message}")]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl Diagnostic {
    pub(crate) fn new(line: usize, column: usize, message: impl fmt::Display) -> Self {
        Diagnostic { line, column, message: message.to_string() }
    }
}
