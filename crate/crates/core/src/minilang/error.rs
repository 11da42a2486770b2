use std::fmt;

use thiserror::Error;

use super::lexer::Pos;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct SyntaxError {
    pub pos: Pos,
    pub expected: String,
    pub found: Option<String>,
}

impl SyntaxError {
    pub(crate) fn new(pos: Pos, expected: impl Into<String>) -> Self {
        SyntaxError { pos, expected: expected.into(), found: None }
    }

    pub(crate) fn found(mut self, found: impl Into<String>) -> Self {
        self.found = Some(found.into());
        self
    }
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at {}: expected {}", self.pos, self.expected)?;
        if let Some(found) = &self.found {
            write!(f, ", found {found}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("declaration error at {pos}: {message}")]
pub struct DeclarationError {
    pub pos: Pos,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{path}: {source}")]
    Syntax { path: String, source: SyntaxError },
    #[error("{path}: {source}")]
    Declaration { path: String, source: DeclarationError },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HierarchyError {
    #[error("inheritance cycle through {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("class {class} extends unknown class {superclass}")]
    UnknownSuperclass { class: String, superclass: String },
    #[error("class {class} declared in both {first} and {second}")]
    DuplicateClass { class: String, first: String, second: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("no applicable method {name} on {receiver}")]
    NoApplicableMethod { receiver: String, name: String },
    #[error("call to {name} on {receiver} is ambiguous between {}", .candidates.join(" and "))]
    AmbiguousCall { receiver: String, name: String, candidates: Vec<String> },
}

/// A type or binding error found before execution.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("static check error at {pos}: {message}")]
pub struct StaticCheckError {
    pub pos: Pos,
    pub message: String,
}

impl StaticCheckError {
    pub(crate) fn new(pos: Pos, message: impl Into<String>) -> Self {
        StaticCheckError { pos, message: message.into() }
    }
}

/// Any failure that prevents a program version from being analyzed or run.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Check(#[from] StaticCheckError),
}
