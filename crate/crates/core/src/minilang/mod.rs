//! MiniJ: a small statically typed object-oriented language with single
//! inheritance, overloading and overriding. Parsing, pretty-printing,
//! canonical body tokens, hierarchy analysis and static checking live here.

pub mod ast;
pub mod check;
pub mod error;
pub mod hierarchy;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod types;

pub use ast::{ClassDecl, MethodDecl, SourceUnit, TestDecl};
pub use check::{check_program, CheckedProgram, LoweredTest};
pub use error::{HierarchyError, ParseError, ProgramError, ResolveError, StaticCheckError, SyntaxError};
pub use hierarchy::{build_hierarchy, ClassHierarchy};
pub use parser::parse;
pub use printer::{canonical_body, print_unit};
pub use types::{MethodId, StaticType, TypeName};
