//! Method-level test impact analysis.
//!
//! Given two versions of a MiniJ program and a stored map from tests to the
//! methods they executed, compute the modified methods, select the tests
//! that may be affected, run them under an invocation-tracing interpreter and
//! refresh the map.

pub mod differ;
pub mod mapstore;
pub mod minilang;
pub mod mutator;
pub mod pipeline;
pub mod runtime;
