//! Tracing interpreter: runs one test at a time and records every method
//! entered, after dynamic dispatch.

pub mod interp;
pub mod trace;

pub use interp::{run_lowered, run_test, RunConfig, TestCase, DEFAULT_STEP_BUDGET};
pub use trace::{render_record, trace_to_map_entry, InvocationRecord, Outcome, TestResult, Trace};
