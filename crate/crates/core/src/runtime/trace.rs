use std::collections::BTreeSet;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::minilang::types::{join_types, MethodId, TypeName};

/// One method entry observed while a test ran.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvocationRecord {
    /// The method actually entered, after dynamic dispatch.
    pub target: MethodId,
    /// Runtime type of each argument; `None` for `null`.
    pub arg_types: Vec<Option<TypeName>>,
    pub ret: Option<TypeName>,
}

impl InvocationRecord {
    /// `Class.method(T1,T2)Ret` with declared parameter types and `V` for void.
    pub fn render(&self) -> String {
        let ret = self.ret.as_ref().map_or("V", TypeName::as_str);
        format!("{}.{}({}){}", self.target.class, self.target.name, join_types(&self.target.params), ret)
    }
}

pub fn render_record(r: &InvocationRecord) -> String {
    r.render()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub test: String,
    pub records: Vec<InvocationRecord>,
}

impl Trace {
    /// Distinct methods the test entered.
    pub fn method_set(&self) -> BTreeSet<MethodId> {
        self.records.iter().map(|r| r.target.clone()).collect()
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.render());
            out.push('\n');
        }
        out
    }

    /// Writes `<dir>/<test>.trace`, one record per line in invocation order.
    pub fn write_to_dir(&self, dir: &Path) -> io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.trace", self.test));
        std::fs::write(&path, self.dump())?;
        Ok(path)
    }
}

pub fn trace_to_map_entry(trace: &Trace) -> BTreeSet<MethodId> {
    trace.method_set()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Pass,
    Fail,
    Error,
    Timeout,
}

impl Outcome {
    pub fn is_pass(self) -> bool {
        self == Outcome::Pass
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "Pass",
            Outcome::Fail => "Fail",
            Outcome::Error => "Error",
            Outcome::Timeout => "Timeout",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "Pass" => Outcome::Pass,
            "Fail" => Outcome::Fail,
            "Error" => Outcome::Error,
            "Timeout" => Outcome::Timeout,
            other => return Err(format!("unknown outcome `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestResult {
    pub test: String,
    pub outcome: Outcome,
    pub trace: Trace,
    pub steps_used: u64,
    /// Why the test did not pass, if it did not.
    pub message: Option<String>,
    /// Lines written by `print`.
    pub output: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::types::parse_record_line;

    fn rec(target: MethodId) -> InvocationRecord {
        let ret = target.ret.clone();
        InvocationRecord { target, arg_types: vec![], ret }
    }

    #[test]
    fn record_rendering() {
        let bar = MethodId::method("A", "bar", vec![TypeName::Object], None);
        assert_eq!(render_record(&rec(bar.clone())), "A.bar(Object)V");
        assert_eq!(parse_record_line(&render_record(&rec(bar.clone()))).unwrap(), bar);
        assert_eq!(render_record(&rec(MethodId::ctor("B", vec![]))), "B.B()V");
        assert_eq!(render_record(&rec(MethodId::method("A", "foo", vec![], None))), "A.foo()V");
        let add = MethodId::method("C", "add", vec![TypeName::Int, TypeName::Int], Some(TypeName::Int));
        assert_eq!(render_record(&rec(add)), "C.add(Int,Int)Int");
    }

    #[test]
    fn map_entry_deduplicates() {
        let a = MethodId::ctor("A", vec![]);
        let foo = MethodId::method("A", "foo", vec![], None);
        let trace = Trace { test: "T".into(), records: vec![rec(a.clone()), rec(foo.clone()), rec(foo.clone())] };
        assert_eq!(trace_to_map_entry(&trace), BTreeSet::from([a, foo]));
        assert!(trace_to_map_entry(&Trace::default()).is_empty());
    }

    #[test]
    fn dump_lists_records_in_order() {
        let trace = Trace {
            test: "T2".into(),
            records: vec![rec(MethodId::ctor("B", vec![])), rec(MethodId::ctor("A", vec![]))],
        };
        assert_eq!(trace.dump(), "B.B()V\nA.A()V\n");
        let dir = tempfile::tempdir().unwrap();
        let path = trace.write_to_dir(dir.path()).unwrap();
        assert!(path.ends_with("T2.trace"));
        assert_eq!(std::fs::read_to_string(path).unwrap(), "B.B()V\nA.A()V\n");
    }
}
