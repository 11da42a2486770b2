//! The persistent test→method map and test selection.
//!
//! File format (`tia.map`, UTF-8, `\n` line endings):
//!
//! ```text
//! TIA-MAP v1
//! TEST <name> <digest-hex|-> <Pass|Fail|Error|Timeout|Never>
//!   <method>
//!   <method>
//! ```
//!
//! Entries are written sorted by test name and methods sorted by their
//! rendering, so saving the same map always produces the same bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::differ::ChangeSet;
use crate::minilang::MethodId;
use crate::runtime::{trace_to_map_entry, Outcome, TestCase, TestResult};

pub const FORMAT_VERSION: u32 = 1;
const HEADER_PREFIX: &str = "TIA-MAP v";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestMapEntry {
    pub test_name: String,
    pub methods: BTreeSet<MethodId>,
    /// Digest of the test body when `methods` was recorded.
    pub source_digest: Option<String>,
    /// `None` if the test never ran.
    pub last_outcome: Option<Outcome>,
}

impl TestMapEntry {
    pub fn never_run(test_name: &str) -> Self {
        TestMapEntry { test_name: test_name.into(), methods: BTreeSet::new(), source_digest: None, last_outcome: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestMap {
    pub entries: BTreeMap<String, TestMapEntry>,
    pub format_version: u32,
}

impl Default for TestMap {
    fn default() -> Self {
        TestMap { entries: BTreeMap::new(), format_version: FORMAT_VERSION }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("map line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unsupported map format version `{found}` (expected {FORMAT_VERSION})")]
    Version { found: String },
}

fn outcome_str(o: Option<Outcome>) -> &'static str {
    o.map_or("Never", Outcome::as_str)
}

impl TestMap {
    pub fn get(&self, test: &str) -> Option<&TestMapEntry> {
        self.entries.get(test)
    }

    pub fn insert(&mut self, entry: TestMapEntry) {
        self.entries.insert(entry.test_name.clone(), entry);
    }

    pub fn save(&self) -> String {
        let mut out = format!("{HEADER_PREFIX}{}\n", self.format_version);
        for entry in self.entries.values() {
            let digest = entry.source_digest.as_deref().unwrap_or("-");
            out.push_str(&format!("TEST {} {} {}\n", entry.test_name, digest, outcome_str(entry.last_outcome)));
            let mut methods: Vec<String> = entry.methods.iter().map(MethodId::to_string).collect();
            methods.sort();
            for m in methods {
                out.push_str("  ");
                out.push_str(&m);
                out.push('\n');
            }
        }
        out
    }

    pub fn load(text: &str) -> Result<TestMap, MapError> {
        let mut lines = text.split_terminator('\n').enumerate().map(|(i, l)| (i + 1, l));
        let format = |line: usize, message: String| MapError::Format { line, message };
        let Some((_, header)) = lines.next() else {
            return Err(format(1, "missing `TIA-MAP v1` header".into()));
        };
        let Some(version) = header.strip_prefix(HEADER_PREFIX) else {
            return Err(format(1, format!("expected `TIA-MAP v1` header, found `{header}`")));
        };
        if version != FORMAT_VERSION.to_string() {
            return Err(MapError::Version { found: version.to_string() });
        }
        let mut map = TestMap::default();
        let mut current: Option<TestMapEntry> = None;
        for (n, line) in lines {
            if let Some(method) = line.strip_prefix("  ") {
                let Some(entry) = current.as_mut() else {
                    return Err(format(n, "method line before any TEST line".into()));
                };
                let id: MethodId = method.parse().map_err(|e| format(n, format!("{e}")))?;
                if !entry.methods.insert(id) {
                    return Err(format(n, format!("duplicate method `{method}`")));
                }
            } else if let Some(rest) = line.strip_prefix("TEST ") {
                let parts: Vec<&str> = rest.split(' ').collect();
                let [name, digest, outcome] = parts.as_slice() else {
                    return Err(format(n, "expected `TEST <name> <digest> <outcome>`".into()));
                };
                let valid_name = !name.is_empty()
                    && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                    && !name.starts_with(|c: char| c.is_ascii_digit());
                if !valid_name {
                    return Err(format(n, format!("invalid test name `{name}`")));
                }
                let source_digest = match *digest {
                    "-" => None,
                    d if !d.is_empty() && d.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()) => {
                        Some(d.to_string())
                    }
                    d => return Err(format(n, format!("invalid digest `{d}`"))),
                };
                let last_outcome = match *outcome {
                    "Never" => None,
                    o => Some(o.parse::<Outcome>().map_err(|e| format(n, e))?),
                };
                if let Some(done) = current.take() {
                    map.insert(done);
                }
                if map.entries.contains_key(*name) {
                    return Err(format(n, format!("duplicate test `{name}`")));
                }
                current = Some(TestMapEntry {
                    test_name: name.to_string(),
                    methods: BTreeSet::new(),
                    source_digest,
                    last_outcome,
                });
            } else {
                return Err(format(n, format!("unexpected line `{line}`")));
            }
        }
        if let Some(done) = current {
            map.insert(done);
        }
        if !text.is_empty() && !text.ends_with('\n') {
            let last = text.split_terminator('\n').count();
            return Err(format(last, "missing final newline".into()));
        }
        Ok(map)
    }
}

/// Why a test was selected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectionReason {
    EmptyMap,
    TestChanged,
    PreviouslyFailed,
    HitMethod(MethodId),
}

impl fmt::Display for SelectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionReason::EmptyMap => f.write_str("EmptyMap"),
            SelectionReason::TestChanged => f.write_str("TestChanged"),
            SelectionReason::PreviouslyFailed => f.write_str("PreviouslyFailed"),
            SelectionReason::HitMethod(m) => write!(f, "HitMethod:{m}"),
        }
    }
}

impl std::str::FromStr for SelectionReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "EmptyMap" => SelectionReason::EmptyMap,
            "TestChanged" => SelectionReason::TestChanged,
            "PreviouslyFailed" => SelectionReason::PreviouslyFailed,
            other => match other.strip_prefix("HitMethod:") {
                Some(m) => SelectionReason::HitMethod(m.parse().map_err(|e| format!("{e}"))?),
                None => return Err(format!("unknown selection reason `{other}`")),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    /// Selected tests in suite order.
    pub selected: Vec<String>,
    pub total: usize,
    pub selected_count: usize,
    pub gain_percent: f64,
    pub reasons: BTreeMap<String, SelectionReason>,
}

impl SelectionReport {
    pub fn from_parts(selected: Vec<(String, SelectionReason)>, total: usize) -> Self {
        let selected_count = selected.len();
        let reasons = selected.iter().cloned().collect();
        SelectionReport {
            selected: selected.into_iter().map(|(t, _)| t).collect(),
            total,
            selected_count,
            gain_percent: gain_percent(total, selected_count),
            reasons,
        }
    }

    /// Every test selected, for when analysis could not be trusted.
    pub fn all(suite: &[TestCase]) -> Self {
        let picked = suite.iter().map(|t| (t.name.clone(), SelectionReason::EmptyMap)).collect();
        Self::from_parts(picked, suite.len())
    }

    pub fn is_selected(&self, test: &str) -> bool {
        self.reasons.contains_key(test)
    }
}

/// Percentage of tests not run: `100 × (1 − selected/total)`, and 0 for an
/// empty suite.
pub fn gain_percent(total: usize, selected: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * (1.0 - selected as f64 / total as f64)
    }
}

/// Selects tests whose map is empty, whose body changed since the map was
/// recorded, whose last run did not pass, or whose map contains a modified
/// method. The first matching reason is recorded.
pub fn select(changes: &ChangeSet, suite: &[TestCase], map: &TestMap) -> SelectionReport {
    let mut picked = Vec::new();
    for test in suite {
        let reason = match map.get(&test.name) {
            None => Some(SelectionReason::EmptyMap),
            Some(e) if e.methods.is_empty() || e.last_outcome.is_none() => Some(SelectionReason::EmptyMap),
            Some(e) if e.source_digest.as_deref() != Some(test.source_digest.as_str()) => {
                Some(SelectionReason::TestChanged)
            }
            Some(e) if !e.last_outcome.is_some_and(Outcome::is_pass) => Some(SelectionReason::PreviouslyFailed),
            Some(e) => changes.entries.keys().find(|h| e.methods.contains(*h)).cloned().map(SelectionReason::HitMethod),
        };
        if let Some(r) = reason {
            picked.push((test.name.clone(), r));
        }
    }
    SelectionReport::from_parts(picked, suite.len())
}

/// Replaces the test's entry with the methods it just executed.
pub fn update_entry(map: &mut TestMap, result: &TestResult, digest: &str) {
    map.insert(TestMapEntry {
        test_name: result.test.clone(),
        methods: trace_to_map_entry(&result.trace),
        source_digest: Some(digest.to_string()),
        last_outcome: Some(result.outcome),
    });
}

/// Records a test that could not even start (it no longer type-checks).
/// The entry keeps no methods, so it is selected again next time.
pub fn invalidate_entry(map: &mut TestMap, test: &str, digest: &str, outcome: Outcome) {
    map.insert(TestMapEntry {
        test_name: test.to_string(),
        methods: BTreeSet::new(),
        source_digest: Some(digest.to_string()),
        last_outcome: Some(outcome),
    });
}

pub fn prune_removed_tests(map: &mut TestMap, suite: &[TestCase]) {
    let names: BTreeSet<&str> = suite.iter().map(|t| t.name.as_str()).collect();
    map.entries.retain(|name, _| names.contains(name.as_str()));
}
