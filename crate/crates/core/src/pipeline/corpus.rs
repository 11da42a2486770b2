use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use crate::minilang::{check_program, parse, CheckedProgram, SourceUnit};
use crate::runtime::TestCase;

use super::PipelineError;

pub const MAP_PATH_ENV: &str = "TIA_MAP_PATH";
pub const SOURCE_EXTENSION: &str = "mj";

/// Where a corpus keeps its program, its tests and its map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusLayout {
    pub src_dir: PathBuf,
    pub test_dir: PathBuf,
    pub map_path: PathBuf,
}

impl CorpusLayout {
    /// `<root>/src`, `<root>/tests` and `<root>/tia.map`, with the map path
    /// taken from `TIA_MAP_PATH` when set.
    pub fn new(root: &Path) -> Self {
        let map_path = match std::env::var_os(MAP_PATH_ENV) {
            Some(p) if !p.is_empty() => PathBuf::from(p),
            _ => root.join("tia.map"),
        };
        CorpusLayout { src_dir: root.join("src"), test_dir: root.join("tests"), map_path }
    }

    pub fn with_src(mut self, dir: &Path) -> Self {
        self.src_dir = dir.to_path_buf();
        self
    }

    pub fn with_tests(mut self, dir: &Path) -> Self {
        self.test_dir = dir.to_path_buf();
        self
    }

    pub fn with_map(mut self, path: &Path) -> Self {
        self.map_path = path.to_path_buf();
        self
    }

    pub fn lock_path(&self) -> PathBuf {
        let mut name = self.map_path.as_os_str().to_owned();
        name.push(".lock");
        PathBuf::from(name)
    }
}

/// Source files of one program version, keyed by path relative to the
/// snapshot root with `/` separators.
pub type Snapshot = BTreeMap<String, String>;

pub fn read_snapshot(dir: &Path) -> Result<Snapshot, PipelineError> {
    fn walk(root: &Path, dir: &Path, out: &mut Snapshot) -> Result<(), PipelineError> {
        let entries = fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))?;
        let mut paths: Vec<PathBuf> = Vec::new();
        for entry in entries {
            paths.push(entry.map_err(|e| PipelineError::io(dir, e))?.path());
        }
        paths.sort();
        for path in paths {
            if path.is_dir() {
                walk(root, &path, out)?;
            } else if path.extension().is_some_and(|e| e == SOURCE_EXTENSION) {
                let text = fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
                let rel = path.strip_prefix(root).unwrap_or(&path);
                let key: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
                out.insert(key.join("/"), text);
            }
        }
        Ok(())
    }
    let mut snapshot = Snapshot::new();
    walk(dir, dir, &mut snapshot)?;
    Ok(snapshot)
}

pub fn parse_snapshot(snapshot: &Snapshot) -> Result<Vec<SourceUnit>, PipelineError> {
    snapshot.iter().map(|(path, text)| parse(text, path).map_err(|e| PipelineError::Program(e.into()))).collect()
}

pub fn load_program(dir: &Path) -> Result<CheckedProgram, PipelineError> {
    let units = parse_snapshot(&read_snapshot(dir)?)?;
    Ok(check_program(&units)?)
}

/// Tests in suite order: files sorted by path, tests in declaration order.
pub fn load_suite(dir: &Path) -> Result<Vec<TestCase>, PipelineError> {
    let units = parse_snapshot(&read_snapshot(dir)?)?;
    suite_from_units(units)
}

pub fn suite_from_units(units: Vec<SourceUnit>) -> Result<Vec<TestCase>, PipelineError> {
    let mut seen = BTreeSet::new();
    let mut suite = Vec::new();
    for unit in units {
        if let Some(class) = unit.classes.first() {
            return Err(PipelineError::Suite(format!(
                "{}: test files may not declare classes (found `{}`)",
                unit.path, class.name
            )));
        }
        for test in unit.tests {
            if !seen.insert(test.name.clone()) {
                return Err(PipelineError::Suite(format!("{}: duplicate test `{}`", unit.path, test.name)));
            }
            suite.push(TestCase::new(test));
        }
    }
    Ok(suite)
}
