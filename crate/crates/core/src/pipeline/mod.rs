//! Analyze, select, run and report over a corpus on disk.
//!
//! Stage I turns two program versions into a change set (or a fail-safe
//! directive), stage II picks the tests to run from the stored map and stage
//! III runs them in suite order, flushing the map after every test.

pub mod analyze;
pub mod corpus;
pub mod manifest;

use std::fs::{self, OpenOptions};
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::differ::{ChangesFormatError, DiffOptions};
use crate::mapstore::{
    invalidate_entry, prune_removed_tests, select, update_entry, MapError, SelectionReport, TestMap,
};
use crate::minilang::ProgramError;
use crate::runtime::{run_test, Outcome, RunConfig};

pub use analyze::{analyze_git, analyze_snapshots, commit_map, git_snapshots, Analysis};
pub use corpus::{load_program, load_suite, read_snapshot, CorpusLayout, Snapshot, MAP_PATH_ENV};
pub use manifest::{Execution, RunManifest, RunStatus};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("{}: {source}", path.display())]
    Map { path: PathBuf, source: MapError },
    #[error(transparent)]
    Changes(#[from] ChangesFormatError),
    #[error("test suite: {0}")]
    Suite(String),
    #[error("map is locked by another run ({}); remove the file if no run is active", .0.display())]
    Locked(PathBuf),
    #[error("{0}")]
    Git(String),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        PipelineError::Io { path: path.to_path_buf(), source }
    }
}

/// Exclusive ownership of a corpus map, released on drop.
#[derive(Debug)]
pub struct MapLock {
    path: PathBuf,
}

impl MapLock {
    pub fn acquire(layout: &CorpusLayout) -> Result<MapLock, PipelineError> {
        let path = layout.lock_path();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        }
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(MapLock { path }),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(path)),
            Err(e) => Err(PipelineError::io(&path, e)),
        }
    }
}

impl Drop for MapLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Reads the map, `None` when the file does not exist yet.
pub fn read_map(path: &Path) -> Result<Option<(TestMap, String)>, PipelineError> {
    match fs::read_to_string(path) {
        Ok(text) => {
            let map = TestMap::load(&text).map_err(|source| PipelineError::Map { path: path.to_path_buf(), source })?;
            Ok(Some((map, bytes_digest(&text))))
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(PipelineError::io(path, e)),
    }
}

/// Replaces the map file atomically and returns the digest of its bytes.
pub fn write_map(path: &Path, map: &TestMap) -> Result<String, PipelineError> {
    let text = map.save();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, &text).map_err(|e| PipelineError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| PipelineError::io(path, e))?;
    Ok(bytes_digest(&text))
}

fn bytes_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Stage I over two snapshot directories.
pub fn cmd_analyze(
    old: &Path,
    new: &Path,
    options: DiffOptions,
) -> Result<(Analysis, crate::differ::FileDelta), PipelineError> {
    Ok(analyze_snapshots(&read_snapshot(old)?, &read_snapshot(new)?, options))
}

/// Stage II. A fail-safe analysis or a missing map selects every test.
pub fn cmd_select(analysis: &Analysis, layout: &CorpusLayout) -> Result<SelectionReport, PipelineError> {
    let suite = load_suite(&layout.test_dir)?;
    let map = read_map(&layout.map_path)?;
    Ok(match (analysis, map) {
        (Analysis::Changes(h), Some((map, _))) => select(h, &suite, &map),
        _ => SelectionReport::all(&suite),
    })
}

/// Stage III. Runs the selected tests of `layout`'s suite against the
/// program in `layout.src_dir`, updating the map after every test. When the
/// program does not build, the run is aborted and the map left alone.
pub fn cmd_run(
    selection: &SelectionReport,
    layout: &CorpusLayout,
    config: &RunConfig,
    manifest: &mut RunManifest,
) -> Result<(), PipelineError> {
    cmd_run_traced(selection, layout, config, None, manifest)
}

/// [`cmd_run`], additionally writing `<test>.trace` files into `trace_dir`.
pub fn cmd_run_traced(
    selection: &SelectionReport,
    layout: &CorpusLayout,
    config: &RunConfig,
    trace_dir: Option<&Path>,
    manifest: &mut RunManifest,
) -> Result<(), PipelineError> {
    let _lock = MapLock::acquire(layout)?;
    let stored = read_map(&layout.map_path)?;
    manifest.map_before = stored.as_ref().map(|(_, d)| d.clone());
    manifest.map_after = manifest.map_before.clone();
    let suite = load_suite(&layout.test_dir)?;
    let program = match load_program(&layout.src_dir) {
        Ok(p) => p,
        Err(e) => {
            manifest.status = Some(RunStatus::Aborted(format!("program does not build: {e}")));
            return Ok(());
        }
    };
    let mut map = stored.as_ref().map(|(m, _)| m.clone()).unwrap_or_default();
    let mut all_passed = true;
    for test in suite.iter().filter(|t| selection.is_selected(&t.name)) {
        let execution = match run_test(&program, test, config) {
            Ok(result) => {
                if let Some(dir) = trace_dir {
                    result.trace.write_to_dir(dir).map_err(|e| PipelineError::io(dir, e))?;
                }
                update_entry(&mut map, &result, &test.source_digest);
                Execution {
                    test: test.name.clone(),
                    outcome: result.outcome,
                    steps: result.steps_used,
                    message: result.message,
                }
            }
            Err(e) => {
                invalidate_entry(&mut map, &test.name, &test.source_digest, Outcome::Error);
                Execution {
                    test: test.name.clone(),
                    outcome: Outcome::Error,
                    steps: 0,
                    message: Some(format!("cannot execute: {e}")),
                }
            }
        };
        all_passed &= execution.outcome.is_pass();
        manifest.executions.push(execution);
        manifest.map_after = Some(write_map(&layout.map_path, &map)?);
    }
    prune_removed_tests(&mut map, &suite);
    if stored.as_ref().is_none_or(|(m, _)| *m != map) {
        manifest.map_after = Some(write_map(&layout.map_path, &map)?);
    }
    manifest.status = Some(if all_passed { RunStatus::Ok } else { RunStatus::Failed });
    Ok(())
}

/// Stages I to III over two snapshot directories. The run uses `new` as the
/// program and the tests and map of `layout`.
pub fn cmd_pipeline(
    old: &Path,
    new: &Path,
    layout: &CorpusLayout,
    config: &RunConfig,
    options: DiffOptions,
) -> Result<RunManifest, PipelineError> {
    let mut manifest = RunManifest::now();
    manifest.old = Some(old.display().to_string());
    manifest.new = Some(new.display().to_string());
    let (analysis, delta) = cmd_analyze(old, new, options)?;
    finish_pipeline(manifest, analysis, delta, &layout.clone().with_src(new), config)
}

/// Stages I to III on a git work tree, comparing `HEAD^` with `HEAD`.
pub fn cmd_pipeline_git(
    worktree: &Path,
    src_prefix: &str,
    layout: &CorpusLayout,
    config: &RunConfig,
    options: DiffOptions,
    commit: bool,
) -> Result<RunManifest, PipelineError> {
    let mut manifest = RunManifest::now();
    manifest.old = Some("HEAD^".into());
    manifest.new = Some("HEAD".into());
    let (analysis, delta) = analyze_git(worktree, src_prefix, options)?;
    let manifest = finish_pipeline(manifest, analysis, delta, layout, config)?;
    if commit && !matches!(manifest.status, Some(RunStatus::Aborted(_))) {
        commit_map(worktree, &layout.map_path)?;
    }
    Ok(manifest)
}

fn finish_pipeline(
    mut manifest: RunManifest,
    analysis: Analysis,
    delta: crate::differ::FileDelta,
    layout: &CorpusLayout,
    config: &RunConfig,
) -> Result<RunManifest, PipelineError> {
    let selection = cmd_select(&analysis, layout)?;
    manifest.delta = Some(delta);
    manifest.analysis = Some(analysis);
    manifest.selection = Some(selection.clone());
    cmd_run(&selection, layout, config, &mut manifest)?;
    Ok(manifest)
}
