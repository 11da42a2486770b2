use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use sha2::{Digest, Sha256};

use crate::differ::{diff_methods_with, file_delta, ChangeSet, DiffOptions, FileDelta};
use crate::minilang::{check_program, parse, SourceUnit};

use super::corpus::{Snapshot, SOURCE_EXTENSION};
use super::PipelineError;

const FAILSAFE_MARKER: &str = "!FAILSAFE\t";

/// Result of change analysis. `FailSafe` means the change set could not be
/// computed and every test has to run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Analysis {
    Changes(ChangeSet),
    FailSafe(String),
}

impl Analysis {
    pub fn is_fail_safe(&self) -> bool {
        matches!(self, Analysis::FailSafe(_))
    }

    /// `changes.txt` contents.
    pub fn render(&self) -> String {
        match self {
            Analysis::Changes(h) => h.render(),
            Analysis::FailSafe(reason) => format!("{FAILSAFE_MARKER}{}\n", one_line(reason)),
        }
    }

    pub fn parse(text: &str) -> Result<Analysis, PipelineError> {
        if let Some(rest) = text.strip_prefix(FAILSAFE_MARKER) {
            return Ok(Analysis::FailSafe(rest.trim_end_matches('\n').to_string()));
        }
        Ok(Analysis::Changes(ChangeSet::parse(text)?))
    }
}

pub(crate) fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn digests(snapshot: &Snapshot) -> BTreeMap<String, String> {
    snapshot.iter().map(|(p, text)| (p.clone(), hex::encode(Sha256::digest(text.as_bytes())))).collect()
}

fn parse_all(snapshot: &Snapshot, label: &str) -> Result<Vec<SourceUnit>, String> {
    let units = snapshot
        .iter()
        .map(|(path, text)| parse(text, path))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| format!("{label} version: {e}"))?;
    check_program(&units).map_err(|e| format!("{label} version: {e}"))?;
    Ok(units)
}

/// Diffs two program versions. Any parse, hierarchy or static-check
/// failure in either version yields `FailSafe`.
pub fn analyze_snapshots(old: &Snapshot, new: &Snapshot, options: DiffOptions) -> (Analysis, FileDelta) {
    let delta = file_delta(&digests(old), &digests(new));
    let analysis = match (parse_all(old, "old"), parse_all(new, "new")) {
        (Err(reason), _) | (_, Err(reason)) => Analysis::FailSafe(one_line(&reason)),
        (Ok(o), Ok(n)) => match diff_methods_with(&o, &n, options) {
            Ok(h) => Analysis::Changes(h),
            Err(e) => Analysis::FailSafe(one_line(&e.to_string())),
        },
    };
    (analysis, delta)
}

fn git(worktree: &Path, args: &[&str]) -> Result<std::process::Output, PipelineError> {
    Command::new("git")
        .arg("-C")
        .arg(worktree)
        .args(args)
        .output()
        .map_err(|e| PipelineError::Git(format!("cannot run git: {e}")))
}

fn git_ok(worktree: &Path, args: &[&str]) -> Result<String, PipelineError> {
    let out = git(worktree, args)?;
    if !out.status.success() {
        return Err(PipelineError::Git(format!(
            "git {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    String::from_utf8(out.stdout)
        .map_err(|_| PipelineError::Git(format!("git {}: output is not UTF-8", args.join(" "))))
}

fn in_src(path: &str, src_prefix: &str) -> bool {
    let under = src_prefix.is_empty() || path.starts_with(&format!("{}/", src_prefix.trim_end_matches('/')));
    under && path.ends_with(&format!(".{SOURCE_EXTENSION}"))
}

fn strip_src<'a>(path: &'a str, src_prefix: &str) -> &'a str {
    if src_prefix.is_empty() {
        path
    } else {
        &path[src_prefix.trim_end_matches('/').len() + 1..]
    }
}

/// Materializes the program under `src_prefix` at `HEAD` and at `HEAD^`.
/// Candidate files come from `git diff-tree --no-commit-id --name-only -r HEAD`
/// and their old contents from `git show HEAD^:<file>`; every other file is
/// shared between both versions. Returns `None` for a root commit.
pub fn git_snapshots(worktree: &Path, src_prefix: &str) -> Result<Option<(Snapshot, Snapshot)>, PipelineError> {
    if !git(worktree, &["rev-parse", "--verify", "--quiet", "HEAD^"])?.status.success() {
        return Ok(None);
    }
    let mut new = Snapshot::new();
    for path in git_ok(worktree, &["ls-tree", "-r", "--name-only", "HEAD"])?.lines() {
        if in_src(path, src_prefix) {
            let text = git_ok(worktree, &["show", &format!("HEAD:{path}")])?;
            new.insert(strip_src(path, src_prefix).to_string(), text);
        }
    }
    let mut old = new.clone();
    for path in git_ok(worktree, &["diff-tree", "--no-commit-id", "--name-only", "-r", "HEAD"])?.lines() {
        if !in_src(path, src_prefix) {
            continue;
        }
        let key = strip_src(path, src_prefix).to_string();
        let shown = git(worktree, &["show", &format!("HEAD^:{path}")])?;
        if shown.status.success() {
            let text = String::from_utf8(shown.stdout).map_err(|_| PipelineError::Git(format!("{path}: not UTF-8")))?;
            old.insert(key, text);
        } else {
            old.remove(&key);
        }
    }
    Ok(Some((old, new)))
}

pub fn analyze_git(
    worktree: &Path,
    src_prefix: &str,
    options: DiffOptions,
) -> Result<(Analysis, FileDelta), PipelineError> {
    match git_snapshots(worktree, src_prefix)? {
        Some((old, new)) => Ok(analyze_snapshots(&old, &new, options)),
        None => Ok((Analysis::FailSafe("no parent commit to compare against".into()), FileDelta::default())),
    }
}

/// Commits the map file in the work tree.
pub fn commit_map(worktree: &Path, map_path: &Path) -> Result<(), PipelineError> {
    let map = map_path.to_string_lossy();
    git_ok(worktree, &["add", "--", &map])?;
    let staged = git(worktree, &["diff", "--cached", "--quiet", "--", &map])?;
    if !staged.status.success() {
        git_ok(worktree, &["commit", "--quiet", "-m", "Update test impact map", "--", &map])?;
    }
    Ok(())
}
