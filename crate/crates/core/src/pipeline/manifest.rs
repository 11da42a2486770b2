//! Run manifest: one file per pipeline run.
//!
//! ```text
//! TIA-MANIFEST v1
//! timestamp <unix-seconds>
//! old <path>                          optional
//! new <path>                          optional
//! files <added> <removed> <changed>   optional, followed by the paths
//! file <added|removed|changed> <path>
//! analysis changes <count>            or `analysis failsafe <reason>`
//! change <method>\t<kind>,<kind>
//! selection <total> <selected> <gain>
//! select <test> <reason>
//! run <test> <outcome> <steps> [message]
//! map-before <sha256|->
//! map-after <sha256|->
//! status <ok|failed|aborted> [reason]
//! ```
//!
//! Keys appear in this order; repeated keys keep their relative order.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::differ::{ChangeSet, FileDelta};
use crate::mapstore::{SelectionReason, SelectionReport};
use crate::runtime::Outcome;

use super::analyze::{one_line, Analysis};
use super::PipelineError;

const HEADER: &str = "TIA-MANIFEST v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub test: String,
    pub outcome: Outcome,
    pub steps: u64,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// Some executed test did not pass.
    Failed,
    /// Nothing ran and the map was not modified.
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub timestamp: u64,
    pub old: Option<String>,
    pub new: Option<String>,
    pub delta: Option<FileDelta>,
    pub analysis: Option<Analysis>,
    pub selection: Option<SelectionReport>,
    pub executions: Vec<Execution>,
    pub map_before: Option<String>,
    pub map_after: Option<String>,
    /// `None` until the run stage finishes.
    pub status: Option<RunStatus>,
}

impl RunManifest {
    pub fn new(timestamp: u64) -> Self {
        RunManifest {
            timestamp,
            old: None,
            new: None,
            delta: None,
            analysis: None,
            selection: None,
            executions: Vec::new(),
            map_before: None,
            map_after: None,
            status: None,
        }
    }

    pub fn now() -> Self {
        Self::new(SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
    }

    /// 0 when every executed test passed, 1 when one did not, 2 when the run
    /// was aborted.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Some(RunStatus::Aborted(_)) => 2,
            Some(RunStatus::Failed) => 1,
            _ => 0,
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!("{HEADER}\ntimestamp {}\n", self.timestamp);
        if let Some(old) = &self.old {
            writeln!(out, "old {old}").unwrap();
        }
        if let Some(new) = &self.new {
            writeln!(out, "new {new}").unwrap();
        }
        if let Some(d) = &self.delta {
            writeln!(out, "files {} {} {}", d.added.len(), d.removed.len(), d.changed.len()).unwrap();
            for (kind, paths) in [("added", &d.added), ("removed", &d.removed), ("changed", &d.changed)] {
                for p in paths {
                    writeln!(out, "file {kind} {p}").unwrap();
                }
            }
        }
        match &self.analysis {
            Some(Analysis::FailSafe(reason)) => writeln!(out, "analysis failsafe {}", one_line(reason)).unwrap(),
            Some(Analysis::Changes(h)) => {
                writeln!(out, "analysis changes {}", h.len()).unwrap();
                for line in h.render().lines() {
                    writeln!(out, "change {line}").unwrap();
                }
            }
            None => {}
        }
        if let Some(s) = &self.selection {
            writeln!(out, "selection {} {} {:.2}", s.total, s.selected_count, s.gain_percent).unwrap();
            for t in &s.selected {
                writeln!(out, "select {t} {}", s.reasons[t]).unwrap();
            }
        }
        for e in &self.executions {
            write!(out, "run {} {} {}", e.test, e.outcome, e.steps).unwrap();
            if let Some(m) = &e.message {
                write!(out, " {}", one_line(m)).unwrap();
            }
            out.push('\n');
        }
        if let Some(d) = &self.map_before {
            writeln!(out, "map-before {d}").unwrap();
        }
        if let Some(d) = &self.map_after {
            writeln!(out, "map-after {d}").unwrap();
        }
        match &self.status {
            Some(RunStatus::Ok) => out.push_str("status ok\n"),
            Some(RunStatus::Failed) => out.push_str("status failed\n"),
            Some(RunStatus::Aborted(r)) => writeln!(out, "status aborted {}", one_line(r)).unwrap(),
            None => {}
        }
        out
    }

    pub fn parse(text: &str) -> Result<RunManifest, PipelineError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        if lines.next().map(|(_, l)| l) != Some(HEADER) {
            return Err(PipelineError::Manifest { line: 1, message: format!("expected `{HEADER}`") });
        }
        let mut m = RunManifest::new(0);
        let mut changes: Option<ChangeSet> = None;
        let mut selection: Option<(usize, Vec<(String, SelectionReason)>)> = None;
        for (n, line) in lines {
            let bad = |message: String| PipelineError::Manifest { line: n, message };
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            let num = |s: &str| s.parse::<u64>().map_err(|_| bad(format!("expected a number, found `{s}`")));
            match key {
                "timestamp" => m.timestamp = num(rest)?,
                "old" => m.old = Some(rest.to_string()),
                "new" => m.new = Some(rest.to_string()),
                "files" => m.delta = Some(FileDelta::default()),
                "file" => {
                    let delta = m.delta.as_mut().ok_or_else(|| bad("`file` before `files`".into()))?;
                    let (kind, path) =
                        rest.split_once(' ').ok_or_else(|| bad("expected `file <kind> <path>`".into()))?;
                    let set = match kind {
                        "added" => &mut delta.added,
                        "removed" => &mut delta.removed,
                        "changed" => &mut delta.changed,
                        other => return Err(bad(format!("unknown file change `{other}`"))),
                    };
                    set.insert(path.to_string());
                }
                "analysis" => match rest.split_once(' ') {
                    Some(("failsafe", reason)) => m.analysis = Some(Analysis::FailSafe(reason.to_string())),
                    Some(("changes", _)) => changes = Some(ChangeSet::default()),
                    _ => return Err(bad("expected `analysis changes <n>` or `analysis failsafe <reason>`".into())),
                },
                "change" => {
                    let h = changes.as_mut().ok_or_else(|| bad("`change` before `analysis changes`".into()))?;
                    let parsed = ChangeSet::parse(rest).map_err(|e| bad(e.message))?;
                    for (id, kinds) in parsed.entries {
                        for k in kinds {
                            h.mark(id.clone(), k);
                        }
                    }
                }
                "selection" => {
                    let total = rest.split(' ').next().unwrap_or("");
                    selection = Some((num(total)? as usize, Vec::new()));
                }
                "select" => {
                    let (_, picked) = selection.as_mut().ok_or_else(|| bad("`select` before `selection`".into()))?;
                    let (test, reason) =
                        rest.split_once(' ').ok_or_else(|| bad("expected `select <test> <reason>`".into()))?;
                    picked.push((test.to_string(), reason.parse().map_err(bad)?));
                }
                "run" => {
                    let mut parts = rest.splitn(4, ' ');
                    let (Some(test), Some(outcome), Some(steps)) = (parts.next(), parts.next(), parts.next()) else {
                        return Err(bad("expected `run <test> <outcome> <steps>`".into()));
                    };
                    m.executions.push(Execution {
                        test: test.to_string(),
                        outcome: outcome.parse().map_err(bad)?,
                        steps: num(steps)?,
                        message: parts.next().map(str::to_string),
                    });
                }
                "map-before" => m.map_before = Some(rest.to_string()),
                "map-after" => m.map_after = Some(rest.to_string()),
                "status" => {
                    m.status = Some(match rest.split_once(' ').unwrap_or((rest, "")) {
                        ("ok", _) => RunStatus::Ok,
                        ("failed", _) => RunStatus::Failed,
                        ("aborted", reason) => RunStatus::Aborted(reason.to_string()),
                        _ => return Err(bad(format!("unknown status `{rest}`"))),
                    })
                }
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        if let Some(h) = changes {
            m.analysis = Some(Analysis::Changes(h));
        }
        if let Some((total, picked)) = selection {
            m.selection = Some(SelectionReport::from_parts(picked, total));
        }
        Ok(m)
    }

    /// Writes the manifest to a fresh file in `dir`; existing manifests are
    /// never overwritten.
    pub fn write_new(&self, dir: &Path) -> Result<PathBuf, PipelineError> {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        for n in 0.. {
            let name = if n == 0 {
                format!("run-{}.manifest", self.timestamp)
            } else {
                format!("run-{}-{n}.manifest", self.timestamp)
            };
            let path = dir.join(name);
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    f.write_all(self.render().as_bytes()).map_err(|e| PipelineError::io(&path, e))?;
                    return Ok(path);
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(PipelineError::io(&path, e)),
            }
        }
        unreachable!()
    }

    /// Human-readable summary.
    pub fn report(&self) -> String {
        let mut out = format!("run at {} (unix time)\n", self.timestamp);
        if let (Some(old), Some(new)) = (&self.old, &self.new) {
            writeln!(out, "versions: {old} -> {new}").unwrap();
        }
        if let Some(d) = &self.delta {
            writeln!(out, "files: {} added, {} removed, {} changed", d.added.len(), d.removed.len(), d.changed.len())
                .unwrap();
        }
        match &self.analysis {
            Some(Analysis::FailSafe(reason)) => {
                writeln!(out, "analysis: fail-safe, all tests selected ({reason})").unwrap()
            }
            Some(Analysis::Changes(h)) => {
                writeln!(out, "analysis: {} modified method(s)", h.len()).unwrap();
                for (id, kinds) in &h.entries {
                    let kinds: Vec<&str> = kinds.iter().map(|k| k.as_str()).collect();
                    writeln!(out, "  {id}  {}", kinds.join(", ")).unwrap();
                }
            }
            None => {}
        }
        if let Some(s) = &self.selection {
            writeln!(out, "selection: {} of {} test(s), gain {:.2}%", s.selected_count, s.total, s.gain_percent)
                .unwrap();
            for t in &s.selected {
                writeln!(out, "  {t}  {}", s.reasons[t]).unwrap();
            }
        }
        if self.status.is_some() {
            let count = |o: Outcome| self.executions.iter().filter(|e| e.outcome == o).count();
            writeln!(
                out,
                "executed: {} ({} pass, {} fail, {} error, {} timeout)",
                self.executions.len(),
                count(Outcome::Pass),
                count(Outcome::Fail),
                count(Outcome::Error),
                count(Outcome::Timeout)
            )
            .unwrap();
            for e in &self.executions {
                write!(out, "  {}  {}  {} steps", e.test, e.outcome, e.steps).unwrap();
                if let Some(msg) = &e.message {
                    write!(out, "  {msg}").unwrap();
                }
                out.push('\n');
            }
        }
        let short = |d: &Option<String>| d.as_deref().map_or("absent".to_string(), |d| d.chars().take(12).collect());
        if self.map_before.is_some() || self.map_after.is_some() {
            let changed = if self.map_before == self.map_after { "unchanged" } else { "updated" };
            writeln!(out, "map: {} -> {} ({changed})", short(&self.map_before), short(&self.map_after)).unwrap();
        }
        match &self.status {
            Some(RunStatus::Ok) => out.push_str("status: ok\n"),
            Some(RunStatus::Failed) => out.push_str("status: failed\n"),
            Some(RunStatus::Aborted(r)) => writeln!(out, "status: aborted ({r})").unwrap(),
            None => out.push_str("status: not run\n"),
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::differ::ChangeKind;

    fn sample() -> RunManifest {
        let mut m = RunManifest::new(1_700_000_000);
        m.old = Some("corpora/dispatch/v0".into());
        m.new = Some("corpora/dispatch/v1".into());
        let mut d = FileDelta::default();
        d.changed.insert("dispatch.mj".into());
        m.delta = Some(d);
        let mut h = ChangeSet::default();
        h.mark("A.bar(Object)".parse().unwrap(), ChangeKind::OverriddenByNew);
        m.analysis = Some(Analysis::Changes(h.clone()));
        m.selection = Some(SelectionReport::from_parts(
            vec![("T3".into(), SelectionReason::HitMethod("A.bar(Object)".parse().unwrap()))],
            3,
        ));
        m.executions.push(Execution { test: "T3".into(), outcome: Outcome::Pass, steps: 7, message: None });
        m.executions.push(Execution {
            test: "T4".into(),
            outcome: Outcome::Fail,
            steps: 2,
            message: Some("assertion failed at 1:3".into()),
        });
        m.map_before = Some("ab".repeat(32));
        m.map_after = Some("cd".repeat(32));
        m.status = Some(RunStatus::Failed);
        m
    }

    #[test]
    fn round_trip() {
        let m = sample();
        let text = m.render();
        assert_eq!(RunManifest::parse(&text).unwrap(), m);
        assert_eq!(RunManifest::parse(&text).unwrap().render(), text);
        let mut aborted = RunManifest::new(5);
        aborted.analysis = Some(Analysis::FailSafe("new version: syntax error".into()));
        aborted.status = Some(RunStatus::Aborted("new version does not build".into()));
        assert_eq!(RunManifest::parse(&aborted.render()).unwrap(), aborted);
    }

    #[test]
    fn layout_is_stable() {
        let text = sample().render();
        let keys: Vec<&str> = text.lines().map(|l| l.split(' ').next().unwrap()).collect();
        assert_eq!(
            keys,
            [
                "TIA-MANIFEST",
                "timestamp",
                "old",
                "new",
                "files",
                "file",
                "analysis",
                "change",
                "selection",
                "select",
                "run",
                "run",
                "map-before",
                "map-after",
                "status"
            ]
        );
        assert!(text.contains("selection 3 1 66.67\n"));
        assert!(text.contains("change A.bar(Object)\tOverriddenByNew\n"));
    }

    #[test]
    fn exit_codes() {
        let mut m = sample();
        assert_eq!(m.exit_code(), 1);
        m.status = Some(RunStatus::Ok);
        assert_eq!(m.exit_code(), 0);
        m.status = Some(RunStatus::Aborted("x".into()));
        assert_eq!(m.exit_code(), 2);
    }

    #[test]
    fn report_mentions_gain() {
        let r = sample().report();
        assert!(r.contains("selection: 1 of 3 test(s), gain 66.67%"));
        assert!(r.contains("T3  HitMethod:A.bar(Object)"));
        assert!(r.contains("status: failed"));
    }

    #[test]
    fn manifests_are_never_overwritten() {
        let dir = tempfile::tempdir().unwrap();
        let m = sample();
        let a = m.write_new(dir.path()).unwrap();
        let b = m.write_new(dir.path()).unwrap();
        assert_ne!(a, b);
        assert_eq!(fs::read_to_string(b).unwrap(), m.render());
    }

    #[test]
    fn malformed() {
        assert!(RunManifest::parse("nope\n").is_err());
        let err = RunManifest::parse("TIA-MANIFEST v1\ntimestamp x\n").unwrap_err();
        assert!(matches!(err, PipelineError::Manifest { line: 2, .. }));
        assert!(RunManifest::parse("TIA-MANIFEST v1\nselect T1 EmptyMap\n").is_err());
    }
}
