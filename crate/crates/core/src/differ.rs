//! Method-level change detection between two program versions.
//!
//! A method is reported as modified when
//! 1. it exists in both versions and its body, modifiers or throws list differ;
//! 2. it exists only in the old version (deleted, renamed, or re-parameterized);
//! 3. a method added in the new version overrides it;
//! 4. a method added in the new version overloads it with parameter types that
//!    are pairwise related by subtyping, which can change compile-time binding.
//!
//! Rules 3 and 4 always mark the pre-existing method, never the new one.
//!
//! The four rules miss one case. A call site bound at compile time to a
//! removed method may have dispatched to a surviving override, so the trace
//! names only the override. Removing the base then breaks the call site or
//! rebinds it to another overload. [`DiffOptions::safe_removal`] closes this by
//! also marking every surviving override of a removed method.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::minilang::ast::{MethodDecl, Modifier, SourceUnit};
use crate::minilang::hierarchy::{build_hierarchy, ClassHierarchy};
use crate::minilang::lexer::Token;
use crate::minilang::printer::canonical_body;
use crate::minilang::{HierarchyError, MethodId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChangeKind {
    BodyChanged,
    ModifiersChanged,
    ThrowsChanged,
    Removed,
    NameOrArgsChanged,
    OverriddenByNew,
    OverloadShadowedByNew,
    /// The method overrides a declaration that was removed; only with
    /// [`DiffOptions::safe_removal`].
    BaseRemoved,
}

impl ChangeKind {
    pub const ALL: [ChangeKind; 8] = [
        ChangeKind::BodyChanged,
        ChangeKind::ModifiersChanged,
        ChangeKind::ThrowsChanged,
        ChangeKind::Removed,
        ChangeKind::NameOrArgsChanged,
        ChangeKind::OverriddenByNew,
        ChangeKind::OverloadShadowedByNew,
        ChangeKind::BaseRemoved,
    ];

    /// Which of the four change rules produces this kind.
    pub fn rule(self) -> u8 {
        match self {
            ChangeKind::BodyChanged | ChangeKind::ModifiersChanged | ChangeKind::ThrowsChanged => 1,
            ChangeKind::Removed | ChangeKind::NameOrArgsChanged | ChangeKind::BaseRemoved => 2,
            ChangeKind::OverriddenByNew => 3,
            ChangeKind::OverloadShadowedByNew => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChangeKind::BodyChanged => "BodyChanged",
            ChangeKind::ModifiersChanged => "ModifiersChanged",
            ChangeKind::ThrowsChanged => "ThrowsChanged",
            ChangeKind::Removed => "Removed",
            ChangeKind::NameOrArgsChanged => "NameOrArgsChanged",
            ChangeKind::OverriddenByNew => "OverriddenByNew",
            ChangeKind::OverloadShadowedByNew => "OverloadShadowedByNew",
            ChangeKind::BaseRemoved => "BaseRemoved",
        }
    }
}

impl fmt::Display for ChangeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChangeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChangeKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown change kind `{s}`"))
    }
}

/// The modified methods `H`, each with the kinds of change that flagged it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChangeSet {
    pub entries: BTreeMap<MethodId, BTreeSet<ChangeKind>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("changes line {line}: {message}")]
pub struct ChangesFormatError {
    pub line: usize,
    pub message: String,
}

impl ChangeSet {
    pub fn mark(&mut self, id: MethodId, kind: ChangeKind) {
        self.entries.entry(id).or_default().insert(kind);
    }

    pub fn methods(&self) -> BTreeSet<MethodId> {
        self.entries.keys().cloned().collect()
    }

    pub fn contains(&self, id: &MethodId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn kinds(&self, id: &MethodId) -> Option<&BTreeSet<ChangeKind>> {
        self.entries.get(id)
    }

    /// `changes.txt` body: `<method>\t<kind>,<kind>` per line, sorted by
    /// method rendering.
    pub fn render(&self) -> String {
        let mut lines: Vec<(String, String)> = self
            .entries
            .iter()
            .map(|(id, kinds)| (id.to_string(), kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(",")))
            .collect();
        lines.sort();
        lines.into_iter().map(|(id, kinds)| format!("{id}\t{kinds}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<ChangeSet, ChangesFormatError> {
        let mut set = ChangeSet::default();
        for (i, line) in text.lines().enumerate() {
            let bad = |message: String| ChangesFormatError { line: i + 1, message };
            if line.is_empty() {
                continue;
            }
            let (id, kinds) = line.split_once('\t').ok_or_else(|| bad("expected `<method>\\t<kinds>`".into()))?;
            let id: MethodId = id.parse().map_err(|e: crate::minilang::types::SignatureError| bad(e.to_string()))?;
            for k in kinds.split(',') {
                set.mark(id.clone(), k.parse().map_err(bad)?);
            }
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("old version: {0}")]
    Old(HierarchyError),
    #[error("new version: {0}")]
    New(HierarchyError),
}

struct MethodFacts<'a> {
    tokens: Vec<Token>,
    modifiers: BTreeSet<Modifier>,
    throws: BTreeSet<&'a str>,
}

struct Version<'a> {
    hierarchy: ClassHierarchy,
    methods: HashMap<MethodId, MethodFacts<'a>>,
}

impl<'a> Version<'a> {
    fn new(units: &'a [SourceUnit], hierarchy: ClassHierarchy) -> Self {
        let mut methods = HashMap::new();
        for class in units.iter().flat_map(|u| &u.classes) {
            if !class.has_declared_ctor() {
                let decl = MethodDecl::implicit_ctor(class);
                methods.insert(
                    decl.id(&class.name),
                    MethodFacts { tokens: Vec::new(), modifiers: BTreeSet::new(), throws: BTreeSet::new() },
                );
            }
            for m in &class.methods {
                methods.insert(
                    m.id(&class.name),
                    MethodFacts {
                        tokens: canonical_body(m),
                        modifiers: m.modifiers.clone(),
                        throws: m.throws.iter().map(String::as_str).collect(),
                    },
                );
            }
        }
        Version { hierarchy, methods }
    }

    fn has(&self, id: &MethodId) -> bool {
        self.methods.contains_key(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DiffOptions {
    /// Mark surviving overrides of removed or reshaped methods.
    pub safe_removal: bool,
}

/// Computes `H` between two versions with the four rules only. Both must
/// build a valid hierarchy.
pub fn diff_methods(old: &[SourceUnit], new: &[SourceUnit]) -> Result<ChangeSet, DiffError> {
    diff_methods_with(old, new, DiffOptions::default())
}

pub fn diff_methods_with(old: &[SourceUnit], new: &[SourceUnit], options: DiffOptions) -> Result<ChangeSet, DiffError> {
    let old_h = build_hierarchy(old).map_err(DiffError::Old)?;
    let new_h = build_hierarchy(new).map_err(DiffError::New)?;
    let old_v = Version::new(old, old_h);
    let new_v = Version::new(new, new_h);
    let mut h = ChangeSet::default();

    // Rule 1
    for (id, before) in &old_v.methods {
        let Some(after) = new_v.methods.get(id) else { continue };
        if before.tokens != after.tokens {
            h.mark(id.clone(), ChangeKind::BodyChanged);
        }
        if before.modifiers != after.modifiers {
            h.mark(id.clone(), ChangeKind::ModifiersChanged);
        }
        if before.throws != after.throws {
            h.mark(id.clone(), ChangeKind::ThrowsChanged);
        }
    }

    let added: Vec<&MethodId> = new_v.methods.keys().filter(|id| !old_v.has(id)).collect();

    // Rule 2
    for (id, before) in &old_v.methods {
        if new_v.has(id) {
            continue;
        }
        let reshaped = added.iter().any(|a| {
            a.class == id.class
                && a.is_ctor == id.is_ctor
                && (a.name == id.name || new_v.methods[*a].tokens == before.tokens && !before.tokens.is_empty())
        });
        h.mark(id.clone(), if reshaped { ChangeKind::NameOrArgsChanged } else { ChangeKind::Removed });
        if options.safe_removal && !id.is_ctor {
            for sub in old_v.hierarchy.descendants(&id.class) {
                for beta in old_v.hierarchy.declared(&sub) {
                    if !beta.is_ctor && beta.name == id.name && beta.params == id.params && new_v.has(beta) {
                        h.mark(beta.clone(), ChangeKind::BaseRemoved);
                    }
                }
            }
        }
    }

    let nh = &new_v.hierarchy;
    for alpha in &added {
        // Rule 3
        if !alpha.is_ctor {
            for anc in nh.ancestors(&alpha.class) {
                for beta in nh.declared(&anc) {
                    if !beta.is_ctor && beta.name == alpha.name && beta.params == alpha.params && old_v.has(beta) {
                        h.mark(beta.clone(), ChangeKind::OverriddenByNew);
                    }
                }
            }
        }
        // Rule 4
        let family =
            std::iter::once(alpha.class.clone()).chain(nh.ancestors(&alpha.class)).chain(nh.descendants(&alpha.class));
        for class in family {
            for beta in nh.declared(&class) {
                let shadows = beta.is_ctor == alpha.is_ctor
                    && beta.name == alpha.name
                    && beta.params.len() == alpha.params.len()
                    && beta.params != alpha.params
                    && beta.params.iter().zip(&alpha.params).all(|(b, a)| nh.related(a, b));
                if shadows && old_v.has(beta) {
                    h.mark(beta.clone(), ChangeKind::OverloadShadowedByNew);
                }
            }
        }
    }

    // A class whose superclass changed: its own methods behave differently
    // (constructor chaining, inherited lookups), and methods of both the old
    // and new ancestor chains may be bypassed or newly reached by dispatch.
    for (class, old_parent) in &old_v.hierarchy.parent {
        let Some(new_parent) = nh.parent.get(class) else { continue };
        if old_parent == new_parent {
            continue;
        }
        for id in old_v.hierarchy.declared(class) {
            if new_v.has(id) {
                h.mark(id.clone(), ChangeKind::BodyChanged);
            }
        }
        let mut chains: BTreeSet<String> = old_v.hierarchy.ancestors(class).into_iter().collect();
        chains.extend(nh.ancestors(class));
        for anc in chains {
            for id in old_v.hierarchy.declared(&anc) {
                if !id.is_ctor && new_v.has(id) {
                    h.mark(id.clone(), ChangeKind::OverriddenByNew);
                }
            }
        }
    }

    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FileDelta {
    pub added: BTreeSet<String>,
    pub removed: BTreeSet<String>,
    pub changed: BTreeSet<String>,
}

impl FileDelta {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed.is_empty()
    }
}

/// Partitions paths by presence and digest equality.
pub fn file_delta(old: &BTreeMap<String, String>, new: &BTreeMap<String, String>) -> FileDelta {
    let mut delta = FileDelta::default();
    for (path, digest) in new {
        match old.get(path) {
            None => {
                delta.added.insert(path.clone());
            }
            Some(d) if d != digest => {
                delta.changed.insert(path.clone());
            }
            Some(_) => {}
        }
    }
    for path in old.keys() {
        if !new.contains_key(path) {
            delta.removed.insert(path.clone());
        }
    }
    delta
}
