use std::collections::{BTreeMap, BTreeSet};

use super::ast::{MethodDecl, SourceUnit};
use super::error::{HierarchyError, ResolveError};
use super::parser::unique_class_names;
use super::types::{MethodId, StaticType, TypeName};

/// Superclass relation plus the methods each class declares itself
/// (inherited methods are not copied down). A class with no `extends`
/// clause has the implicit root `Object` as parent, stored as `None`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassHierarchy {
    pub parent: BTreeMap<String, Option<String>>,
    pub method_table: BTreeMap<String, Vec<MethodId>>,
}

/// Builds the hierarchy over every class of every unit. Classes without a
/// declared constructor get the implicit no-argument one in their table.
pub fn build_hierarchy(units: &[SourceUnit]) -> Result<ClassHierarchy, HierarchyError> {
    unique_class_names(units).map_err(|(class, first, second)| HierarchyError::DuplicateClass {
        class,
        first,
        second,
    })?;
    let mut h = ClassHierarchy::default();
    for class in units.iter().flat_map(|u| &u.classes) {
        h.parent.insert(class.name.clone(), class.superclass.clone());
        let mut table: Vec<MethodId> = class.methods.iter().map(|m| m.id(&class.name)).collect();
        if !class.has_declared_ctor() {
            table.insert(0, MethodDecl::implicit_ctor(class).id(&class.name));
        }
        h.method_table.insert(class.name.clone(), table);
    }
    for (class, parent) in &h.parent {
        if let Some(p) = parent {
            if !h.parent.contains_key(p) {
                return Err(HierarchyError::UnknownSuperclass { class: class.clone(), superclass: p.clone() });
            }
        }
    }
    for start in h.parent.keys() {
        let mut path = vec![start.clone()];
        let mut cur = h.parent[start].clone();
        while let Some(c) = cur {
            if path.contains(&c) {
                path.push(c);
                let from = path.iter().position(|x| *x == path[path.len() - 1]).unwrap();
                return Err(HierarchyError::Cycle(path[from..].to_vec()));
            }
            path.push(c.clone());
            cur = h.parent[&c].clone();
        }
    }
    Ok(h)
}

impl ClassHierarchy {
    pub fn contains(&self, class: &str) -> bool {
        self.parent.contains_key(class)
    }

    pub fn parent_of(&self, class: &str) -> Option<&str> {
        self.parent.get(class).and_then(|p| p.as_deref())
    }

    /// Strict ancestors, nearest first. `Object` is not included.
    pub fn ancestors(&self, class: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = self.parent_of(class);
        while let Some(c) = cur {
            out.push(c.to_string());
            cur = self.parent_of(c);
        }
        out
    }

    /// Strict descendants in name order.
    pub fn descendants(&self, class: &str) -> Vec<String> {
        self.parent
            .keys()
            .filter(|c| c.as_str() != class && self.ancestors(c).iter().any(|a| a == class))
            .cloned()
            .collect()
    }

    pub fn is_subclass(&self, sub: &str, sup: &str) -> bool {
        sub == sup || self.ancestors(sub).iter().any(|a| a == sup)
    }

    /// Reflexive subtype relation. `Object` is the top of reference types;
    /// `String` and every declared class sit directly or transitively below it.
    pub fn is_subtype(&self, sub: &TypeName, sup: &TypeName) -> bool {
        match (sub, sup) {
            (a, b) if a == b => true,
            (a, TypeName::Object) => a.is_reference(),
            (TypeName::Class(a), TypeName::Class(b)) => self.is_subclass(a, b),
            _ => false,
        }
    }

    /// Subtyping in either direction, equality included.
    pub fn related(&self, a: &TypeName, b: &TypeName) -> bool {
        self.is_subtype(a, b) || self.is_subtype(b, a)
    }

    pub fn is_assignable(&self, from: &StaticType, to: &TypeName) -> bool {
        match from {
            StaticType::Null => to.is_reference(),
            StaticType::Void => false,
            StaticType::Of(t) => self.is_subtype(t, to),
        }
    }

    pub fn declared(&self, class: &str) -> &[MethodId] {
        self.method_table.get(class).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Methods named `name` visible on `class`: its own plus inherited ones
    /// that no closer class overrides. Constructors are excluded.
    pub fn visible_methods(&self, class: &str, name: &str) -> Vec<MethodId> {
        let mut seen: BTreeSet<Vec<TypeName>> = BTreeSet::new();
        let mut out = Vec::new();
        let chain = std::iter::once(class.to_string()).chain(self.ancestors(class));
        for c in chain {
            for m in self.declared(&c) {
                if !m.is_ctor && m.name == name && seen.insert(m.params.clone()) {
                    out.push(m.clone());
                }
            }
        }
        out
    }

    pub fn constructors(&self, class: &str) -> Vec<MethodId> {
        self.declared(class).iter().filter(|m| m.is_ctor).cloned().collect()
    }

    /// Walks from `class` upward to the first declaration with the given
    /// name and parameter types.
    pub fn lookup(&self, class: &str, name: &str, params: &[TypeName]) -> Option<MethodId> {
        std::iter::once(class.to_string()).chain(self.ancestors(class)).find_map(|c| {
            self.declared(&c).iter().find(|m| !m.is_ctor && m.name == name && m.params == params).cloned()
        })
    }

    /// Compile-time overload resolution for a call `recv.name(args)` where
    /// `recv` has static type `receiver`.
    pub fn resolve_static_call(
        &self,
        receiver: &str,
        name: &str,
        args: &[StaticType],
    ) -> Result<MethodId, ResolveError> {
        let candidates = self.visible_methods(receiver, name);
        self.most_specific(receiver, name, candidates, args)
    }

    pub fn resolve_constructor(&self, class: &str, args: &[StaticType]) -> Result<MethodId, ResolveError> {
        self.most_specific(class, class, self.constructors(class), args)
    }

    fn most_specific(
        &self,
        receiver: &str,
        name: &str,
        candidates: Vec<MethodId>,
        args: &[StaticType],
    ) -> Result<MethodId, ResolveError> {
        let applicable: Vec<MethodId> = candidates
            .into_iter()
            .filter(|m| {
                m.params.len() == args.len() && args.iter().zip(&m.params).all(|(a, p)| self.is_assignable(a, p))
            })
            .collect();
        if applicable.is_empty() {
            return Err(ResolveError::NoApplicableMethod { receiver: receiver.into(), name: name.into() });
        }
        let at_least_as_specific =
            |a: &MethodId, b: &MethodId| a.params.iter().zip(&b.params).all(|(x, y)| self.is_subtype(x, y));
        let best: Vec<&MethodId> =
            applicable.iter().filter(|a| applicable.iter().all(|b| at_least_as_specific(a, b))).collect();
        match best.as_slice() {
            [one] => Ok((*one).clone()),
            _ => {
                let maximal: Vec<String> = applicable
                    .iter()
                    .filter(|a| !applicable.iter().any(|b| b != *a && at_least_as_specific(b, a)))
                    .map(|m| m.to_string())
                    .collect();
                Err(ResolveError::AmbiguousCall { receiver: receiver.into(), name: name.into(), candidates: maximal })
            }
        }
    }
}
