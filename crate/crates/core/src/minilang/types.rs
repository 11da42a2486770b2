use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Names that cannot be used for user classes. `V` is kept free so that the
/// `V` return marker of trace records stays unambiguous.
pub const RESERVED_TYPE_NAMES: [&str; 5] = ["Int", "Bool", "String", "Object", "V"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeName {
    Int,
    Bool,
    String,
    Object,
    Class(String),
}

impl TypeName {
    pub fn from_ident(name: &str) -> TypeName {
        match name {
            "Int" => TypeName::Int,
            "Bool" => TypeName::Bool,
            "String" => TypeName::String,
            "Object" => TypeName::Object,
            other => TypeName::Class(other.to_string()),
        }
    }

    pub fn is_reference(&self) -> bool {
        !matches!(self, TypeName::Int | TypeName::Bool)
    }

    pub fn as_str(&self) -> &str {
        match self {
            TypeName::Int => "Int",
            TypeName::Bool => "Bool",
            TypeName::String => "String",
            TypeName::Object => "Object",
            TypeName::Class(name) => name,
        }
    }
}

impl fmt::Display for TypeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Compile-time type of an expression. `Null` is the type of the `null`
/// literal and is assignable to every reference type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StaticType {
    Null,
    Void,
    Of(TypeName),
}

impl fmt::Display for StaticType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StaticType::Null => f.write_str("null"),
            StaticType::Void => f.write_str("void"),
            StaticType::Of(t) => t.fmt(f),
        }
    }
}

/// Version-independent identity of a method.
///
/// Renders as `Class.method(T1,T2)Ret`; the return type is omitted for
/// `void` methods and constructors, so `A.A()`, `A.foo()` and
/// `A.bar(Object)` come out exactly as written in map listings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MethodId {
    pub class: String,
    pub name: String,
    pub params: Vec<TypeName>,
    pub ret: Option<TypeName>,
    pub is_ctor: bool,
}

impl MethodId {
    pub fn method(class: &str, name: &str, params: Vec<TypeName>, ret: Option<TypeName>) -> Self {
        MethodId { class: class.into(), name: name.into(), params, ret, is_ctor: false }
    }

    pub fn ctor(class: &str, params: Vec<TypeName>) -> Self {
        MethodId { class: class.into(), name: class.into(), params, ret: None, is_ctor: true }
    }

    /// `name(P1,P2)` without class or return type; the dispatch key.
    pub fn selector(&self) -> String {
        format!("{}({})", self.name, join_types(&self.params))
    }
}

pub(crate) fn join_types(types: &[TypeName]) -> String {
    types.iter().map(TypeName::as_str).collect::<Vec<_>>().join(",")
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}({})", self.class, self.name, join_types(&self.params))?;
        if let Some(ret) = &self.ret {
            write!(f, "{ret}")?;
        }
        Ok(())
    }
}

impl Ord for MethodId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_string().cmp(&other.to_string()).then_with(|| self.is_ctor.cmp(&other.is_ctor))
    }
}

impl PartialOrd for MethodId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed method signature `{0}`")]
pub struct SignatureError(pub String);

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn split_signature(text: &str) -> Option<(&str, &str, Vec<TypeName>, &str)> {
    let open = text.find('(')?;
    let close = text[open..].find(')')? + open;
    let (class, name) = text[..open].split_once('.')?;
    if !is_ident(class) || !is_ident(name) {
        return None;
    }
    let inner = &text[open + 1..close];
    let params = if inner.is_empty() {
        Vec::new()
    } else {
        let mut out = Vec::new();
        for p in inner.split(',') {
            if !is_ident(p) {
                return None;
            }
            out.push(TypeName::from_ident(p));
        }
        out
    };
    Some((class, name, params, &text[close + 1..]))
}

impl FromStr for MethodId {
    type Err = SignatureError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = || SignatureError(text.to_string());
        let (class, name, params, rest) = split_signature(text).ok_or_else(bad)?;
        let is_ctor = class == name;
        let ret = match rest {
            "" => None,
            r if is_ident(r) && !is_ctor && r != "V" => Some(TypeName::from_ident(r)),
            _ => return Err(bad()),
        };
        Ok(MethodId { class: class.into(), name: name.into(), params, ret, is_ctor })
    }
}

/// Parses a trace record line (`Class.method(T1)Ret`, `V` for void) back
/// into the target method.
pub fn parse_record_line(text: &str) -> Result<MethodId, SignatureError> {
    let bad = || SignatureError(text.to_string());
    let (class, name, params, rest) = split_signature(text).ok_or_else(bad)?;
    let is_ctor = class == name;
    let ret = match rest {
        "V" => None,
        r if is_ident(r) && !is_ctor => Some(TypeName::from_ident(r)),
        _ => return Err(bad()),
    };
    Ok(MethodId { class: class.into(), name: name.into(), params, ret, is_ctor })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_like_map_listings() {
        assert_eq!(MethodId::ctor("A", vec![]).to_string(), "A.A()");
        assert_eq!(MethodId::method("A", "foo", vec![], None).to_string(), "A.foo()");
        assert_eq!(MethodId::method("A", "bar", vec![TypeName::Object], None).to_string(), "A.bar(Object)");
        assert_eq!(
            MethodId::method("C", "add", vec![TypeName::Int, TypeName::Int], Some(TypeName::Int)).to_string(),
            "C.add(Int,Int)Int"
        );
    }

    #[test]
    fn parse_inverts_display() {
        for text in ["A.A()", "A.foo()", "A.bar(Object)", "C.add(Int,Int)Int", "B.B(String,A)", "K.get()K"] {
            let id: MethodId = text.parse().unwrap();
            assert_eq!(id.to_string(), text);
        }
        assert!(MethodId::from_str("B.B()").unwrap().is_ctor);
    }

    #[test]
    fn rejects_garbage() {
        for text in ["", "A", "A.", "A.f(", "A.f(Int,)", "A.f()V", "A.A()Int", "1.f()", "A.f() Int"] {
            assert!(text.parse::<MethodId>().is_err(), "{text}");
        }
    }

    #[test]
    fn record_lines() {
        let id = parse_record_line("A.bar(Object)V").unwrap();
        assert_eq!(id, MethodId::method("A", "bar", vec![TypeName::Object], None));
        assert!(parse_record_line("B.B()V").unwrap().is_ctor);
        assert!(parse_record_line("A.bar(Object)").is_err());
    }

    #[test]
    fn order_follows_rendering() {
        let a = MethodId::method("A", "foo", vec![], None);
        let b = MethodId::method("A", "bar", vec![TypeName::Object], None);
        assert!(b < a);
    }
}
