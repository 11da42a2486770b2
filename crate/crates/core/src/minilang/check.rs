//! Static checking. A program that passes is lowered into a small resolved
//! form: every local has a slot, every call site is bound to a method by
//! compile-time overload resolution, and instance calls carry the selector
//! used for dynamic dispatch at run time.

use std::collections::HashMap;
use std::sync::Arc;

use super::ast::*;
use super::error::{ProgramError, StaticCheckError};
use super::hierarchy::{build_hierarchy, ClassHierarchy};
use super::lexer::Pos;
use super::types::{MethodId, StaticType, TypeName};

pub type MethodIdx = usize;
pub type SelectorIdx = usize;

#[derive(Debug)]
pub struct CheckedProgram {
    pub hierarchy: ClassHierarchy,
    pub(crate) methods: Vec<LoweredMethod>,
    pub(crate) classes: HashMap<String, RtClass>,
    index: HashMap<MethodId, MethodIdx>,
    selectors: HashMap<String, SelectorIdx>,
}

#[derive(Debug)]
pub(crate) struct RtClass {
    /// Every field including inherited ones, root-most class first.
    pub fields: Vec<(Arc<str>, TypeName)>,
    pub vtable: HashMap<SelectorIdx, MethodIdx>,
}

#[derive(Debug)]
pub(crate) struct LoweredMethod {
    pub id: MethodId,
    pub is_static: bool,
    pub param_count: usize,
    pub slots: usize,
    pub body: Vec<IrStmt>,
}

/// A test body checked against a program.
#[derive(Debug)]
pub struct LoweredTest {
    pub name: String,
    pub(crate) slots: usize,
    pub(crate) body: Vec<IrStmt>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug)]
pub(crate) enum IrExpr {
    Int(i64),
    Bool(bool),
    Str(Arc<str>),
    Null,
    This,
    Local(usize),
    Field(Box<IrExpr>, Arc<str>),
    New { class: Arc<str>, ctor: MethodIdx, args: Vec<IrExpr> },
    Virtual { recv: Box<IrExpr>, selector: SelectorIdx, args: Vec<IrExpr>, pos: Pos },
    Direct { recv: Option<Box<IrExpr>>, method: MethodIdx, args: Vec<IrExpr> },
    Neg(Box<IrExpr>),
    Not(Box<IrExpr>),
    Arith(ArithOp, Box<IrExpr>, Box<IrExpr>, Pos),
    Concat(Box<IrExpr>, Box<IrExpr>),
    Compare(CmpOp, Box<IrExpr>, Box<IrExpr>),
    Equal { negate: bool, lhs: Box<IrExpr>, rhs: Box<IrExpr> },
    And(Box<IrExpr>, Box<IrExpr>),
    Or(Box<IrExpr>, Box<IrExpr>),
}

#[derive(Debug)]
pub(crate) enum Place {
    Local(usize),
    Field(IrExpr, Arc<str>),
}

#[derive(Debug)]
pub(crate) enum IrStmt {
    Block(Vec<IrStmt>),
    Let(usize, IrExpr),
    Assign(Place, IrExpr),
    Step(Place, i64),
    If(IrExpr, Box<IrStmt>, Option<Box<IrStmt>>),
    While(IrExpr, Box<IrStmt>),
    Return(Option<IrExpr>),
    Print(IrExpr),
    Assert(IrExpr, Pos),
    SuperCtor(MethodIdx, Vec<IrExpr>),
    Expr(IrExpr),
}

fn err<T>(pos: Pos, message: impl Into<String>) -> Result<T, StaticCheckError> {
    Err(StaticCheckError::new(pos, message))
}

/// Builds the hierarchy and statically checks every class of the program.
pub fn check_program(units: &[SourceUnit]) -> Result<CheckedProgram, ProgramError> {
    let hierarchy = build_hierarchy(units)?;
    let decls: HashMap<&str, &ClassDecl> =
        units.iter().flat_map(|u| &u.classes).map(|c| (c.name.as_str(), c)).collect();

    let mut prog = CheckedProgram {
        hierarchy,
        methods: Vec::new(),
        classes: HashMap::new(),
        index: HashMap::new(),
        selectors: HashMap::new(),
    };

    // Declarations first so bodies can reference any method.
    let mut bodies: Vec<(MethodIdx, &ClassDecl, Option<&MethodDecl>)> = Vec::new();
    let mut class_names: Vec<&str> = decls.keys().copied().collect();
    class_names.sort_unstable();
    for &name in &class_names {
        let class = decls[name];
        check_types_in_class(&prog.hierarchy, class)?;
        if !class.has_declared_ctor() {
            let idx = prog.push_method(MethodDecl::implicit_ctor(class).id(name), false, 0);
            bodies.push((idx, class, None));
        }
        for m in &class.methods {
            let idx = prog.push_method(m.id(name), m.is_static(), m.params.len());
            bodies.push((idx, class, Some(m)));
        }
    }

    for &name in &class_names {
        let class = decls[name];
        let mut fields: Vec<(Arc<str>, TypeName)> = Vec::new();
        let chain: Vec<String> =
            prog.hierarchy.ancestors(name).into_iter().rev().chain(std::iter::once(name.to_string())).collect();
        for c in &chain {
            for f in &decls[c.as_str()].fields {
                if fields.iter().any(|(n, _)| **n == *f.name) {
                    return Err(StaticCheckError::new(
                        f.pos,
                        format!("field {}.{} hides an inherited field", c, f.name),
                    )
                    .into());
                }
                fields.push((f.name.as_str().into(), f.ty.clone()));
            }
        }
        let mut vtable = HashMap::new();
        for c in &chain {
            for id in prog.hierarchy.declared(c).to_vec() {
                if id.is_ctor {
                    continue;
                }
                let sel = prog.selector(&id);
                vtable.insert(sel, prog.index[&id]);
            }
        }
        prog.classes.insert(name.to_string(), RtClass { fields, vtable });

        // overriding must keep the return type and static-ness
        for m in class.methods.iter().filter(|m| !m.is_ctor) {
            for anc in prog.hierarchy.ancestors(name) {
                let Some(prev) = decls[anc.as_str()]
                    .methods
                    .iter()
                    .find(|p| !p.is_ctor && p.name == m.name && p.param_types() == m.param_types())
                else {
                    continue;
                };
                if prev.ret != m.ret || prev.is_static() != m.is_static() {
                    let message = format!(
                        "{} overrides {} with a different return type or static modifier",
                        m.id(name),
                        prev.id(&anc)
                    );
                    return Err(StaticCheckError::new(m.pos, message).into());
                }
                break;
            }
        }
    }

    for (idx, class, decl) in bodies {
        let lowered = match decl {
            Some(m) => {
                let mut ctx = Ctx::new(&prog, Some(class.name.as_str()), m.is_static(), m.ret.clone(), m.is_ctor);
                for p in &m.params {
                    ctx.declare(&p.name, p.ty.clone(), m.pos)?;
                }
                let mut body = ctx.block_stmts(&m.body)?;
                if m.is_ctor {
                    ctx.ctor_prologue(class, m.pos, &mut body)?;
                }
                (body, ctx.max_slots)
            }
            None => {
                let ctx = Ctx::new(&prog, Some(class.name.as_str()), false, None, true);
                let mut body = Vec::new();
                ctx.ctor_prologue(class, class.pos, &mut body)?;
                (body, 0)
            }
        };
        prog.methods[idx].body = lowered.0;
        prog.methods[idx].slots = lowered.1;
    }
    Ok(prog)
}

fn check_types_in_class(h: &ClassHierarchy, class: &ClassDecl) -> Result<(), StaticCheckError> {
    let known = |t: &TypeName, pos: Pos| match t {
        TypeName::Class(c) if !h.contains(c) => err(pos, format!("unknown type {c}")),
        _ => Ok(()),
    };
    for f in &class.fields {
        known(&f.ty, f.pos)?;
    }
    for m in &class.methods {
        for p in &m.params {
            known(&p.ty, m.pos)?;
        }
        if let Some(r) = &m.ret {
            known(r, m.pos)?;
        }
    }
    Ok(())
}

impl CheckedProgram {
    fn push_method(&mut self, id: MethodId, is_static: bool, param_count: usize) -> MethodIdx {
        let idx = self.methods.len();
        self.selector(&id);
        self.index.insert(id.clone(), idx);
        self.methods.push(LoweredMethod { id, is_static, param_count, slots: param_count, body: Vec::new() });
        idx
    }

    fn selector(&mut self, id: &MethodId) -> SelectorIdx {
        let key = id.selector();
        let next = self.selectors.len();
        *self.selectors.entry(key).or_insert(next)
    }

    pub fn method_index(&self, id: &MethodId) -> Option<MethodIdx> {
        self.index.get(id).copied()
    }

    /// All methods of the program, constructors included.
    pub fn universe(&self) -> impl Iterator<Item = &MethodId> {
        self.methods.iter().map(|m| &m.id)
    }

    fn field_type(&self, class: &str, field: &str) -> Option<&TypeName> {
        self.classes.get(class)?.fields.iter().find(|(n, _)| **n == *field).map(|(_, t)| t)
    }

    /// Checks a test body against this program.
    pub fn lower_test(&self, test: &TestDecl) -> Result<LoweredTest, StaticCheckError> {
        let mut ctx = Ctx::new(self, None, true, None, false);
        let body = ctx.block_stmts(&test.body)?;
        Ok(LoweredTest { name: test.name.clone(), slots: ctx.max_slots, body })
    }
}

struct Ctx<'p> {
    prog: &'p CheckedProgram,
    class: Option<&'p str>,
    is_static: bool,
    ret: Option<TypeName>,
    is_ctor: bool,
    scopes: Vec<HashMap<String, (usize, TypeName)>>,
    next_slot: usize,
    max_slots: usize,
}

impl<'p> Ctx<'p> {
    fn new(
        prog: &'p CheckedProgram,
        class: Option<&'p str>,
        is_static: bool,
        ret: Option<TypeName>,
        is_ctor: bool,
    ) -> Self {
        Ctx { prog, class, is_static, ret, is_ctor, scopes: vec![HashMap::new()], next_slot: 0, max_slots: 0 }
    }

    fn h(&self) -> &'p ClassHierarchy {
        &self.prog.hierarchy
    }

    fn declare(&mut self, name: &str, ty: TypeName, pos: Pos) -> Result<usize, StaticCheckError> {
        if self.local(name).is_some() {
            return err(pos, format!("variable {name} is already defined"));
        }
        if let TypeName::Class(c) = &ty {
            if !self.h().contains(c) {
                return err(pos, format!("unknown type {c}"));
            }
        }
        let slot = self.next_slot;
        self.next_slot += 1;
        self.max_slots = self.max_slots.max(self.next_slot);
        self.scopes.last_mut().unwrap().insert(name.to_string(), (slot, ty));
        Ok(slot)
    }

    fn local(&self, name: &str) -> Option<&(usize, TypeName)> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn this_field(&self, name: &str) -> Option<TypeName> {
        if self.is_static {
            return None;
        }
        self.prog.field_type(self.class?, name).cloned()
    }

    /// Implicit or explicit superclass constructor call at the top of a
    /// constructor body.
    fn ctor_prologue(&self, class: &ClassDecl, pos: Pos, body: &mut Vec<IrStmt>) -> Result<(), StaticCheckError> {
        let explicit = matches!(body.first(), Some(IrStmt::SuperCtor(..)));
        if explicit {
            return Ok(());
        }
        if let Some(parent) = &class.superclass {
            let ctor = self
                .h()
                .resolve_constructor(parent, &[])
                .map_err(|e| StaticCheckError::new(pos, format!("implicit super() in {}: {e}", class.name)))?;
            body.insert(0, IrStmt::SuperCtor(self.prog.index[&ctor], Vec::new()));
        }
        Ok(())
    }

    fn block_stmts(&mut self, block: &Block) -> Result<Vec<IrStmt>, StaticCheckError> {
        self.scopes.push(HashMap::new());
        let saved = self.next_slot;
        let mut out = Vec::with_capacity(block.stmts.len());
        for (i, s) in block.stmts.iter().enumerate() {
            if let StmtKind::SuperCall(args) = &s.kind {
                let top_level_first = i == 0 && self.scopes.len() == 2;
                if !self.is_ctor || !top_level_first {
                    return err(s.pos, "super(...) is only allowed as the first statement of a constructor");
                }
                out.push(self.super_call(args, s.pos)?);
                continue;
            }
            out.push(self.stmt(s)?);
        }
        self.scopes.pop();
        self.next_slot = saved;
        Ok(out)
    }

    fn super_call(&mut self, args: &[Expr], pos: Pos) -> Result<IrStmt, StaticCheckError> {
        let class = self.class.expect("constructors live in classes");
        let Some(parent) = self.h().parent_of(class) else {
            return err(pos, format!("{class} has no superclass constructor to call"));
        };
        let (args, types) = self.args(args)?;
        let ctor =
            self.h().resolve_constructor(parent, &types).map_err(|e| StaticCheckError::new(pos, e.to_string()))?;
        Ok(IrStmt::SuperCtor(self.prog.index[&ctor], args))
    }

    fn nested(&mut self, s: &Stmt) -> Result<IrStmt, StaticCheckError> {
        // a lone statement in a branch still gets its own scope
        match &s.kind {
            StmtKind::Block(_) => self.stmt(s),
            _ => Ok(IrStmt::Block(self.block_stmts(&Block { stmts: vec![s.clone()] })?)),
        }
    }

    fn stmt(&mut self, s: &Stmt) -> Result<IrStmt, StaticCheckError> {
        Ok(match &s.kind {
            StmtKind::Block(b) => IrStmt::Block(self.block_stmts(b)?),
            StmtKind::Local { ty, name, init } => {
                let value = match init {
                    Some(e) => {
                        let (v, t) = self.expr(e)?;
                        self.expect_assignable(&t, ty, e.pos)?;
                        v
                    }
                    None => default_value(ty),
                };
                let slot = self.declare(name, ty.clone(), s.pos)?;
                IrStmt::Let(slot, value)
            }
            StmtKind::Assign { target, value } => {
                let (place, ty) = self.place(target)?;
                let (v, t) = self.expr(value)?;
                self.expect_assignable(&t, &ty, value.pos)?;
                IrStmt::Assign(place, v)
            }
            StmtKind::Step { target, op } => {
                let (place, ty) = self.place(target)?;
                if ty != TypeName::Int {
                    return err(s.pos, format!("++/-- needs an Int, found {ty}"));
                }
                IrStmt::Step(place, if *op == StepOp::Inc { 1 } else { -1 })
            }
            StmtKind::If { cond, then, otherwise } => {
                let c = self.condition(cond)?;
                let t = self.nested(then)?;
                let o = match otherwise {
                    Some(o) => Some(Box::new(self.nested(o)?)),
                    None => None,
                };
                IrStmt::If(c, Box::new(t), o)
            }
            StmtKind::While { cond, body } => {
                let c = self.condition(cond)?;
                IrStmt::While(c, Box::new(self.nested(body)?))
            }
            StmtKind::Return(value) => match (value, self.ret.clone()) {
                (None, None) => IrStmt::Return(None),
                (Some(e), Some(rt)) => {
                    let (v, t) = self.expr(e)?;
                    self.expect_assignable(&t, &rt, e.pos)?;
                    IrStmt::Return(Some(v))
                }
                (Some(e), None) => return err(e.pos, "cannot return a value here"),
                (None, Some(rt)) => return err(s.pos, format!("missing return value of type {rt}")),
            },
            StmtKind::Print(e) => {
                let (v, t) = self.expr(e)?;
                if t == StaticType::Void {
                    return err(e.pos, "cannot print a void value");
                }
                IrStmt::Print(v)
            }
            StmtKind::Assert(e) => IrStmt::Assert(self.condition(e)?, s.pos),
            StmtKind::SuperCall(_) => {
                return err(s.pos, "super(...) is only allowed as the first statement of a constructor")
            }
            StmtKind::Expr(e) => {
                if !matches!(e.kind, ExprKind::Call { .. } | ExprKind::New { .. }) {
                    return err(e.pos, "only calls and object creation can be used as statements");
                }
                IrStmt::Expr(self.expr(e)?.0)
            }
        })
    }

    fn condition(&mut self, e: &Expr) -> Result<IrExpr, StaticCheckError> {
        let (v, t) = self.expr(e)?;
        if t != StaticType::Of(TypeName::Bool) {
            return err(e.pos, format!("expected Bool, found {t}"));
        }
        Ok(v)
    }

    fn expect_assignable(&self, from: &StaticType, to: &TypeName, pos: Pos) -> Result<(), StaticCheckError> {
        if self.h().is_assignable(from, to) {
            Ok(())
        } else {
            err(pos, format!("expected {to}, found {from}"))
        }
    }

    fn place(&mut self, target: &Expr) -> Result<(Place, TypeName), StaticCheckError> {
        match &target.kind {
            ExprKind::Name(n) => {
                if let Some((slot, ty)) = self.local(n) {
                    return Ok((Place::Local(*slot), ty.clone()));
                }
                if let Some(ty) = self.this_field(n) {
                    return Ok((Place::Field(IrExpr::This, n.as_str().into()), ty));
                }
                err(target.pos, format!("unknown variable {n}"))
            }
            ExprKind::Field { target: obj, name } => {
                let (o, t) = self.expr(obj)?;
                let ty = self.field_of(&t, name, target.pos)?;
                Ok((Place::Field(o, name.as_str().into()), ty))
            }
            _ => err(target.pos, "not assignable"),
        }
    }

    fn field_of(&self, owner: &StaticType, name: &str, pos: Pos) -> Result<TypeName, StaticCheckError> {
        match owner {
            StaticType::Of(TypeName::Class(c)) => match self.prog.field_type(c, name) {
                Some(t) => Ok(t.clone()),
                None => err(pos, format!("{c} has no field {name}")),
            },
            other => err(pos, format!("{other} has no fields")),
        }
    }

    fn args(&mut self, args: &[Expr]) -> Result<(Vec<IrExpr>, Vec<StaticType>), StaticCheckError> {
        let mut values = Vec::with_capacity(args.len());
        let mut types = Vec::with_capacity(args.len());
        for a in args {
            let (v, t) = self.expr(a)?;
            if t == StaticType::Void {
                return err(a.pos, "void value used as an argument");
            }
            values.push(v);
            types.push(t);
        }
        Ok((values, types))
    }

    fn call_result(id: &MethodId) -> StaticType {
        id.ret.clone().map(StaticType::Of).unwrap_or(StaticType::Void)
    }

    fn bind(
        &mut self,
        recv: Option<IrExpr>,
        receiver_class: &str,
        name: &str,
        args: &[Expr],
        pos: Pos,
        require_static: bool,
    ) -> Result<(IrExpr, StaticType), StaticCheckError> {
        let (args, types) = self.args(args)?;
        let id = self
            .h()
            .resolve_static_call(receiver_class, name, &types)
            .map_err(|e| StaticCheckError::new(pos, e.to_string()))?;
        let idx = self.prog.index[&id];
        let is_static = self.prog.methods[idx].is_static;
        let result = Self::call_result(&id);
        if is_static {
            return Ok((IrExpr::Direct { recv: recv.map(Box::new), method: idx, args }, result));
        }
        if require_static {
            return err(pos, format!("{id} is not static"));
        }
        let recv = match recv {
            Some(r) => r,
            None if self.is_static => return err(pos, format!("{id} needs an instance")),
            None => IrExpr::This,
        };
        let selector = self.prog.selectors[&id.selector()];
        Ok((IrExpr::Virtual { recv: Box::new(recv), selector, args, pos }, result))
    }

    fn expr(&mut self, e: &Expr) -> Result<(IrExpr, StaticType), StaticCheckError> {
        let of = StaticType::Of;
        Ok(match &e.kind {
            ExprKind::Int(v) => (IrExpr::Int(*v), of(TypeName::Int)),
            ExprKind::Bool(b) => (IrExpr::Bool(*b), of(TypeName::Bool)),
            ExprKind::Str(s) => (IrExpr::Str(s.as_str().into()), of(TypeName::String)),
            ExprKind::Null => (IrExpr::Null, StaticType::Null),
            ExprKind::This => match self.class {
                Some(c) if !self.is_static => (IrExpr::This, of(TypeName::Class(c.to_string()))),
                _ => return err(e.pos, "`this` is not available here"),
            },
            ExprKind::Name(n) => {
                if let Some((slot, ty)) = self.local(n) {
                    (IrExpr::Local(*slot), of(ty.clone()))
                } else if let Some(ty) = self.this_field(n) {
                    (IrExpr::Field(Box::new(IrExpr::This), n.as_str().into()), of(ty))
                } else {
                    return err(e.pos, format!("unknown variable {n}"));
                }
            }
            ExprKind::Field { target, name } => {
                let (o, t) = self.expr(target)?;
                let ty = self.field_of(&t, name, e.pos)?;
                (IrExpr::Field(Box::new(o), name.as_str().into()), of(ty))
            }
            ExprKind::Call { target: None, name, args } => {
                let Some(class) = self.class else {
                    return err(e.pos, format!("call to {name} needs a receiver outside a class"));
                };
                self.bind(None, class, name, args, e.pos, false)?
            }
            ExprKind::Call { target: Some(target), name, args } => {
                if let ExprKind::Name(n) = &target.kind {
                    let shadowed = self.local(n).is_some() || self.this_field(n).is_some();
                    if !shadowed && self.h().contains(n) {
                        return self.bind(None, &n.clone(), name, args, e.pos, true);
                    }
                }
                let (recv, t) = self.expr(target)?;
                match t {
                    StaticType::Of(TypeName::Class(c)) => self.bind(Some(recv), &c, name, args, e.pos, false)?,
                    other => return err(e.pos, format!("no applicable method {name} on {other}")),
                }
            }
            ExprKind::New { class, args } => {
                if !self.h().contains(class) {
                    return err(e.pos, format!("unknown class {class}"));
                }
                let (args, types) = self.args(args)?;
                let ctor = self
                    .h()
                    .resolve_constructor(class, &types)
                    .map_err(|er| StaticCheckError::new(e.pos, er.to_string()))?;
                (
                    IrExpr::New { class: class.as_str().into(), ctor: self.prog.index[&ctor], args },
                    of(TypeName::Class(class.clone())),
                )
            }
            ExprKind::Unary { op, operand } => {
                let (v, t) = self.expr(operand)?;
                match op {
                    UnOp::Neg if t == of(TypeName::Int) => (IrExpr::Neg(Box::new(v)), t),
                    UnOp::Not if t == of(TypeName::Bool) => (IrExpr::Not(Box::new(v)), t),
                    _ => return err(e.pos, format!("operator cannot be applied to {t}")),
                }
            }
            ExprKind::Binary { op, lhs, rhs } => self.binary(*op, lhs, rhs, e.pos)?,
        })
    }

    fn binary(
        &mut self,
        op: BinOp,
        lhs: &Expr,
        rhs: &Expr,
        pos: Pos,
    ) -> Result<(IrExpr, StaticType), StaticCheckError> {
        let (l, lt) = self.expr(lhs)?;
        let (r, rt) = self.expr(rhs)?;
        let int = StaticType::Of(TypeName::Int);
        let boolean = StaticType::Of(TypeName::Bool);
        let string = StaticType::Of(TypeName::String);
        let (l, r) = (Box::new(l), Box::new(r));
        let mismatch = || err(pos, format!("operator {} cannot be applied to {lt} and {rt}", op.symbol()));
        Ok(match op {
            BinOp::Add if (lt == string || rt == string) && lt != StaticType::Void && rt != StaticType::Void => {
                (IrExpr::Concat(l, r), string)
            }
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => {
                if lt != int || rt != int {
                    return mismatch();
                }
                let a = match op {
                    BinOp::Add => ArithOp::Add,
                    BinOp::Sub => ArithOp::Sub,
                    BinOp::Mul => ArithOp::Mul,
                    BinOp::Div => ArithOp::Div,
                    _ => ArithOp::Rem,
                };
                (IrExpr::Arith(a, l, r, pos), int)
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                if lt != int || rt != int {
                    return mismatch();
                }
                let c = match op {
                    BinOp::Lt => CmpOp::Lt,
                    BinOp::Le => CmpOp::Le,
                    BinOp::Gt => CmpOp::Gt,
                    _ => CmpOp::Ge,
                };
                (IrExpr::Compare(c, l, r), boolean)
            }
            BinOp::Eq | BinOp::Ne => {
                let comparable = match (&lt, &rt) {
                    (StaticType::Null, StaticType::Null) => true,
                    (StaticType::Null, StaticType::Of(t)) | (StaticType::Of(t), StaticType::Null) => t.is_reference(),
                    (StaticType::Of(a), StaticType::Of(b)) => {
                        a == b || (a.is_reference() && b.is_reference() && self.h().related(a, b))
                    }
                    _ => false,
                };
                if !comparable {
                    return mismatch();
                }
                (IrExpr::Equal { negate: op == BinOp::Ne, lhs: l, rhs: r }, boolean)
            }
            BinOp::And | BinOp::Or => {
                if lt != boolean || rt != boolean {
                    return mismatch();
                }
                (if op == BinOp::And { IrExpr::And(l, r) } else { IrExpr::Or(l, r) }, boolean)
            }
        })
    }
}

fn default_value(ty: &TypeName) -> IrExpr {
    match ty {
        TypeName::Int => IrExpr::Int(0),
        TypeName::Bool => IrExpr::Bool(false),
        _ => IrExpr::Null,
    }
}
