use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use crate::minilang::check::{ArithOp, CmpOp, IrExpr, IrStmt, LoweredTest, MethodIdx, Place};
use crate::minilang::error::StaticCheckError;
use crate::minilang::printer::{block_tokens, token_digest};
use crate::minilang::types::TypeName;
use crate::minilang::{CheckedProgram, TestDecl};

use super::trace::{InvocationRecord, Outcome, TestResult, Trace};

pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;
pub const DEFAULT_MAX_DEPTH: usize = 2_000;
const INTERPRETER_STACK: usize = 256 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub step_budget: u64,
    /// Record only methods whose class name starts with one of these.
    pub filter: Option<Vec<String>>,
    /// Call depth beyond which the test errors out with a stack overflow.
    pub max_depth: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { step_budget: DEFAULT_STEP_BUDGET, filter: None, max_depth: DEFAULT_MAX_DEPTH }
    }
}

impl RunConfig {
    fn records(&self, class: &str) -> bool {
        match &self.filter {
            None => true,
            Some(prefixes) => prefixes.iter().any(|p| class.starts_with(p.as_str())),
        }
    }
}

/// A test of the suite together with the digest of its canonical body.
#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub name: String,
    pub decl: TestDecl,
    pub source_digest: String,
}

impl TestCase {
    pub fn new(decl: TestDecl) -> Self {
        let source_digest = token_digest(&block_tokens(&decl.body));
        TestCase { name: decl.name.clone(), decl, source_digest }
    }
}

/// Runs one test. Static errors in the test body are reported before any
/// code executes; everything else ends up in the result's outcome.
pub fn run_test(program: &CheckedProgram, test: &TestCase, config: &RunConfig) -> Result<TestResult, StaticCheckError> {
    let lowered = program.lower_test(&test.decl)?;
    Ok(run_lowered(program, &lowered, config))
}

pub fn run_lowered(program: &CheckedProgram, test: &LoweredTest, config: &RunConfig) -> TestResult {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .name(format!("tia-test-{}", test.name))
            .stack_size(INTERPRETER_STACK)
            .spawn_scoped(s, || execute(program, test, config))
            .expect("spawn interpreter thread")
            .join()
            .expect("interpreter thread panicked")
    })
}

fn execute(program: &CheckedProgram, test: &LoweredTest, config: &RunConfig) -> TestResult {
    let mut m = Machine { prog: program, cfg: config, steps: 0, depth: 0, records: Vec::new(), output: Vec::new() };
    let mut frame = Frame { this: None, locals: vec![Value::Null; test.slots] };
    let flow = m.exec_block(&test.body, &mut frame);
    let (outcome, message) = match flow {
        Ok(_) => (Outcome::Pass, None),
        Err(Fault::Assert(msg)) => (Outcome::Fail, Some(msg)),
        Err(Fault::Runtime(msg)) => (Outcome::Error, Some(msg)),
        Err(Fault::Timeout) => (Outcome::Timeout, Some(format!("step budget of {} exhausted", config.step_budget))),
    };
    TestResult {
        test: test.name.clone(),
        outcome,
        trace: Trace { test: test.name.clone(), records: m.records },
        steps_used: m.steps,
        message,
        output: m.output,
    }
}

#[derive(Debug, Clone)]
enum Value {
    Int(i64),
    Bool(bool),
    Str(Rc<str>),
    Null,
    Obj(Rc<Object>),
}

#[derive(Debug)]
struct Object {
    class: Arc<str>,
    fields: RefCell<HashMap<Arc<str>, Value>>,
}

impl Value {
    fn runtime_type(&self) -> Option<TypeName> {
        match self {
            Value::Int(_) => Some(TypeName::Int),
            Value::Bool(_) => Some(TypeName::Bool),
            Value::Str(_) => Some(TypeName::String),
            Value::Null => None,
            Value::Obj(o) => Some(TypeName::Class(o.class.to_string())),
        }
    }

    fn render(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Str(s) => s.to_string(),
            Value::Null => "null".into(),
            Value::Obj(o) => format!("<{}>", o.class),
        }
    }
}

enum Fault {
    Assert(String),
    Runtime(String),
    Timeout,
}

enum Flow {
    Normal,
    Return(Value),
}

struct Frame {
    this: Option<Value>,
    locals: Vec<Value>,
}

struct Machine<'p> {
    prog: &'p CheckedProgram,
    cfg: &'p RunConfig,
    steps: u64,
    depth: usize,
    records: Vec<InvocationRecord>,
    output: Vec<String>,
}

type Exec<T> = Result<T, Fault>;

fn runtime<T>(msg: impl Into<String>) -> Exec<T> {
    Err(Fault::Runtime(msg.into()))
}

impl<'p> Machine<'p> {
    fn tick(&mut self) -> Exec<()> {
        self.steps += 1;
        if self.steps >= self.cfg.step_budget {
            Err(Fault::Timeout)
        } else {
            Ok(())
        }
    }

    fn exec_block(&mut self, stmts: &[IrStmt], frame: &mut Frame) -> Exec<Flow> {
        for s in stmts {
            if let Flow::Return(v) = self.exec(s, frame)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn exec(&mut self, stmt: &IrStmt, frame: &mut Frame) -> Exec<Flow> {
        self.tick()?;
        match stmt {
            IrStmt::Block(b) => return self.exec_block(b, frame),
            IrStmt::Let(slot, e) => {
                let v = self.eval(e, frame)?;
                frame.locals[*slot] = v;
            }
            IrStmt::Assign(place, e) => {
                let v = self.eval(e, frame)?;
                self.store(place, v, frame)?;
            }
            IrStmt::Step(place, delta) => {
                let bump = |v: &mut Value| match v {
                    Value::Int(n) => {
                        *n = n.wrapping_add(*delta);
                        Ok(())
                    }
                    _ => runtime("++/-- on a non-integer"),
                };
                match place {
                    Place::Local(slot) => bump(&mut frame.locals[*slot])?,
                    Place::Field(obj, name) => {
                        let o = self.object(obj, frame)?;
                        let mut fields = o.fields.borrow_mut();
                        bump(fields.get_mut(name).expect("checked field"))?;
                    }
                }
            }
            IrStmt::If(c, then, otherwise) => {
                if self.truth(c, frame)? {
                    return self.exec(then, frame);
                } else if let Some(o) = otherwise {
                    return self.exec(o, frame);
                }
            }
            IrStmt::While(c, body) => {
                while self.truth(c, frame)? {
                    if let Flow::Return(v) = self.exec(body, frame)? {
                        return Ok(Flow::Return(v));
                    }
                    self.tick()?;
                }
            }
            IrStmt::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e, frame)?,
                    None => Value::Null,
                };
                return Ok(Flow::Return(v));
            }
            IrStmt::Print(e) => {
                let v = self.eval(e, frame)?;
                self.output.push(v.render());
            }
            IrStmt::Assert(e, pos) => {
                if !self.truth(e, frame)? {
                    return Err(Fault::Assert(format!("assertion failed at {pos}")));
                }
            }
            IrStmt::SuperCtor(ctor, args) => {
                let args = self.eval_args(args, frame)?;
                self.invoke(*ctor, frame.this.clone(), args)?;
            }
            IrStmt::Expr(e) => {
                self.eval(e, frame)?;
            }
        }
        Ok(Flow::Normal)
    }

    fn store(&mut self, place: &Place, v: Value, frame: &mut Frame) -> Exec<()> {
        match place {
            Place::Local(slot) => frame.locals[*slot] = v,
            Place::Field(obj, name) => {
                let o = self.object(obj, frame)?;
                o.fields.borrow_mut().insert(name.clone(), v);
            }
        }
        Ok(())
    }

    fn object(&mut self, e: &IrExpr, frame: &mut Frame) -> Exec<Rc<Object>> {
        match self.eval(e, frame)? {
            Value::Obj(o) => Ok(o),
            Value::Null => runtime("field access on null"),
            other => runtime(format!("field access on {}", other.render())),
        }
    }

    fn truth(&mut self, e: &IrExpr, frame: &mut Frame) -> Exec<bool> {
        match self.eval(e, frame)? {
            Value::Bool(b) => Ok(b),
            _ => runtime("condition is not a Bool"),
        }
    }

    fn int(&mut self, e: &IrExpr, frame: &mut Frame) -> Exec<i64> {
        match self.eval(e, frame)? {
            Value::Int(v) => Ok(v),
            _ => runtime("operand is not an Int"),
        }
    }

    fn eval_args(&mut self, args: &[IrExpr], frame: &mut Frame) -> Exec<Vec<Value>> {
        args.iter().map(|a| self.eval(a, frame)).collect()
    }

    fn eval(&mut self, e: &IrExpr, frame: &mut Frame) -> Exec<Value> {
        Ok(match e {
            IrExpr::Int(v) => Value::Int(*v),
            IrExpr::Bool(b) => Value::Bool(*b),
            IrExpr::Str(s) => Value::Str(Rc::from(&**s)),
            IrExpr::Null => Value::Null,
            IrExpr::This => frame.this.clone().expect("checked: `this` only in instance context"),
            IrExpr::Local(slot) => frame.locals[*slot].clone(),
            IrExpr::Field(obj, name) => {
                let o = self.object(obj, frame)?;
                let v = o.fields.borrow().get(name).cloned().unwrap_or(Value::Null);
                v
            }
            IrExpr::New { class, ctor, args } => {
                let args = self.eval_args(args, frame)?;
                let fields = self.prog.classes[&**class]
                    .fields
                    .iter()
                    .map(|(name, ty)| (name.clone(), default_for(ty)))
                    .collect();
                let obj = Value::Obj(Rc::new(Object { class: class.clone(), fields: RefCell::new(fields) }));
                self.invoke(*ctor, Some(obj.clone()), args)?;
                obj
            }
            IrExpr::Virtual { recv, selector, args, pos } => {
                let target = self.eval(recv, frame)?;
                let Value::Obj(o) = &target else {
                    return runtime(format!("method call on null at {pos}"));
                };
                let method = self.prog.classes[&*o.class].vtable[selector];
                let args = self.eval_args(args, frame)?;
                self.invoke(method, Some(target), args)?
            }
            IrExpr::Direct { recv, method, args } => {
                if let Some(r) = recv {
                    self.eval(r, frame)?;
                }
                let args = self.eval_args(args, frame)?;
                self.invoke(*method, None, args)?
            }
            IrExpr::Neg(x) => Value::Int(self.int(x, frame)?.wrapping_neg()),
            IrExpr::Not(x) => Value::Bool(!self.truth(x, frame)?),
            IrExpr::Arith(op, l, r, pos) => {
                let a = self.int(l, frame)?;
                let b = self.int(r, frame)?;
                Value::Int(match op {
                    ArithOp::Add => a.wrapping_add(b),
                    ArithOp::Sub => a.wrapping_sub(b),
                    ArithOp::Mul => a.wrapping_mul(b),
                    ArithOp::Div | ArithOp::Rem if b == 0 => return runtime(format!("division by zero at {pos}")),
                    ArithOp::Div => a.wrapping_div(b),
                    ArithOp::Rem => a.wrapping_rem(b),
                })
            }
            IrExpr::Concat(l, r) => {
                let a = self.eval(l, frame)?.render();
                let b = self.eval(r, frame)?.render();
                Value::Str(Rc::from(a + &b))
            }
            IrExpr::Compare(op, l, r) => {
                let a = self.int(l, frame)?;
                let b = self.int(r, frame)?;
                Value::Bool(match op {
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                })
            }
            IrExpr::Equal { negate, lhs, rhs } => {
                let a = self.eval(lhs, frame)?;
                let b = self.eval(rhs, frame)?;
                let eq = match (&a, &b) {
                    (Value::Int(x), Value::Int(y)) => x == y,
                    (Value::Bool(x), Value::Bool(y)) => x == y,
                    (Value::Str(x), Value::Str(y)) => x == y,
                    (Value::Null, Value::Null) => true,
                    (Value::Obj(x), Value::Obj(y)) => Rc::ptr_eq(x, y),
                    _ => false,
                };
                Value::Bool(eq != *negate)
            }
            IrExpr::And(l, r) => Value::Bool(self.truth(l, frame)? && self.truth(r, frame)?),
            IrExpr::Or(l, r) => Value::Bool(self.truth(l, frame)? || self.truth(r, frame)?),
        })
    }

    fn invoke(&mut self, idx: MethodIdx, this: Option<Value>, args: Vec<Value>) -> Exec<Value> {
        self.tick()?;
        let method = &self.prog.methods[idx];
        if self.depth >= self.cfg.max_depth {
            return runtime(format!("stack overflow entering {}", method.id));
        }
        if self.cfg.records(&method.id.class) {
            self.records.push(InvocationRecord {
                target: method.id.clone(),
                arg_types: args.iter().map(Value::runtime_type).collect(),
                ret: method.id.ret.clone(),
            });
        }
        let mut locals = args;
        debug_assert_eq!(locals.len(), method.param_count);
        locals.resize(method.slots.max(locals.len()), Value::Null);
        let mut frame = Frame { this: if method.is_static { None } else { this }, locals };
        self.depth += 1;
        let flow = self.exec_block(&method.body, &mut frame);
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => Ok(v),
            Flow::Normal if method.id.ret.is_some() => {
                runtime(format!("{} finished without returning a value", method.id))
            }
            Flow::Normal => Ok(Value::Null),
        }
    }
}

fn default_for(ty: &TypeName) -> Value {
    match ty {
        TypeName::Int => Value::Int(0),
        TypeName::Bool => Value::Bool(false),
        _ => Value::Null,
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::minilang::{check_program, parse};

    const BASE: &str = "class A { void foo() {} void bar(Object obj) {} } class B extends A { void foo() {} }";
    const TESTS: &str = r#"
        test T1() { A a = new A(); a.foo(); }
        test T2() { A a = new B(); a.foo(); }
        test T3() { A a = new B(); a.bar("hello"); }
    "#;

    fn run_src(program: &str, tests: &str, name: &str, cfg: &RunConfig) -> TestResult {
        let prog = check_program(&[parse(program, "p.mj").unwrap()]).unwrap();
        let unit = parse(tests, "t.mj").unwrap();
        let decl = unit.tests.into_iter().find(|t| t.name == name).unwrap();
        run_test(&prog, &TestCase::new(decl), cfg).unwrap()
    }

    fn methods(r: &TestResult) -> BTreeSet<String> {
        r.trace.method_set().iter().map(|m| m.to_string()).collect()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn dispatch_follows_the_runtime_class() {
        let r = run_src(BASE, TESTS, "T2", &RunConfig::default());
        assert_eq!(r.outcome, Outcome::Pass);
        assert_eq!(methods(&r), set(&["B.B()", "A.A()", "B.foo()"]));
        let order: Vec<String> = r.trace.records.iter().map(|r| r.render()).collect();
        assert_eq!(order, ["B.B()V", "A.A()V", "B.foo()V"]);
    }

    #[test]
    fn dispatch_maps() {
        let r1 = run_src(BASE, TESTS, "T1", &RunConfig::default());
        assert_eq!(methods(&r1), set(&["A.A()", "A.foo()"]));
        let r3 = run_src(BASE, TESTS, "T3", &RunConfig::default());
        assert_eq!(methods(&r3), set(&["B.B()", "A.A()", "A.bar(Object)"]));
        assert_eq!(r3.trace.records[2].arg_types, vec![Some(TypeName::String)]);
    }

    #[test]
    fn overload_binds_statically() {
        let v2 = "class A { void foo() {} void bar(Object obj) {} void bar(String text) {} }
                  class B extends A { void foo() {} void bar(Object obj) {} }";
        let r = run_src(v2, TESTS, "T3", &RunConfig::default());
        assert_eq!(methods(&r), set(&["B.B()", "A.A()", "A.bar(String)"]));
    }

    #[test]
    fn empty_test_passes_with_empty_trace() {
        let r = run_src(BASE, "test E() {}", "E", &RunConfig::default());
        assert_eq!(r.outcome, Outcome::Pass);
        assert!(r.trace.records.is_empty());
    }

    #[test]
    fn assertion_failure_and_runtime_error() {
        let prog = "class M { static Int half(Int x) { return x / 2; } }";
        let tests = "test Good() { assert(M.half(4) == 2); }
                     test Bad() { assert(M.half(4) == 3); }
                     test Crash() { Int z = M.half(1); Int y = 10 / z; }
                     test Nil() { M m = null; m.toString(); }";
        let cfg = RunConfig::default();
        let prog_with_method = "class M { static Int half(Int x) { return x / 2; } void toString() {} }";
        assert_eq!(run_src(prog, tests.split("test Nil").next().unwrap(), "Good", &cfg).outcome, Outcome::Pass);
        assert_eq!(run_src(prog, tests.split("test Nil").next().unwrap(), "Bad", &cfg).outcome, Outcome::Fail);
        let crash = run_src(prog, tests.split("test Nil").next().unwrap(), "Crash", &cfg);
        assert_eq!(crash.outcome, Outcome::Error);
        assert!(crash.message.unwrap().contains("division by zero"));
        assert_eq!(run_src(prog_with_method, tests, "Nil", &cfg).outcome, Outcome::Error);
    }

    #[test]
    fn endless_loop_times_out_at_budget() {
        let cfg = RunConfig { step_budget: 5_000, ..RunConfig::default() };
        let r = run_src("class L { static void spin() { while (true) {} } }", "test T() { L.spin(); }", "T", &cfg);
        assert_eq!(r.outcome, Outcome::Timeout);
        assert_eq!(r.steps_used, 5_000);
        let ok = run_src("class L { static void go() {} }", "test T() { L.go(); }", "T", &cfg);
        assert!(ok.steps_used < 5_000);
    }

    #[test]
    fn unbounded_recursion_is_an_error() {
        let r = run_src(
            "class R { static Int f(Int n) { return f(n + 1); } }",
            "test T() { R.f(0); }",
            "T",
            &RunConfig::default(),
        );
        assert_eq!(r.outcome, Outcome::Error);
        assert!(r.message.unwrap().contains("stack overflow"));
    }

    #[test]
    fn filter_restricts_recorded_classes() {
        let all = run_src(BASE, TESTS, "T2", &RunConfig::default());
        let cfg = RunConfig { filter: Some(vec!["B".into()]), ..RunConfig::default() };
        let only_b = run_src(BASE, TESTS, "T2", &cfg);
        let expected: BTreeSet<_> = all.trace.method_set().into_iter().filter(|m| m.class.starts_with('B')).collect();
        assert_eq!(only_b.trace.method_set(), expected);
    }

    #[test]
    fn fields_constructors_and_strings() {
        let prog = r#"
            class Counter { Int n; String label;
                Counter(String l) { label = l; }
                void bump() { n++; }
                String show() { return label + "=" + n; } }
            class Named extends Counter { Named() { super("named"); } }
        "#;
        let tests = r#"test T() { Counter c = new Named(); c.bump(); c.bump(); print(c.show()); assert(c.show() == "named=2"); }"#;
        let r = run_src(prog, tests, "T", &RunConfig::default());
        assert_eq!(r.outcome, Outcome::Pass, "{:?}", r.message);
        assert_eq!(r.output, vec!["named=2".to_string()]);
        assert!(methods(&r).contains("Counter.Counter(String)"));
    }

    #[test]
    fn static_error_in_test_is_reported_before_running() {
        let prog = check_program(&[parse(BASE, "p.mj").unwrap()]).unwrap();
        let unit = parse("test T() { A a = new A(); a.gone(); }", "t.mj").unwrap();
        let tc = TestCase::new(unit.tests[0].clone());
        assert!(run_test(&prog, &tc, &RunConfig::default()).is_err());
    }

    #[test]
    fn digest_ignores_formatting() {
        let a = parse("test T() { A a = new A(); a.foo(); }", "t.mj").unwrap();
        let b = parse("test T() {\n  // same\n  A a=new A();\n  a.foo();\n}", "t.mj").unwrap();
        assert_eq!(TestCase::new(a.tests[0].clone()).source_digest, TestCase::new(b.tests[0].clone()).source_digest);
    }
}
