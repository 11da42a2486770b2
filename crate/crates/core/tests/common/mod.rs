//! Random MiniJ programs and edits for property and safety checks.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tia::differ::{diff_methods_with, DiffOptions};
use tia::mapstore::{select, update_entry, SelectionReport, TestMap};
use tia::minilang::{check_program, parse, CheckedProgram, MethodId, SourceUnit};
use tia::runtime::{run_test, Outcome, RunConfig, TestCase};

const NAMES: [&str; 4] = ["a", "b", "c", "d"];
const FRESH: &str = "z";
const STEP_BUDGET: u64 = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct FMethod {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FClass {
    pub name: String,
    pub parent: Option<usize>,
    pub methods: Vec<FMethod>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FProgram {
    pub classes: Vec<FClass>,
}

fn rank(name: &str) -> usize {
    NAMES.iter().position(|n| *n == name).unwrap_or(NAMES.len())
}

impl FProgram {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.classes {
            out.push_str(&format!("class {}", c.name));
            if let Some(p) = c.parent {
                out.push_str(&format!(" extends {}", self.classes[p].name));
            }
            out.push_str(" {\n");
            for m in &c.methods {
                let params: Vec<String> = m.params.iter().enumerate().map(|(i, t)| format!("{t} p{i}")).collect();
                out.push_str(&format!("  Int {}({}) {{\n", m.name, params.join(", ")));
                for s in &m.body {
                    out.push_str(&format!("    {s}\n"));
                }
                out.push_str("  }\n");
            }
            out.push_str("}\n");
        }
        out
    }

    fn chain(&self, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut cur = self.classes[i].parent;
        while let Some(p) = cur {
            if out.contains(&p) {
                break;
            }
            out.push(p);
            cur = self.classes[p].parent;
        }
        out
    }

    fn is_subclass(&self, sub: usize, sup: usize) -> bool {
        self.chain(sub).contains(&sup)
    }

    /// `(name, params)` of every method visible on class `i`.
    fn visible(&self, i: usize) -> Vec<(String, Vec<String>)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for c in self.chain(i) {
            for m in &self.classes[c].methods {
                if seen.insert((m.name.clone(), m.params.clone())) {
                    out.push((m.name.clone(), m.params.clone()));
                }
            }
        }
        out
    }

    fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.name == name)
    }
}

struct Scope<'a> {
    class: Option<usize>,
    int_params: Vec<String>,
    prog: &'a FProgram,
}

fn gen_arg(rng: &mut ChaCha8Rng, ty: &str, scope: &Scope) -> String {
    let prog = scope.prog;
    match ty {
        "Int" => {
            if !scope.int_params.is_empty() && rng.gen_bool(0.5) {
                scope.int_params.choose(rng).unwrap().clone()
            } else {
                rng.gen_range(0..10).to_string()
            }
        }
        "String" => format!("\"s{}\"", rng.gen_range(0..3)),
        "Object" => match rng.gen_range(0..3) {
            0 => "\"o\"".to_string(),
            1 if scope.class.is_some() => "this".to_string(),
            _ => format!("new {}()", prog.classes.choose(rng).unwrap().name),
        },
        class => {
            let Some(target) = prog.class_index(class) else { return "\"?\"".into() };
            if let Some(me) = scope.class {
                if prog.is_subclass(me, target) && rng.gen_bool(0.3) {
                    return "this".into();
                }
            }
            let subs: Vec<usize> = (0..prog.classes.len()).filter(|&k| prog.is_subclass(k, target)).collect();
            format!("new {}()", prog.classes[*subs.choose(rng).unwrap()].name)
        }
    }
}

fn gen_type(rng: &mut ChaCha8Rng, n_classes: usize) -> String {
    match rng.gen_range(0..4) {
        0 => "Int".into(),
        1 => "Object".into(),
        2 => "String".into(),
        _ => format!("C{}", rng.gen_range(0..n_classes)),
    }
}

fn gen_body(rng: &mut ChaCha8Rng, prog: &FProgram, class: usize, name: &str, params: &[String]) -> Vec<String> {
    let int_params: Vec<String> =
        params.iter().enumerate().filter(|(_, t)| *t == "Int").map(|(i, _)| format!("p{i}")).collect();
    let scope = Scope { class: Some(class), int_params: int_params.clone(), prog };
    let mut body = vec![format!("Int acc = {};", rng.gen_range(0..20))];
    for p in &int_params {
        if rng.gen_bool(0.6) {
            body.push(format!("acc = acc {} {p};", ["+", "-", "*"].choose(rng).unwrap()));
        }
    }
    let callable: Vec<(String, Vec<String>)> =
        prog.visible(class).into_iter().filter(|(n, _)| rank(n) < rank(name)).collect();
    for _ in 0..rng.gen_range(0..3) {
        if let Some((n, ps)) = callable.choose(rng) {
            let args: Vec<String> = ps.iter().map(|t| gen_arg(rng, t, &scope)).collect();
            let recv = if rng.gen_bool(0.5) { "this." } else { "" };
            body.push(format!("acc = acc + {recv}{n}({});", args.join(", ")));
        }
    }
    if rng.gen_bool(0.4) {
        body.push(format!("if (acc > {}) {{ acc = acc - {}; }}", rng.gen_range(0..30), rng.gen_range(1..9)));
    }
    body.push("return acc;".into());
    body
}

pub fn gen_program(rng: &mut ChaCha8Rng) -> FProgram {
    let n = rng.gen_range(2..5);
    let mut prog = FProgram {
        classes: (0..n)
            .map(|i| FClass {
                name: format!("C{i}"),
                parent: if i > 0 && rng.gen_bool(0.7) { Some(rng.gen_range(0..i)) } else { None },
                methods: Vec::new(),
            })
            .collect(),
    };
    for i in 0..n {
        for _ in 0..rng.gen_range(1..4) {
            let name = NAMES.choose(rng).unwrap().to_string();
            let params: Vec<String> = (0..rng.gen_range(0..3)).map(|_| gen_type(rng, n)).collect();
            if prog.classes[i].methods.iter().any(|m| m.name == name && m.params == params) {
                continue;
            }
            let body = gen_body(rng, &prog, i, &name, &params);
            prog.classes[i].methods.push(FMethod { name, params, body });
        }
    }
    prog
}

/// Test calls: `(static class, runtime class, call expressions)`.
#[derive(Debug, Clone)]
pub struct FTest {
    pub name: String,
    pub static_class: String,
    pub runtime_class: String,
    pub calls: Vec<String>,
    /// Expected values, once observed on the old version.
    pub expected: Vec<Option<String>>,
}

pub fn gen_tests(rng: &mut ChaCha8Rng, prog: &FProgram) -> Vec<FTest> {
    let mut tests = Vec::new();
    for k in 0..rng.gen_range(3..7) {
        let s = rng.gen_range(0..prog.classes.len());
        let subs: Vec<usize> = (0..prog.classes.len()).filter(|&c| prog.is_subclass(c, s)).collect();
        let r = *subs.choose(rng).unwrap();
        let visible = prog.visible(s);
        let scope = Scope { class: None, int_params: vec![], prog };
        let mut calls = Vec::new();
        for _ in 0..rng.gen_range(1..4) {
            if let Some((n, ps)) = visible.choose(rng) {
                let args: Vec<String> = ps.iter().map(|t| gen_arg(rng, t, &scope)).collect();
                calls.push(format!("x.{n}({})", args.join(", ")));
            }
        }
        tests.push(FTest {
            name: format!("T{k}"),
            static_class: prog.classes[s].name.clone(),
            runtime_class: prog.classes[r].name.clone(),
            calls,
            expected: Vec::new(),
        });
    }
    tests
}

pub fn render_tests(tests: &[FTest]) -> String {
    let mut out = String::new();
    for t in tests {
        out.push_str(&format!("test {}() {{\n  {} x = new {}();\n", t.name, t.static_class, t.runtime_class));
        for (i, call) in t.calls.iter().enumerate() {
            match t.expected.get(i).cloned().flatten() {
                Some(v) => out.push_str(&format!("  assert({call} == {v});\n")),
                None => out.push_str(&format!("  print({call});\n")),
            }
        }
        out.push_str("}\n");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditKind {
    BodyEdit,
    Rename,
    AddOverride,
    AddOverload,
    Remove,
    ChangeParamType,
    AddFresh,
    Reparent,
}

pub const EDIT_KINDS: [EditKind; 8] = [
    EditKind::BodyEdit,
    EditKind::Rename,
    EditKind::AddOverride,
    EditKind::AddOverload,
    EditKind::Remove,
    EditKind::ChangeParamType,
    EditKind::AddFresh,
    EditKind::Reparent,
];

fn related_type(rng: &mut ChaCha8Rng, prog: &FProgram, ty: &str) -> Option<String> {
    let n = prog.classes.len();
    match ty {
        "Int" => None,
        "Object" => Some(if rng.gen_bool(0.4) { "String".into() } else { format!("C{}", rng.gen_range(0..n)) }),
        "String" => Some("Object".into()),
        class => {
            let c = prog.class_index(class)?;
            let mut options: Vec<String> = vec!["Object".into()];
            for k in 0..n {
                if k != c && (prog.is_subclass(k, c) || prog.is_subclass(c, k)) {
                    options.push(prog.classes[k].name.clone());
                }
            }
            options.choose(rng).cloned()
        }
    }
}

/// Applies one random edit; `None` if the drawn edit had nowhere to apply.
pub fn apply_edit(rng: &mut ChaCha8Rng, prog: &FProgram, kind: EditKind) -> Option<FProgram> {
    let mut p = prog.clone();
    let n = p.classes.len();
    let with_methods: Vec<usize> = (0..n).filter(|&i| !p.classes[i].methods.is_empty()).collect();
    match kind {
        EditKind::BodyEdit => {
            let c = *with_methods.choose(rng)?;
            let m = rng.gen_range(0..p.classes[c].methods.len());
            let (name, params) = (p.classes[c].methods[m].name.clone(), p.classes[c].methods[m].params.clone());
            if rng.gen_bool(0.5) {
                let body = &mut p.classes[c].methods[m].body;
                body[0] = format!("Int acc = {};", rng.gen_range(20..40));
            } else {
                p.classes[c].methods[m].body = gen_body(rng, prog, c, &name, &params);
            }
        }
        EditKind::Rename => {
            let c = *with_methods.choose(rng)?;
            let m = rng.gen_range(0..p.classes[c].methods.len());
            let names: Vec<&str> = NAMES.iter().copied().chain([FRESH]).collect();
            p.classes[c].methods[m].name = names.choose(rng)?.to_string();
        }
        EditKind::AddOverride => {
            let c = rng.gen_range(0..n);
            let parent = p.classes[c].parent?;
            let own: Vec<(String, Vec<String>)> =
                p.classes[c].methods.iter().map(|m| (m.name.clone(), m.params.clone())).collect();
            let inherited: Vec<(String, Vec<String>)> =
                p.visible(parent).into_iter().filter(|sig| !own.contains(sig)).collect();
            let (name, params) = inherited.choose(rng)?.clone();
            let body = gen_body(rng, prog, c, &name, &params);
            p.classes[c].methods.push(FMethod { name, params, body });
        }
        EditKind::AddOverload => {
            let c = rng.gen_range(0..n);
            let (name, params) = p.visible(c).choose(rng)?.clone();
            let positions: Vec<usize> = (0..params.len()).filter(|&i| params[i] != "Int").collect();
            let mut new_params = params.clone();
            if let Some(&i) = positions.choose(rng) {
                new_params[i] = related_type(rng, &p, &params[i])?;
            } else {
                new_params.push(gen_type(rng, n));
            }
            let target = if rng.gen_bool(0.6) {
                c
            } else {
                let family: Vec<usize> = (0..n).filter(|&k| p.is_subclass(k, c) || p.is_subclass(c, k)).collect();
                *family.choose(rng)?
            };
            if p.classes[target].methods.iter().any(|m| m.name == name && m.params == new_params) {
                return None;
            }
            let body = gen_body(rng, prog, target, &name, &new_params);
            p.classes[target].methods.push(FMethod { name, params: new_params, body });
        }
        EditKind::Remove => {
            let c = *with_methods.choose(rng)?;
            let m = rng.gen_range(0..p.classes[c].methods.len());
            p.classes[c].methods.remove(m);
        }
        EditKind::ChangeParamType => {
            let c = *with_methods.choose(rng)?;
            let m = rng.gen_range(0..p.classes[c].methods.len());
            let method = &mut p.classes[c].methods[m];
            if method.params.is_empty() {
                return None;
            }
            let i = rng.gen_range(0..method.params.len());
            method.params[i] = gen_type(rng, n);
        }
        EditKind::AddFresh => {
            let c = rng.gen_range(0..n);
            let body = gen_body(rng, prog, c, FRESH, &[]);
            p.classes[c].methods.push(FMethod { name: FRESH.into(), params: vec![], body });
        }
        EditKind::Reparent => {
            let c = rng.gen_range(1..n.max(2)).min(n - 1);
            let options: Vec<Option<usize>> = std::iter::once(None).chain((0..c).map(Some)).collect();
            p.classes[c].parent = *options.choose(rng)?;
        }
    }
    (p != *prog).then_some(p)
}

pub fn units(src: &str, path: &str) -> Option<Vec<SourceUnit>> {
    parse(src, path).ok().map(|u| vec![u])
}

pub fn suite(src: &str) -> Vec<TestCase> {
    parse(src, "tests.mj").unwrap().tests.into_iter().map(TestCase::new).collect()
}

pub fn fuzz_config() -> RunConfig {
    RunConfig { step_budget: STEP_BUDGET, ..RunConfig::default() }
}

/// Outcome of `test` on `program`; a test that no longer type-checks is an
/// Error.
pub fn outcome_of(program: &CheckedProgram, test: &TestCase) -> (Outcome, Option<BTreeSet<MethodId>>, Vec<String>) {
    match run_test(program, test, &fuzz_config()) {
        Ok(r) => (r.outcome, Some(r.trace.method_set()), r.output),
        Err(_) => (Outcome::Error, None, Vec::new()),
    }
}

/// One checked old/new pair with its tests.
pub struct FuzzCase {
    pub old_src: String,
    pub new_src: String,
    pub tests_src: String,
    pub edits: Vec<EditKind>,
}

/// Draws programs and edits until both versions build. Tests carry asserts
/// pinned to the values observed on the old version.
pub fn fuzz_case(rng: &mut ChaCha8Rng) -> FuzzCase {
    loop {
        let prog = gen_program(rng);
        let old_src = prog.render();
        let Some(old_units) = units(&old_src, "p.mj") else { continue };
        let Ok(old) = check_program(&old_units) else { continue };
        let mut tests = gen_tests(rng, &prog);
        let probe = suite(&render_tests(&tests));
        if probe.iter().any(|case| run_test(&old, case, &fuzz_config()).is_err()) {
            continue;
        }
        for (t, case) in tests.iter_mut().zip(&probe) {
            let (_, _, output) = outcome_of(&old, case);
            t.expected = t.calls.iter().enumerate().map(|(i, _)| output.get(i).cloned()).collect();
        }
        let tests_src = render_tests(&tests);
        let mut new = prog.clone();
        let mut edits = Vec::new();
        for _ in 0..rng.gen_range(1..3) {
            let kind = *EDIT_KINDS.choose(rng).unwrap();
            if let Some(p) = apply_edit(rng, &new, kind) {
                new = p;
                edits.push(kind);
            }
        }
        if edits.is_empty() {
            continue;
        }
        let new_src = new.render();
        let Some(new_units) = units(&new_src, "p.mj") else { continue };
        if check_program(&new_units).is_err() {
            continue;
        }
        return FuzzCase { old_src, new_src, tests_src, edits };
    }
}

#[derive(Debug, Default)]
pub struct SafetyCheck {
    pub trace_hits_missed: Vec<String>,
    pub outcome_changes_missed: Vec<String>,
    pub selected: usize,
    pub total: usize,
    /// Tests whose outcome differs between the versions.
    pub outcome_changes: usize,
    /// Missed tests that no longer pass static checks on the new version.
    pub missed_unbuildable: Vec<String>,
}

/// Runs the brute-force oracle for one pair: every test on both versions.
pub fn check_safety(case: &FuzzCase, options: DiffOptions) -> SafetyCheck {
    let old_units = units(&case.old_src, "p.mj").unwrap();
    let new_units = units(&case.new_src, "p.mj").unwrap();
    let old = check_program(&old_units).unwrap();
    let new = check_program(&new_units).unwrap();
    let tests = suite(&case.tests_src);
    let h = diff_methods_with(&old_units, &new_units, options).unwrap();
    let mut map = TestMap::default();
    let mut before = Vec::new();
    for t in &tests {
        let r = run_test(&old, t, &fuzz_config()).unwrap();
        update_entry(&mut map, &r, &t.source_digest);
        before.push((r.outcome, r.trace.method_set()));
    }
    let report: SelectionReport = select(&h, &tests, &map);
    let mut check = SafetyCheck { selected: report.selected_count, total: tests.len(), ..Default::default() };
    for (t, (old_outcome, old_methods)) in tests.iter().zip(&before) {
        let chosen = report.is_selected(&t.name);
        if old_methods.iter().any(|m| h.contains(m)) && !chosen {
            check.trace_hits_missed.push(t.name.clone());
        }
        let (new_outcome, _, _) = outcome_of(&new, t);
        if new_outcome != *old_outcome {
            check.outcome_changes += 1;
        }
        if new_outcome != *old_outcome && !chosen {
            check.outcome_changes_missed.push(t.name.clone());
            if run_test(&new, t, &fuzz_config()).is_err() {
                check.missed_unbuildable.push(t.name.clone());
            }
        }
    }
    check
}
