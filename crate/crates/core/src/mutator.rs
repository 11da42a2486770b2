//! Mutation testing harness: compares the mutants killed by the whole suite
//! with those killed by the tests impact analysis selects.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::differ::diff_methods;
use crate::mapstore::{gain_percent, select, update_entry, TestMap};
use crate::minilang::ast::{BinOp, Block, Expr, ExprKind, StepOp, Stmt, StmtKind, UnOp};
use crate::minilang::printer::expr_to_string;
use crate::minilang::{check_program, CheckedProgram, MethodId, ProgramError, SourceUnit, StaticCheckError, TypeName};
use crate::runtime::{run_test, Outcome, RunConfig, TestCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MutationOperator {
    ConditionalBoundary,
    NegateConditional,
    MathOperatorReplace,
    Increment,
    ReturnValueMutate,
    RemoveCall,
    InlineConstant,
}

impl MutationOperator {
    pub const ALL: [MutationOperator; 7] = [
        MutationOperator::ConditionalBoundary,
        MutationOperator::NegateConditional,
        MutationOperator::MathOperatorReplace,
        MutationOperator::Increment,
        MutationOperator::ReturnValueMutate,
        MutationOperator::RemoveCall,
        MutationOperator::InlineConstant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MutationOperator::ConditionalBoundary => "ConditionalBoundary",
            MutationOperator::NegateConditional => "NegateConditional",
            MutationOperator::MathOperatorReplace => "MathOperatorReplace",
            MutationOperator::Increment => "Increment",
            MutationOperator::ReturnValueMutate => "ReturnValueMutate",
            MutationOperator::RemoveCall => "RemoveCall",
            MutationOperator::InlineConstant => "InlineConstant",
        }
    }

    /// Comma-separated operator names, or `all`.
    pub fn parse_list(text: &str) -> Result<Vec<MutationOperator>, String> {
        if text.trim() == "all" {
            return Ok(Self::ALL.to_vec());
        }
        let mut ops: Vec<MutationOperator> = text.split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>()?;
        ops.sort();
        ops.dedup();
        Ok(ops)
    }
}

impl fmt::Display for MutationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MutationOperator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|op| op.as_str() == s).ok_or_else(|| format!("unknown mutation operator `{s}`"))
    }
}

/// Where a mutation was applied: a method, the pre-order index of the
/// statement in its body, and the index of the site among the operator's
/// sites in that statement.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Location {
    pub method: MethodId,
    pub stmt: usize,
    pub site: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}.{}", self.method, self.stmt, self.site)
    }
}

#[derive(Debug, Clone)]
pub struct Mutant {
    pub id: usize,
    pub operator: MutationOperator,
    pub location: Location,
    /// `before -> after`.
    pub description: String,
    pub program: Vec<SourceUnit>,
}

#[derive(Debug, Clone, Default)]
pub struct Generation {
    pub mutants: Vec<Mutant>,
    /// Candidates dropped because the mutated program failed static checks.
    pub discarded: Vec<(MutationOperator, Location, String)>,
}

struct Walker<'a, F> {
    op: MutationOperator,
    ret: Option<&'a TypeName>,
    next_stmt: usize,
    pick: F,
    applied: Option<String>,
}

fn negated(op: BinOp) -> Option<BinOp> {
    Some(match op {
        BinOp::Eq => BinOp::Ne,
        BinOp::Ne => BinOp::Eq,
        BinOp::Lt => BinOp::Ge,
        BinOp::Le => BinOp::Gt,
        BinOp::Gt => BinOp::Le,
        BinOp::Ge => BinOp::Lt,
        _ => return None,
    })
}

fn boundary(op: BinOp) -> Option<BinOp> {
    Some(match op {
        BinOp::Lt => BinOp::Le,
        BinOp::Le => BinOp::Lt,
        BinOp::Gt => BinOp::Ge,
        BinOp::Ge => BinOp::Gt,
        _ => return None,
    })
}

fn math(op: BinOp) -> Option<BinOp> {
    Some(match op {
        BinOp::Add => BinOp::Sub,
        BinOp::Sub => BinOp::Add,
        BinOp::Mul => BinOp::Div,
        BinOp::Div => BinOp::Mul,
        BinOp::Rem => BinOp::Mul,
        _ => return None,
    })
}

/// The rewritten expression, if `op` applies at `e` itself.
fn rewrite_expr(op: MutationOperator, e: &Expr) -> Option<ExprKind> {
    match (op, &e.kind) {
        (MutationOperator::ConditionalBoundary, ExprKind::Binary { op: b, lhs, rhs }) => {
            boundary(*b).map(|n| ExprKind::Binary { op: n, lhs: lhs.clone(), rhs: rhs.clone() })
        }
        (MutationOperator::NegateConditional, ExprKind::Binary { op: b, lhs, rhs }) => {
            negated(*b).map(|n| ExprKind::Binary { op: n, lhs: lhs.clone(), rhs: rhs.clone() })
        }
        (MutationOperator::MathOperatorReplace, ExprKind::Binary { op: b, lhs, rhs }) => {
            math(*b).map(|n| ExprKind::Binary { op: n, lhs: lhs.clone(), rhs: rhs.clone() })
        }
        (MutationOperator::MathOperatorReplace, ExprKind::Unary { op: UnOp::Neg, operand }) => {
            Some(operand.kind.clone())
        }
        (MutationOperator::InlineConstant, ExprKind::Int(n)) => {
            Some(ExprKind::Int(if *n == 1 { 0 } else { n.wrapping_add(1) }))
        }
        (MutationOperator::InlineConstant, ExprKind::Bool(b)) => Some(ExprKind::Bool(!b)),
        _ => None,
    }
}

impl<F: FnMut(usize, usize) -> bool> Walker<'_, F> {
    fn block(&mut self, block: &mut Block) {
        for stmt in &mut block.stmts {
            if self.applied.is_some() {
                return;
            }
            self.stmt(stmt);
        }
    }

    fn stmt_rewrite(&self, stmt: &Stmt) -> Option<(StmtKind, String)> {
        match (self.op, &stmt.kind) {
            (MutationOperator::Increment, StmtKind::Step { target, op }) => {
                let (from, to, flipped) = match op {
                    StepOp::Inc => ("++", "--", StepOp::Dec),
                    StepOp::Dec => ("--", "++", StepOp::Inc),
                };
                let t = expr_to_string(target);
                Some((StmtKind::Step { target: target.clone(), op: flipped }, format!("{t}{from} -> {t}{to}")))
            }
            (MutationOperator::ReturnValueMutate, StmtKind::Return(Some(e))) => {
                let replacement = match self.ret? {
                    TypeName::Int => ExprKind::Int(if e.kind == ExprKind::Int(0) { 1 } else { 0 }),
                    TypeName::Bool => ExprKind::Unary { op: UnOp::Not, operand: Box::new(e.clone()) },
                    _ if e.kind == ExprKind::Null => return None,
                    _ => ExprKind::Null,
                };
                let new = Expr::new(replacement, e.pos);
                let desc = format!("return {} -> return {}", expr_to_string(e), expr_to_string(&new));
                Some((StmtKind::Return(Some(new)), desc))
            }
            (MutationOperator::RemoveCall, StmtKind::Expr(e)) if matches!(e.kind, ExprKind::Call { .. }) => {
                Some((StmtKind::Block(Block::default()), format!("{} -> (removed)", expr_to_string(e))))
            }
            _ => None,
        }
    }

    fn stmt(&mut self, stmt: &mut Stmt) {
        let idx = self.next_stmt;
        self.next_stmt += 1;
        let mut site = 0;
        if let Some((kind, desc)) = self.stmt_rewrite(stmt) {
            if (self.pick)(idx, site) {
                stmt.kind = kind;
                self.applied = Some(desc);
                return;
            }
            site += 1;
        }
        match &mut stmt.kind {
            StmtKind::Block(b) => self.block(b),
            StmtKind::Local { init, .. } => {
                if let Some(e) = init {
                    self.expr(e, idx, &mut site);
                }
            }
            StmtKind::Assign { target, value } => {
                self.expr(target, idx, &mut site);
                self.expr(value, idx, &mut site);
            }
            StmtKind::Step { target, .. } => self.expr(target, idx, &mut site),
            StmtKind::If { cond, then, otherwise } => {
                self.expr(cond, idx, &mut site);
                if self.applied.is_none() {
                    self.stmt(then);
                }
                if let Some(o) = otherwise {
                    if self.applied.is_none() {
                        self.stmt(o);
                    }
                }
            }
            StmtKind::While { cond, body } => {
                self.expr(cond, idx, &mut site);
                if self.applied.is_none() {
                    self.stmt(body);
                }
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e, idx, &mut site);
                }
            }
            StmtKind::Print(e) | StmtKind::Assert(e) | StmtKind::Expr(e) => self.expr(e, idx, &mut site),
            StmtKind::SuperCall(args) => {
                for a in args {
                    self.expr(a, idx, &mut site);
                }
            }
        }
    }

    fn expr(&mut self, e: &mut Expr, stmt: usize, site: &mut usize) {
        if self.applied.is_some() {
            return;
        }
        if let Some(kind) = rewrite_expr(self.op, e) {
            if (self.pick)(stmt, *site) {
                let before = expr_to_string(e);
                e.kind = kind;
                self.applied = Some(format!("{before} -> {}", expr_to_string(e)));
                return;
            }
            *site += 1;
        }
        match &mut e.kind {
            ExprKind::Field { target, .. } => self.expr(target, stmt, site),
            ExprKind::Call { target, args, .. } => {
                if let Some(t) = target {
                    self.expr(t, stmt, site);
                }
                for a in args {
                    self.expr(a, stmt, site);
                }
            }
            ExprKind::New { args, .. } => {
                for a in args {
                    self.expr(a, stmt, site);
                }
            }
            ExprKind::Unary { operand, .. } => self.expr(operand, stmt, site),
            ExprKind::Binary { lhs, rhs, .. } => {
                self.expr(lhs, stmt, site);
                self.expr(rhs, stmt, site);
            }
            _ => {}
        }
    }
}

fn sites(op: MutationOperator, ret: Option<&TypeName>, body: &Block) -> Vec<(usize, usize)> {
    let mut found = Vec::new();
    let mut w = Walker {
        op,
        ret,
        next_stmt: 0,
        pick: |s, i| {
            found.push((s, i));
            false
        },
        applied: None,
    };
    w.block(&mut body.clone());
    found
}

fn apply(op: MutationOperator, ret: Option<&TypeName>, body: &mut Block, at: (usize, usize)) -> Option<String> {
    let mut w = Walker { op, ret, next_stmt: 0, pick: |s, i| (s, i) == at, applied: None };
    w.block(body);
    w.applied
}

/// Enumerates mutants method by method in declaration order, then by
/// operator, statement and site. With `coverage`, only methods in it are
/// mutated. Mutants that fail static checks are discarded before ids are
/// assigned.
pub fn generate_mutants(
    program: &[SourceUnit],
    operators: &[MutationOperator],
    coverage: Option<&BTreeSet<MethodId>>,
) -> Generation {
    let mut ops = operators.to_vec();
    ops.sort();
    ops.dedup();
    let mut generation = Generation::default();
    for (u, unit) in program.iter().enumerate() {
        for (c, class) in unit.classes.iter().enumerate() {
            for (m, method) in class.methods.iter().enumerate() {
                let id = method.id(&class.name);
                if coverage.is_some_and(|cov| !cov.contains(&id)) {
                    continue;
                }
                for &op in &ops {
                    for at in sites(op, method.ret.as_ref(), &method.body) {
                        let mut mutated = program.to_vec();
                        let target = &mut mutated[u].classes[c].methods[m];
                        let ret = target.ret.clone();
                        let Some(description) = apply(op, ret.as_ref(), &mut target.body, at) else { continue };
                        let location = Location { method: id.clone(), stmt: at.0, site: at.1 };
                        match check_program(&mutated) {
                            Ok(_) => generation.mutants.push(Mutant {
                                id: generation.mutants.len(),
                                operator: op,
                                location,
                                description,
                                program: mutated,
                            }),
                            Err(e) => generation.discarded.push((op, location, e.to_string())),
                        }
                    }
                }
            }
        }
    }
    generation
}

#[derive(Debug, Error)]
pub enum MutateError {
    #[error("original program: {0}")]
    Program(#[from] ProgramError),
    #[error("test `{test}`: {source}")]
    Test { test: String, source: StaticCheckError },
    #[error("the suite must pass on the original program; failing: {}", .0.join(", "))]
    RedBaseline(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KillRow {
    pub mutant: usize,
    pub operator: MutationOperator,
    pub location: Location,
    pub description: String,
    pub killed_by_whole: bool,
    pub selected: Vec<String>,
    pub killed_by_selected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mutants: usize,
    pub discarded: usize,
    pub killed_by_whole: usize,
    pub killed_by_selected: usize,
    /// Killed by the whole suite but not by the selected tests.
    pub missed: usize,
    pub missed_percent: f64,
    pub mean_gain_percent: f64,
    pub tests: usize,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub rows: Vec<KillRow>,
    pub summary: Summary,
    pub baseline: TestMap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOptions {
    pub coverage_filter: bool,
    /// Upper bound on any single test's step budget.
    pub max_step_budget: u64,
    pub timeout_factor: u64,
    pub timeout_constant: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            coverage_filter: true,
            max_step_budget: crate::runtime::DEFAULT_STEP_BUDGET,
            timeout_factor: 10,
            timeout_constant: 10_000,
        }
    }
}

/// Runs `tests` in order and reports whether any of them did not pass.
fn kills(program: &CheckedProgram, tests: &[&TestCase], budgets: &[u64]) -> bool {
    tests.iter().zip(budgets).any(|(t, &budget)| {
        let cfg = RunConfig { step_budget: budget, ..RunConfig::default() };
        run_test(program, t, &cfg).map_or(true, |r| r.outcome != Outcome::Pass)
    })
}

/// Builds a baseline map from a full run on the original program, then for
/// every mutant runs the whole suite and, separately, only the tests
/// selected against the baseline map for the mutant's change set.
pub fn evaluate(
    program: &[SourceUnit],
    suite: &[TestCase],
    operators: &[MutationOperator],
    options: &EvalOptions,
) -> Result<Evaluation, MutateError> {
    let original = check_program(program)?;
    let mut baseline = TestMap::default();
    let mut budgets = Vec::with_capacity(suite.len());
    let mut red = Vec::new();
    let base_cfg = RunConfig { step_budget: options.max_step_budget, ..RunConfig::default() };
    for t in suite {
        let result =
            run_test(&original, t, &base_cfg).map_err(|source| MutateError::Test { test: t.name.clone(), source })?;
        if result.outcome != Outcome::Pass {
            red.push(t.name.clone());
        }
        let budget = result.steps_used.saturating_mul(options.timeout_factor).saturating_add(options.timeout_constant);
        budgets.push(budget.min(options.max_step_budget));
        update_entry(&mut baseline, &result, &t.source_digest);
    }
    if !red.is_empty() {
        return Err(MutateError::RedBaseline(red));
    }
    let coverage: BTreeSet<MethodId> = baseline.entries.values().flat_map(|e| e.methods.iter().cloned()).collect();
    let generation = generate_mutants(program, operators, options.coverage_filter.then_some(&coverage));

    let mut rows = Vec::with_capacity(generation.mutants.len());
    let mut gain_sum = 0.0;
    for mutant in &generation.mutants {
        let checked = check_program(&mutant.program)?;
        let all: Vec<&TestCase> = suite.iter().collect();
        let killed_by_whole = kills(&checked, &all, &budgets);
        let h = diff_methods(program, &mutant.program).map_err(|e| {
            MutateError::Program(ProgramError::Hierarchy(match e {
                crate::differ::DiffError::Old(h) | crate::differ::DiffError::New(h) => h,
            }))
        })?;
        let report = select(&h, suite, &baseline);
        let (picked, picked_budgets): (Vec<&TestCase>, Vec<u64>) =
            suite.iter().zip(&budgets).filter(|(t, _)| report.is_selected(&t.name)).map(|(t, b)| (t, *b)).unzip();
        let killed_by_selected = kills(&checked, &picked, &picked_budgets);
        gain_sum += report.gain_percent;
        rows.push(KillRow {
            mutant: mutant.id,
            operator: mutant.operator,
            location: mutant.location.clone(),
            description: mutant.description.clone(),
            killed_by_whole,
            selected: report.selected,
            killed_by_selected,
        });
    }
    let count = |f: fn(&KillRow) -> bool| rows.iter().filter(|r| f(r)).count();
    let missed = count(|r| r.killed_by_whole && !r.killed_by_selected);
    let n = rows.len();
    let summary = Summary {
        mutants: n,
        discarded: generation.discarded.len(),
        killed_by_whole: count(|r| r.killed_by_whole),
        killed_by_selected: count(|r| r.killed_by_selected),
        missed,
        missed_percent: if n == 0 { 0.0 } else { 100.0 * missed as f64 / n as f64 },
        mean_gain_percent: if n == 0 { 0.0 } else { gain_sum / n as f64 },
        tests: suite.len(),
    };
    Ok(Evaluation { rows, summary, baseline })
}

impl Evaluation {
    /// One row per mutant: id, operator, location, killedByWhole, number of
    /// selected tests, killedBySelected.
    pub fn matrix_tsv(&self) -> String {
        let mut out = String::from("id\toperator\tlocation\tkilledByWhole\tselected\tkilledBySelected\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                r.mutant,
                r.operator,
                r.location,
                r.killed_by_whole,
                r.selected.len(),
                r.killed_by_selected
            ));
        }
        out
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mutants: {} ({} discarded by static checks)", self.mutants, self.discarded)?;
        writeln!(f, "tests: {}", self.tests)?;
        writeln!(f, "killed by whole suite: {}", self.killed_by_whole)?;
        writeln!(f, "killed by selected tests: {}", self.killed_by_selected)?;
        writeln!(f, "missed by selected tests: {} ({:.2}%)", self.missed, self.missed_percent)?;
        write!(f, "mean gain: {:.2}%", self.mean_gain_percent)
    }
}

/// Percentage of tests skipped for one mutant.
pub fn mutant_gain(row: &KillRow, total: usize) -> f64 {
    gain_percent(total, row.selected.len())
}
