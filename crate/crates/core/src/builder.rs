//! Symbolic execution of a flowchart into a Q-determinant.
//!
//! The chart is walked from Start to End repeatedly. Decisions whose condition
//! depends on input data are branch points; a [`BranchTrace`] records the exit
//! taken at each one, and [`next_branch`] advances it until every branch has
//! been visited. The same walker runs charts concretely for the evaluator.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::expr::{self, EvalError, ExprArena, ExprError, ExprId, Interpretation, Node, Op, Value, VarRef};
use crate::flowchart::{BlockType, EdgeType, Flowchart, Statement, Violation};
use crate::qterm::{GuardedPair, QDeterminant, QError, QTerm};
use crate::stmt::SExpr;

/// Input variable holding the iteration bound of iterative charts.
pub const ITERATIONS: &str = "iterations";
/// Internal variable that cancels a pass's emission when set to 0.
pub const EMPOUT: &str = "empout";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GuardMode {
    /// Last-condition-only when the chart declares `iterations`, otherwise full conjunction.
    #[default]
    Auto,
    FullConjunction,
    LastConditionOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_branches: usize,
    pub max_steps: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_branches: 100_000, max_steps: 1_000_000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BuildConfig {
    pub params: BTreeMap<String, i64>,
    pub iterations: Option<u32>,
    pub guard_mode: GuardMode,
    pub limits: Limits,
}

impl BuildConfig {
    pub fn new(params: &[(&str, i64)]) -> Self {
        BuildConfig {
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            ..Default::default()
        }
    }

    pub fn with_iterations(mut self, l: u32) -> Self {
        self.iterations = Some(l);
        self
    }
}

/// Exits taken at the symbolic decisions of one pass, by occurrence ordinal.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BranchTrace {
    pub entries: Vec<(u32, u8)>,
}

impl BranchTrace {
    pub fn new(entries: &[(u32, u8)]) -> Self {
        BranchTrace { entries: entries.to_vec() }
    }
}

/// The trace of the next pass, or `None` once every branch has been taken.
pub fn next_branch(t: &BranchTrace) -> Option<BranchTrace> {
    let mut e = t.entries.clone();
    if let Some(last) = e.last_mut() {
        if last.1 == 1 {
            last.1 = 0;
            return Some(BranchTrace { entries: e });
        }
    }
    while e.last().is_some_and(|x| x.1 == 0) {
        e.pop();
    }
    let last = e.last_mut()?;
    last.1 = 0;
    Some(BranchTrace { entries: e })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Limit {
    Branches(usize),
    Steps(usize),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum BuildError {
    #[error("flowchart is not valid: {}", fmt_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("dimension parameter `{0}` has no value")]
    MissingParameter(String),
    #[error("the chart declares `iterations` but no iteration bound was given")]
    MissingIterations,
    #[error("an iteration bound was given but the chart does not declare `iterations`")]
    UnexpectedIterations,
    #[error("limit exceeded: {0:?}")]
    LimitExceeded(Limit),
    #[error("block {block}: index depends on input data")]
    NonConcreteIndex { block: i64 },
    #[error("block {block}: loop control depends on input data and no `iterations` bound exists")]
    NonConcreteLoopControl { block: i64 },
    #[error("block {block}: variable `{name}` is read before it has a value")]
    UndefinedVariable { block: i64, name: String },
    #[error("block {block}: `{name}` cannot be assigned")]
    ReadOnly { block: i64, name: String },
    #[error("block {block}: index of `{var}` outside its declared shape")]
    IndexOutOfRange { block: i64, var: String },
    #[error("block {block}: index is not an integer")]
    InvalidIndex { block: i64 },
    #[error("block {block}: condition is not boolean")]
    ConditionNotBoolean { block: i64 },
    #[error("block {block}: {error}")]
    Eval { block: i64, error: EvalError },
    #[error("block {block}: {error}")]
    Expr { block: i64, error: ExprError },
    #[error("no pass reached End with output enabled")]
    NoEmission,
    #[error(transparent)]
    Term(#[from] QError),
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Partially evaluated value of a variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Val {
    Num(f64),
    Bool(bool),
    Sym(ExprId),
}

#[derive(Clone, Debug)]
struct Shape {
    dims: Vec<i64>,
}

impl Shape {
    fn contains(&self, idx: &[i64]) -> bool {
        idx.len() == self.dims.len() && idx.iter().zip(&self.dims).all(|(&i, &d)| i >= 1 && i <= d)
    }

    fn all(&self) -> Vec<Vec<i64>> {
        let mut out = vec![Vec::new()];
        for &d in &self.dims {
            let mut next = Vec::new();
            for p in &out {
                for i in 1..=d {
                    let mut q = p.clone();
                    q.push(i);
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }
}

/// What one pass produced at End.
pub(crate) struct PassResult {
    pub outputs: BTreeMap<VarRef, Val>,
    /// False when `empout` cancelled the emission.
    pub emit: bool,
    pub guard: Option<ExprId>,
}

pub(crate) struct Machine<'a> {
    fc: &'a Flowchart,
    pub arena: &'a mut ExprArena,
    params: BTreeMap<String, i64>,
    iterations: Option<u32>,
    inputs: BTreeMap<String, Shape>,
    outputs: BTreeMap<String, Shape>,
    /// Concrete input values; `None` for symbolic construction.
    concrete: Option<&'a Interpretation>,
    last_only: bool,
    limits: Limits,
}

struct Pass {
    vars: BTreeMap<VarRef, Val>,
    guard: Option<ExprId>,
    decisions: u32,
    seen: BTreeSet<(i64, ExprId)>,
}

impl<'a> Machine<'a> {
    pub fn new(
        fc: &'a Flowchart,
        arena: &'a mut ExprArena,
        cfg: &BuildConfig,
        concrete: Option<&'a Interpretation>,
    ) -> Result<Self, BuildError> {
        let violations = fc.validate();
        if !violations.is_empty() {
            return Err(BuildError::Invalid(violations));
        }
        let has_iter = fc.declares_iterations();
        match (has_iter, cfg.iterations) {
            (true, None) => return Err(BuildError::MissingIterations),
            (false, Some(_)) => return Err(BuildError::UnexpectedIterations),
            _ => {}
        }
        let mut params = BTreeMap::new();
        for d in fc.declarations(BlockType::Input).chain(fc.declarations(BlockType::Output)) {
            for p in &d.params {
                let v = cfg.params.get(p).ok_or_else(|| BuildError::MissingParameter(p.clone()))?;
                params.insert(p.clone(), *v);
            }
        }
        let last_only = match cfg.guard_mode {
            GuardMode::Auto => has_iter,
            GuardMode::FullConjunction => false,
            GuardMode::LastConditionOnly => true,
        };
        let mut m = Machine {
            fc,
            arena,
            params,
            iterations: cfg.iterations,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            concrete,
            last_only,
            limits: cfg.limits,
        };
        let mut scratch = Pass {
            vars: BTreeMap::new(),
            guard: None,
            decisions: 0,
            seen: BTreeSet::new(),
        };
        for b in fc.blocks() {
            let Statement::Declare(d) = &b.statement else { continue };
            for v in &d.vars {
                let mut dims = Vec::new();
                for e in &v.dims {
                    dims.push(m.index(b.id, e, &mut scratch)?);
                }
                let shape = Shape { dims };
                match b.ty {
                    BlockType::Input => m.inputs.insert(v.name.clone(), shape),
                    _ => m.outputs.insert(v.name.clone(), shape),
                };
            }
        }
        Ok(m)
    }

    pub fn params(&self) -> &BTreeMap<String, i64> {
        &self.params
    }

    fn num_id(&mut self, block: i64, x: f64) -> Result<ExprId, BuildError> {
        self.arena.num(x).map_err(|error| BuildError::Expr { block, error })
    }

    fn intern_val(&mut self, block: i64, v: Val) -> Result<ExprId, BuildError> {
        match v {
            Val::Num(x) => self.num_id(block, x),
            Val::Bool(b) => Ok(self.arena.boolean(b)),
            Val::Sym(id) => Ok(id),
        }
    }

    fn index(&mut self, block: i64, e: &SExpr, pass: &mut Pass) -> Result<i64, BuildError> {
        match self.eval(block, e, pass)? {
            Val::Num(x) => {
                if !(-1e15..=1e15).contains(&x) || (x as i64) as f64 != x {
                    return Err(BuildError::InvalidIndex { block });
                }
                Ok(x as i64)
            }
            Val::Bool(_) => Err(BuildError::InvalidIndex { block }),
            Val::Sym(_) => Err(BuildError::NonConcreteIndex { block }),
        }
    }

    fn lookup(&mut self, block: i64, name: &str, idx: Vec<i64>, pass: &Pass) -> Result<Val, BuildError> {
        let var = VarRef { name: name.to_string(), indices: idx };
        if let Some(v) = pass.vars.get(&var) {
            return Ok(*v);
        }
        if var.indices.is_empty() {
            if let Some(&p) = self.params.get(name) {
                return Ok(Val::Num(p as f64));
            }
            if name == EMPOUT {
                return Ok(Val::Num(1.0));
            }
        }
        if let Some(shape) = self.inputs.get(name) {
            if name == ITERATIONS && var.indices.is_empty() {
                return Ok(Val::Num(self.iterations.unwrap_or(0) as f64));
            }
            if !shape.contains(&var.indices) {
                return Err(BuildError::IndexOutOfRange { block, var: var.to_string() });
            }
            return match self.concrete {
                Some(interp) => match interp.get(&var) {
                    Some(Value::Num(x)) => Ok(Val::Num(*x)),
                    Some(Value::Bool(b)) => Ok(Val::Bool(*b)),
                    None => Err(BuildError::Eval {
                        block,
                        error: EvalError::UnboundVariable(var.to_string()),
                    }),
                },
                None => Ok(Val::Sym(self.arena.var(var))),
            };
        }
        Err(BuildError::UndefinedVariable { block, name: var.to_string() })
    }

    fn combine(&mut self, block: i64, op: Op, args: &[Val]) -> Result<Val, BuildError> {
        if args.iter().all(|a| !matches!(a, Val::Sym(_))) {
            let vals: Vec<Value> = args
                .iter()
                .map(|a| match *a {
                    Val::Num(x) => Value::Num(x),
                    Val::Bool(b) => Value::Bool(b),
                    Val::Sym(_) => unreachable!(),
                })
                .collect();
            return match expr::apply(op, &vals) {
                Ok(Value::Num(x)) => Ok(Val::Num(x)),
                Ok(Value::Bool(b)) => Ok(Val::Bool(b)),
                Err(error) => Err(BuildError::Eval { block, error }),
            };
        }
        let mut ids = Vec::with_capacity(args.len());
        for a in args {
            ids.push(self.intern_val(block, *a)?);
        }
        self.arena
            .apply_op(op, &ids)
            .map(Val::Sym)
            .map_err(|error| BuildError::Expr { block, error })
    }

    fn eval(&mut self, block: i64, e: &SExpr, pass: &mut Pass) -> Result<Val, BuildError> {
        match e {
            SExpr::Num(x) => Ok(Val::Num(*x)),
            SExpr::Bool(b) => Ok(Val::Bool(*b)),
            SExpr::Var { name, indices } => {
                let mut idx = Vec::with_capacity(indices.len());
                for i in indices {
                    idx.push(self.index(block, i, pass)?);
                }
                self.lookup(block, name, idx, pass)
            }
            SExpr::Unary(op, a) => {
                let a = self.eval(block, a, pass)?;
                self.combine(block, *op, &[a])
            }
            SExpr::Binary(op, a, b) => {
                let a = self.eval(block, a, pass)?;
                let b = self.eval(block, b, pass)?;
                self.combine(block, *op, &[a, b])
            }
        }
    }

    /// The condition with the opposite truth value, flipping comparisons in place.
    fn negate(&mut self, block: i64, id: ExprId) -> Result<ExprId, BuildError> {
        let r = match *self.arena.node(id) {
            Node::Binary(op, a, b) if op.is_comparison() => {
                let neg = op.negated_comparison().unwrap_or(op);
                self.arena.binary(neg, a, b)
            }
            Node::Unary(Op::Not, a) => Ok(a),
            _ => self.arena.unary(Op::Not, id),
        };
        r.map_err(|error| BuildError::Expr { block, error })
    }

    fn initial_pass(&self) -> Pass {
        let mut vars = BTreeMap::new();
        for (name, shape) in &self.outputs {
            for idx in shape.all() {
                vars.insert(VarRef { name: name.clone(), indices: idx }, Val::Num(0.0));
            }
        }
        Pass { vars, guard: None, decisions: 0, seen: BTreeSet::new() }
    }

    /// One walk from Start to End, following and extending `trace`.
    pub fn run_pass(&mut self, trace: &mut BranchTrace) -> Result<PassResult, BuildError> {
        let fc = self.fc;
        let mut pass = self.initial_pass();
        let mut cur = fc.start().expect("validated chart has a Start block");
        let mut steps = 0usize;
        loop {
            steps += 1;
            if steps > self.limits.max_steps {
                return Err(BuildError::LimitExceeded(Limit::Steps(self.limits.max_steps)));
            }
            let b = fc.block(cur).expect("edges reference existing blocks");
            let exit = match &b.statement {
                Statement::Empty | Statement::Declare(_) => {
                    if b.ty == BlockType::End {
                        break;
                    }
                    EdgeType::Normal
                }
                Statement::Assign(a) => {
                    self.assign(b.id, a, &mut pass)?;
                    EdgeType::Normal
                }
                Statement::Condition(c) => {
                    if self.decide(b.id, c, &mut pass, trace)? {
                        EdgeType::True
                    } else {
                        EdgeType::False
                    }
                }
            };
            cur = fc.successor(cur, exit).expect("validated chart has every successor");
        }
        let emit = match pass.vars.get(&VarRef::scalar(EMPOUT)) {
            Some(Val::Num(x)) => *x != 0.0,
            Some(Val::Bool(b)) => *b,
            _ => true,
        };
        let outputs = pass
            .vars
            .iter()
            .filter(|(v, _)| self.outputs.get(&v.name).is_some_and(|s| s.contains(&v.indices)))
            .map(|(v, x)| (v.clone(), *x))
            .collect();
        Ok(PassResult { outputs, emit, guard: pass.guard })
    }

    fn assign(&mut self, block: i64, a: &crate::stmt::Assignment, pass: &mut Pass) -> Result<(), BuildError> {
        let name = &a.target.name;
        let read_only = (a.target.indices.is_empty() && self.params.contains_key(name))
            || name == ITERATIONS;
        if read_only {
            return Err(BuildError::ReadOnly { block, name: name.clone() });
        }
        let mut idx = Vec::with_capacity(a.target.indices.len());
        for i in &a.target.indices {
            idx.push(self.index(block, i, pass)?);
        }
        if let Some(shape) = self.outputs.get(name) {
            if !shape.contains(&idx) {
                let var = VarRef { name: name.clone(), indices: idx };
                return Err(BuildError::IndexOutOfRange { block, var: var.to_string() });
            }
        }
        let v = self.eval(block, &a.rhs, pass)?;
        pass.vars.insert(VarRef { name: name.clone(), indices: idx }, v);
        Ok(())
    }

    fn decide(
        &mut self,
        block: i64,
        c: &SExpr,
        pass: &mut Pass,
        trace: &mut BranchTrace,
    ) -> Result<bool, BuildError> {
        let id = match self.eval(block, c, pass)? {
            Val::Bool(b) => return Ok(b),
            Val::Num(_) => return Err(BuildError::ConditionNotBoolean { block }),
            Val::Sym(id) => id,
        };
        if self.arena.kind(id) != expr::Kind::Bool {
            return Err(BuildError::ConditionNotBoolean { block });
        }
        if self.iterations.is_none() && !pass.seen.insert((block, id)) {
            return Err(BuildError::NonConcreteLoopControl { block });
        }
        pass.decisions += 1;
        let k = pass.decisions;
        let exit = match trace.entries.get(k as usize - 1) {
            Some(&(_, e)) => e,
            None => {
                trace.entries.push((k, 1));
                1
            }
        };
        let term = if exit == 1 { id } else { self.negate(block, id)? };
        pass.guard = match pass.guard {
            Some(g) if !self.last_only => Some(
                self.arena.binary(Op::And, g, term).map_err(|error| BuildError::Expr { block, error })?,
            ),
            _ => Some(term),
        };
        Ok(exit == 1)
    }
}

/// Builds the Q-determinant of `fc` for the parameter values in `cfg`.
pub fn build_qdet(fc: &Flowchart, cfg: &BuildConfig) -> Result<QDeterminant, BuildError> {
    let mut arena = ExprArena::new();
    let mut emitted: Vec<(Option<ExprId>, BTreeMap<VarRef, Val>)> = Vec::new();
    let params;
    {
        let mut m = Machine::new(fc, &mut arena, cfg, None)?;
        params = m.params().clone();
        let mut trace = BranchTrace::default();
        let mut passes = 0usize;
        loop {
            passes += 1;
            if passes > cfg.limits.max_branches {
                return Err(BuildError::LimitExceeded(Limit::Branches(cfg.limits.max_branches)));
            }
            let r = m.run_pass(&mut trace)?;
            if r.emit {
                emitted.push((r.guard, r.outputs));
            }
            match next_branch(&trace) {
                Some(t) => trace = t,
                None => break,
            }
        }
    }
    if emitted.is_empty() {
        return Err(BuildError::NoEmission);
    }
    let iterations = cfg.iterations.unwrap_or(0);
    let unconditional = emitted.len() == 1 && emitted[0].0.is_none();
    let outputs: Vec<VarRef> = emitted[0].1.keys().cloned().collect();
    let mut terms: BTreeMap<VarRef, Vec<GuardedPair>> = BTreeMap::new();
    let t = arena.boolean(true);
    for (guard, values) in &emitted {
        for v in &outputs {
            let value = match values[v] {
                Val::Num(x) => arena.num(x).map_err(|error| BuildError::Expr { block: -1, error })?,
                Val::Bool(b) => arena.boolean(b),
                Val::Sym(id) => id,
            };
            terms.entry(v.clone()).or_default().push(GuardedPair { guard: guard.unwrap_or(t), value });
        }
    }
    let mut q = QDeterminant::new(arena, params, iterations);
    for (v, pairs) in terms {
        let term = if unconditional {
            QTerm::Unconditional(pairs[0].value)
        } else if iterations > 0 && pairs.len() == iterations as usize {
            QTerm::Truncated { pairs, bound: iterations }
        } else {
            QTerm::Conditional(pairs)
        };
        q.insert(v, term)?;
    }
    Ok(q)
}
