//! Expressions over the fixed operation set, stored in a hash-consed arena.
//!
//! Structurally identical subexpressions share one [`ExprId`]. Operand ids are
//! always smaller than the id of the node using them, so ascending id order is
//! a topological order of every expression in the arena.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExprId(pub u32);

impl ExprId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ExprId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Abs,
    And,
    Or,
    Not,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Arith,
    Bool,
}

impl Op {
    pub const ALL: [Op; 15] = [
        Op::Add,
        Op::Sub,
        Op::Mul,
        Op::Div,
        Op::Neg,
        Op::Abs,
        Op::And,
        Op::Or,
        Op::Not,
        Op::Eq,
        Op::Ne,
        Op::Lt,
        Op::Le,
        Op::Gt,
        Op::Ge,
    ];

    pub fn arity(self) -> usize {
        match self {
            Op::Neg | Op::Abs | Op::Not => 1,
            _ => 2,
        }
    }

    /// Associative and commutative: the operators whose chains may be regrouped.
    pub fn is_ac(self) -> bool {
        matches!(self, Op::Add | Op::Mul | Op::And | Op::Or)
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, Op::Eq | Op::Ne | Op::Lt | Op::Le | Op::Gt | Op::Ge)
    }

    /// Name used by the JSON expression format.
    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Neg => "neg",
            Op::Abs => "abs",
            Op::And => "and",
            Op::Or => "or",
            Op::Not => "not",
            Op::Eq => "eq",
            Op::Ne => "ne",
            Op::Lt => "lt",
            Op::Le => "le",
            Op::Gt => "gt",
            Op::Ge => "ge",
        }
    }

    pub fn from_name(s: &str) -> Option<Op> {
        Op::ALL.iter().copied().find(|op| op.name() == s)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub | Op::Neg => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::Abs => "abs",
            Op::And => "and",
            Op::Or => "or",
            Op::Not => "not",
            Op::Eq => "=",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
        }
    }

    pub fn result_kind(self) -> Kind {
        match self {
            Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Neg | Op::Abs => Kind::Arith,
            _ => Kind::Bool,
        }
    }

    /// Required operand kind; `None` means both operands must merely agree.
    pub fn operand_kind(self) -> Option<Kind> {
        match self {
            Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Neg | Op::Abs => Some(Kind::Arith),
            Op::Lt | Op::Le | Op::Gt | Op::Ge => Some(Kind::Arith),
            Op::And | Op::Or | Op::Not => Some(Kind::Bool),
            Op::Eq | Op::Ne => None,
        }
    }

    /// The comparison with the opposite truth value.
    pub fn negated_comparison(self) -> Option<Op> {
        Some(match self {
            Op::Eq => Op::Ne,
            Op::Ne => Op::Eq,
            Op::Lt => Op::Ge,
            Op::Ge => Op::Lt,
            Op::Le => Op::Gt,
            Op::Gt => Op::Le,
            _ => return None,
        })
    }
}

/// A variable reference: a name with zero or more integer indices, e.g. `A(1,2)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarRef {
    pub name: String,
    pub indices: Vec<i64>,
}

impl VarRef {
    pub fn new(name: impl Into<String>, indices: &[i64]) -> Self {
        VarRef { name: name.into(), indices: indices.to_vec() }
    }

    pub fn scalar(name: impl Into<String>) -> Self {
        VarRef { name: name.into(), indices: Vec::new() }
    }

    /// Parses `name` or `name(i,j,...)`.
    pub fn parse(s: &str) -> Result<VarRef, ExprError> {
        let bad = || ExprError::InvalidVariable(s.to_string());
        let s = s.trim();
        let (name, rest) = match s.find('(') {
            Some(p) => (&s[..p], Some(&s[p + 1..])),
            None => (s, None),
        };
        let name = name.trim();
        if !is_identifier(name) {
            return Err(bad());
        }
        let mut indices = Vec::new();
        if let Some(rest) = rest {
            let inner = rest.strip_suffix(')').ok_or_else(bad)?;
            if inner.trim().is_empty() {
                return Err(bad());
            }
            for part in inner.split(',') {
                indices.push(part.trim().parse::<i64>().map_err(|_| bad())?);
            }
        }
        Ok(VarRef { name: name.to_string(), indices })
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.indices.is_empty() {
            f.write_str("(")?;
            for (k, i) in self.indices.iter().enumerate() {
                if k > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{i}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// A literal leaf. Numbers keep their canonical decimal text.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Const {
    Num(String),
    Bool(bool),
}

impl Const {
    pub fn num(x: f64) -> Result<Const, ExprError> {
        if !x.is_finite() {
            return Err(ExprError::InvalidConstant(format!("{x}")));
        }
        // -0 and 0 are one constant
        let x = if x == 0.0 { 0.0 } else { x };
        Ok(Const::Num(format!("{x}")))
    }

    pub fn parse_num(s: &str) -> Result<Const, ExprError> {
        let x: f64 = s.trim().parse().map_err(|_| ExprError::InvalidConstant(s.to_string()))?;
        Const::num(x)
    }

    pub fn value(&self) -> Value {
        match self {
            // canonical text always parses
            Const::Num(s) => Value::Num(s.parse().unwrap_or(f64::NAN)),
            Const::Bool(b) => Value::Bool(*b),
        }
    }
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Num(s) => f.write_str(s),
            Const::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Const(Const),
    Var(VarRef),
    Unary(Op, ExprId),
    Binary(Op, ExprId, ExprId),
}

impl Node {
    pub fn op(&self) -> Option<Op> {
        match self {
            Node::Unary(op, _) | Node::Binary(op, _, _) => Some(*op),
            _ => None,
        }
    }

    pub fn operands(&self) -> impl Iterator<Item = ExprId> {
        let (a, b) = match *self {
            Node::Unary(_, a) => (Some(a), None),
            Node::Binary(_, a, b) => (Some(a), Some(b)),
            _ => (None, None),
        };
        a.into_iter().chain(b)
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Const(_) | Node::Var(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Num(f64),
    Bool(bool),
}

impl Value {
    pub fn kind(self) -> Kind {
        match self {
            Value::Num(_) => Kind::Arith,
            Value::Bool(_) => Kind::Bool,
        }
    }

    pub fn as_num(self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(x),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            Value::Num(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Assignment of values to input variables.
pub type Interpretation = BTreeMap<VarRef, Value>;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("variable {0} has no value")]
    UnboundVariable(String),
    #[error("operand kinds do not fit operator {0}")]
    TypeMismatch(&'static str),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("operator {op} cannot take operands of these kinds")]
    KindMismatch { op: &'static str },
    #[error("operator {op} takes {expected} operands, got {got}")]
    ArityMismatch { op: &'static str, expected: usize, got: usize },
    #[error("node {0} is not a binary operation")]
    NotBinary(ExprId),
    #[error("invalid numeric constant `{0}`")]
    InvalidConstant(String),
    #[error("invalid variable reference `{0}`")]
    InvalidVariable(String),
    #[error("unknown expression id {0}")]
    UnknownId(ExprId),
}

fn fabs(x: f64) -> f64 {
    if x < 0.0 || (x == 0.0 && x.is_sign_negative()) {
        -x
    } else {
        x
    }
}

/// Applies one operation to concrete operand values.
pub fn apply(op: Op, args: &[Value]) -> Result<Value, EvalError> {
    use Value::{Bool as B, Num as N};
    let mismatch = || EvalError::TypeMismatch(op.name());
    if args.len() != op.arity() {
        return Err(mismatch());
    }
    let v = match (op, args) {
        (Op::Neg, [N(a)]) => N(-a),
        (Op::Abs, [N(a)]) => N(fabs(*a)),
        (Op::Not, [B(a)]) => B(!a),
        (Op::Add, [N(a), N(b)]) => N(a + b),
        (Op::Sub, [N(a), N(b)]) => N(a - b),
        (Op::Mul, [N(a), N(b)]) => N(a * b),
        (Op::Div, [N(a), N(b)]) => {
            if *b == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            N(a / b)
        }
        (Op::And, [B(a), B(b)]) => B(*a && *b),
        (Op::Or, [B(a), B(b)]) => B(*a || *b),
        (Op::Eq, [N(a), N(b)]) => B(a == b),
        (Op::Ne, [N(a), N(b)]) => B(a != b),
        (Op::Eq, [B(a), B(b)]) => B(a == b),
        (Op::Ne, [B(a), B(b)]) => B(a != b),
        (Op::Lt, [N(a), N(b)]) => B(a < b),
        (Op::Le, [N(a), N(b)]) => B(a <= b),
        (Op::Gt, [N(a), N(b)]) => B(a > b),
        (Op::Ge, [N(a), N(b)]) => B(a >= b),
        _ => return Err(mismatch()),
    };
    Ok(v)
}

/// How operation nodes are counted across a set of expressions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Sharing {
    /// Each distinct node id once, whichever expressions reach it.
    #[default]
    Dag,
    /// Every occurrence in every expression's tree expansion.
    Tree,
}

/// Bookkeeping for a chain rebuilt by [`ExprArena::rebalance_doubling`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainInfo {
    pub op: Op,
    pub operands: usize,
    /// All operands shared one nesting level.
    pub homogeneous: bool,
    pub base_level: u32,
    /// The operation nodes forming the rebuilt tree, root included.
    pub members: Vec<ExprId>,
}

impl ChainInfo {
    /// Per-level counts of the rebuilt tree, indexed from `base_level + 1`.
    pub fn exact_counts(&self, arena: &ExprArena) -> Vec<u64> {
        let mut counts = Vec::new();
        for &m in &self.members {
            let r = (arena.level(m) - self.base_level - 1) as usize;
            if counts.len() <= r {
                counts.resize(r + 1, 0);
            }
            counts[r] += 1;
        }
        counts
    }

    /// The idealized count `floor(m / 2^j)` at `base_level + j`.
    pub fn floor_counts(&self) -> Vec<u64> {
        let mut counts = Vec::new();
        let mut m = (self.operands as u64) / 2;
        while m > 0 {
            counts.push(m);
            m /= 2;
        }
        counts
    }
}

#[derive(Clone, Debug, Default)]
pub struct ExprArena {
    nodes: Vec<Node>,
    levels: Vec<u32>,
    kinds: Vec<Kind>,
    index: BTreeMap<Node, ExprId>,
    chains: BTreeMap<ExprId, ChainInfo>,
}

impl ExprArena {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: ExprId) -> bool {
        id.index() < self.nodes.len()
    }

    pub fn node(&self, id: ExprId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn get(&self, id: ExprId) -> Option<&Node> {
        self.nodes.get(id.index())
    }

    /// Nesting level: leaves are 0, an operation is one more than its deepest operand.
    #[inline]
    pub fn level(&self, id: ExprId) -> u32 {
        self.levels[id.index()]
    }

    #[inline]
    pub fn kind(&self, id: ExprId) -> Kind {
        self.kinds[id.index()]
    }

    pub fn chain(&self, root: ExprId) -> Option<&ChainInfo> {
        self.chains.get(&root)
    }

    fn intern(&mut self, node: Node, level: u32, kind: Kind) -> ExprId {
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = ExprId(self.nodes.len() as u32);
        self.index.insert(node.clone(), id);
        self.nodes.push(node);
        self.levels.push(level);
        self.kinds.push(kind);
        id
    }

    pub fn var(&mut self, v: VarRef) -> ExprId {
        self.intern(Node::Var(v), 0, Kind::Arith)
    }

    /// A boolean-valued input variable.
    pub fn bool_var(&mut self, v: VarRef) -> ExprId {
        let node = Node::Var(v);
        if let Some(&id) = self.index.get(&node) {
            self.kinds[id.index()] = Kind::Bool;
            return id;
        }
        self.intern(node, 0, Kind::Bool)
    }

    pub fn named(&mut self, name: &str, indices: &[i64]) -> ExprId {
        self.var(VarRef::new(name, indices))
    }

    pub fn constant(&mut self, c: Const) -> ExprId {
        let kind = match c {
            Const::Num(_) => Kind::Arith,
            Const::Bool(_) => Kind::Bool,
        };
        self.intern(Node::Const(c), 0, kind)
    }

    pub fn num(&mut self, x: f64) -> Result<ExprId, ExprError> {
        Ok(self.constant(Const::num(x)?))
    }

    pub fn boolean(&mut self, b: bool) -> ExprId {
        self.constant(Const::Bool(b))
    }

    fn check(&self, id: ExprId) -> Result<(), ExprError> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(ExprError::UnknownId(id))
        }
    }

    pub fn unary(&mut self, op: Op, a: ExprId) -> Result<ExprId, ExprError> {
        if op.arity() != 1 {
            return Err(ExprError::ArityMismatch { op: op.name(), expected: op.arity(), got: 1 });
        }
        self.check(a)?;
        if op.operand_kind() != Some(self.kind(a)) {
            return Err(ExprError::KindMismatch { op: op.name() });
        }
        let level = self.level(a) + 1;
        Ok(self.intern(Node::Unary(op, a), level, op.result_kind()))
    }

    pub fn binary(&mut self, op: Op, a: ExprId, b: ExprId) -> Result<ExprId, ExprError> {
        if op.arity() != 2 {
            return Err(ExprError::ArityMismatch { op: op.name(), expected: op.arity(), got: 2 });
        }
        self.check(a)?;
        self.check(b)?;
        let (ka, kb) = (self.kind(a), self.kind(b));
        let ok = match op.operand_kind() {
            Some(k) => ka == k && kb == k,
            None => ka == kb,
        };
        if !ok {
            return Err(ExprError::KindMismatch { op: op.name() });
        }
        let level = self.level(a).max(self.level(b)) + 1;
        Ok(self.intern(Node::Binary(op, a, b), level, op.result_kind()))
    }

    pub fn apply_op(&mut self, op: Op, operands: &[ExprId]) -> Result<ExprId, ExprError> {
        match *operands {
            [a] if op.arity() == 1 => self.unary(op, a),
            [a, b] if op.arity() == 2 => self.binary(op, a, b),
            _ => Err(ExprError::ArityMismatch {
                op: op.name(),
                expected: op.arity(),
                got: operands.len(),
            }),
        }
    }

    /// Every node reachable from `roots`, in ascending id order.
    pub fn reachable(&self, roots: &[ExprId]) -> Vec<ExprId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<ExprId> = roots.to_vec();
        while let Some(id) = stack.pop() {
            if !core::mem::replace(&mut seen[id.index()], true) {
                stack.extend(self.node(id).operands());
            }
        }
        (0..seen.len()).filter(|&i| seen[i]).map(|i| ExprId(i as u32)).collect()
    }

    pub fn free_vars(&self, id: ExprId) -> BTreeSet<VarRef> {
        self.reachable(&[id])
            .into_iter()
            .filter_map(|n| match self.node(n) {
                Node::Var(v) => Some(v.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn evaluate(&self, id: ExprId, interp: &Interpretation) -> Result<Value, EvalError> {
        let mut memo = BTreeMap::new();
        self.evaluate_memo(id, interp, &mut memo)
    }

    /// Evaluates with a caller-held memo so several roots can share work.
    pub fn evaluate_memo(
        &self,
        id: ExprId,
        interp: &Interpretation,
        memo: &mut BTreeMap<ExprId, Result<Value, EvalError>>,
    ) -> Result<Value, EvalError> {
        if let Some(v) = memo.get(&id) {
            return v.clone();
        }
        let mut stack = vec![id];
        let mut todo = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if memo.contains_key(&n) || !todo.insert(n) {
                continue;
            }
            stack.extend(self.node(n).operands());
        }
        for n in todo {
            let v = match self.node(n) {
                Node::Const(c) => Ok(c.value()),
                Node::Var(v) => interp
                    .get(v)
                    .copied()
                    .ok_or_else(|| EvalError::UnboundVariable(v.to_string())),
                node => {
                    let op = node.op().unwrap_or(Op::Add);
                    let mut args = Vec::with_capacity(2);
                    let mut err = None;
                    for o in node.operands() {
                        match &memo[&o] {
                            Ok(v) => args.push(*v),
                            Err(e) => {
                                err = Some(e.clone());
                                break;
                            }
                        }
                    }
                    match err {
                        Some(e) => Err(e),
                        None => apply(op, &args),
                    }
                }
            };
            memo.insert(n, v);
        }
        memo[&id].clone()
    }

    /// Operands of the maximal same-operator chain rooted at `id`, left to right.
    ///
    /// For a non-AC operator the chain is just the node's own operands.
    pub fn flatten_chain(&self, id: ExprId) -> Result<(Op, Vec<ExprId>), ExprError> {
        self.check(id)?;
        let Node::Binary(op, a, b) = *self.node(id) else {
            return Err(ExprError::NotBinary(id));
        };
        if !op.is_ac() {
            return Ok((op, vec![a, b]));
        }
        let mut out = Vec::new();
        let mut stack = vec![b, a];
        while let Some(n) = stack.pop() {
            match *self.node(n) {
                Node::Binary(o, x, y) if o == op => {
                    stack.push(y);
                    stack.push(x);
                }
                _ => out.push(n),
            }
        }
        Ok((op, out))
    }

    /// Rebuilds every AC chain under `id` as an as-soon-as-possible pairing tree.
    pub fn rebalance_doubling(&mut self, id: ExprId) -> ExprId {
        self.rebalance_all(&[id])[0]
    }

    /// Like [`rebalance_doubling`](Self::rebalance_doubling) for several roots,
    /// sharing the rebuilt subexpressions between them.
    pub fn rebalance_all(&mut self, roots: &[ExprId]) -> Vec<ExprId> {
        let mut memo = BTreeMap::new();
        roots.iter().map(|&r| self.rebalance_memo(r, &mut memo)).collect()
    }

    fn rebalance_memo(&mut self, id: ExprId, memo: &mut BTreeMap<ExprId, ExprId>) -> ExprId {
        if let Some(&m) = memo.get(&id) {
            return m;
        }
        let out = match self.node(id).clone() {
            Node::Const(_) | Node::Var(_) => id,
            Node::Unary(op, a) => {
                let a2 = self.rebalance_memo(a, memo);
                self.unary(op, a2).expect("rebalancing keeps operand kinds")
            }
            Node::Binary(op, a, b) if !op.is_ac() => {
                let a2 = self.rebalance_memo(a, memo);
                let b2 = self.rebalance_memo(b, memo);
                self.binary(op, a2, b2).expect("rebalancing keeps operand kinds")
            }
            Node::Binary(op, _, _) => {
                let (_, operands) = self.flatten_chain(id).expect("binary node");
                let mapped: Vec<ExprId> =
                    operands.into_iter().map(|o| self.rebalance_memo(o, memo)).collect();
                self.build_doubling(op, &mapped)
            }
        };
        memo.insert(id, out);
        out
    }

    /// Combines `operands` with `op`, pairing all ready values at each level.
    ///
    /// Operands become ready at their nesting level; at every step the ready
    /// values are paired left to right and an odd one is carried to the next step.
    pub fn build_doubling(&mut self, op: Op, operands: &[ExprId]) -> ExprId {
        match *operands {
            [] => panic!("empty chain"),
            [a] => return a,
            [a, b] => return self.binary(op, a, b).expect("chain operand kinds"),
            _ => {}
        }
        let m = operands.len();
        let levels: Vec<u32> = operands.iter().map(|&o| self.level(o)).collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&i| (levels[i], i));
        let base = levels[order[0]];
        let homogeneous = levels.iter().all(|&l| l == base);

        let mut members = Vec::with_capacity(m - 1);
        let mut avail: Vec<ExprId> = Vec::new();
        let mut next_in = 0;
        let mut t = base;
        loop {
            while next_in < m && levels[order[next_in]] <= t {
                avail.push(operands[order[next_in]]);
                next_in += 1;
            }
            if avail.len() == 1 && next_in == m {
                break;
            }
            if avail.len() < 2 {
                t = levels[order[next_in]];
                continue;
            }
            let carry = if avail.len() % 2 == 1 { avail.last().copied() } else { None };
            let mut next: Vec<ExprId> = carry.into_iter().collect();
            for pair in avail.chunks_exact(2) {
                let n = self.binary(op, pair[0], pair[1]).expect("chain operand kinds");
                members.push(n);
                next.push(n);
            }
            avail = next;
            t += 1;
        }
        let root = avail[0];
        self.chains.entry(root).or_insert(ChainInfo {
            op,
            operands: m,
            homogeneous,
            base_level: base,
            members,
        });
        root
    }

    /// Number of occurrences of each node in the tree expansions of `roots`,
    /// indexed by node id. A root listed twice counts twice.
    pub fn occurrence_counts(&self, roots: &[ExprId]) -> Vec<u128> {
        let top = roots.iter().map(|r| r.index() + 1).max().unwrap_or(0);
        let mut paths = vec![0u128; top];
        for r in roots {
            paths[r.index()] += 1;
        }
        for i in (0..top).rev() {
            let p = paths[i];
            if p == 0 {
                continue;
            }
            for o in self.nodes[i].operands() {
                paths[o.index()] += p;
            }
        }
        paths
    }

    /// Operation count per nesting level over `roots`; entry `r - 1` holds level `r`.
    pub fn count_ops_per_level(&self, roots: &[ExprId], sharing: Sharing) -> Vec<u64> {
        let mut counts: Vec<u64> = Vec::new();
        let mut bump = |level: u32, by: u64| {
            let r = level as usize - 1;
            if counts.len() <= r {
                counts.resize(r + 1, 0);
            }
            counts[r] += by;
        };
        match sharing {
            Sharing::Dag => {
                for id in self.reachable(roots) {
                    if !self.node(id).is_leaf() {
                        bump(self.level(id), 1);
                    }
                }
            }
            Sharing::Tree => {
                let paths = self.occurrence_counts(roots);
                for (i, &p) in paths.iter().enumerate() {
                    if p > 0 && !self.nodes[i].is_leaf() {
                        bump(self.levels[i], p as u64);
                    }
                }
            }
        }
        counts
    }

    /// Infix rendering, fully parenthesized.
    pub fn display(&self, id: ExprId) -> String {
        let mut s = String::new();
        self.write_infix(id, &mut s);
        s
    }

    fn write_infix(&self, id: ExprId, out: &mut String) {
        match self.node(id) {
            Node::Const(c) => out.push_str(&c.to_string()),
            Node::Var(v) => out.push_str(&v.to_string()),
            Node::Unary(op, a) => {
                match op {
                    Op::Neg => out.push('-'),
                    Op::Abs => out.push_str("abs"),
                    _ => out.push_str("not "),
                }
                out.push('(');
                self.write_infix(*a, out);
                out.push(')');
            }
            Node::Binary(op, a, b) => {
                out.push('(');
                self.write_infix(*a, out);
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
                self.write_infix(*b, out);
                out.push(')');
            }
        }
    }

    /// Copies the expression `id` of `other` into this arena.
    pub fn import(&mut self, other: &ExprArena, id: ExprId) -> ExprId {
        let mut map = BTreeMap::new();
        for n in other.reachable(&[id]) {
            let new = match other.node(n) {
                Node::Const(c) => self.constant(c.clone()),
                Node::Var(v) => {
                    if other.kind(n) == Kind::Bool {
                        self.bool_var(v.clone())
                    } else {
                        self.var(v.clone())
                    }
                }
                Node::Unary(op, a) => self.unary(*op, map[a]).expect("valid source"),
                Node::Binary(op, a, b) => self.binary(*op, map[a], map[b]).expect("valid source"),
            };
            map.insert(n, new);
        }
        map[&id]
    }
}
