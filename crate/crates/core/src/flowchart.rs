//! Flowchart model: typed blocks joined by typed edges.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::stmt::{self, Assignment, Declaration, SExpr, StatementSyntaxError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockType {
    Start,
    End,
    Process,
    Decision,
    Input,
    Output,
}

impl BlockType {
    pub fn code(self) -> u8 {
        match self {
            BlockType::Start => 0,
            BlockType::End => 1,
            BlockType::Process => 2,
            BlockType::Decision => 3,
            BlockType::Input => 4,
            BlockType::Output => 5,
        }
    }

    pub fn from_code(c: i64) -> Option<BlockType> {
        Some(match c {
            0 => BlockType::Start,
            1 => BlockType::End,
            2 => BlockType::Process,
            3 => BlockType::Decision,
            4 => BlockType::Input,
            5 => BlockType::Output,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeType {
    False,
    True,
    Normal,
}

impl EdgeType {
    pub fn code(self) -> u8 {
        match self {
            EdgeType::False => 0,
            EdgeType::True => 1,
            EdgeType::Normal => 2,
        }
    }

    pub fn from_code(c: i64) -> Option<EdgeType> {
        Some(match c {
            0 => EdgeType::False,
            1 => EdgeType::True,
            2 => EdgeType::Normal,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Statement {
    Empty,
    Assign(Assignment),
    Condition(SExpr),
    Declare(Declaration),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub id: i64,
    pub ty: BlockType,
    pub content: String,
    pub statement: Statement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: i64,
    pub to: i64,
    pub ty: EdgeType,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum FlowchartError {
    #[error("block {id} has unknown type {ty}")]
    UnknownBlockType { id: i64, ty: i64 },
    #[error("edge {from}->{to} has unknown type {ty}")]
    UnknownEdgeType { from: i64, to: i64, ty: i64 },
    #[error("edge {from}->{to} references a missing block")]
    DanglingEdge { from: i64, to: i64 },
    #[error("block id {0} is used twice")]
    DuplicateBlockId(i64),
    #[error("block {block}: {error}")]
    Statement { block: i64, error: StatementSyntaxError },
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    StartCount(usize),
    EndCount(usize),
    StartDegree { block: i64 },
    EndDegree { block: i64 },
    DecisionArity { block: i64 },
    FlowArity { block: i64 },
    MultipleOperations { block: i64 },
    ConditionShape { block: i64 },
    Unreachable { block: i64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::StartCount(n) => write!(f, "expected one Start block, found {n}"),
            Violation::EndCount(n) => write!(f, "expected one End block, found {n}"),
            Violation::StartDegree { block } => {
                write!(f, "block {block}: Start needs no incoming and one outgoing flowline")
            }
            Violation::EndDegree { block } => {
                write!(f, "block {block}: End needs incoming and no outgoing flowlines")
            }
            Violation::DecisionArity { block } => write!(f, "block {block}: decision branch arity"),
            Violation::FlowArity { block } => {
                write!(f, "block {block}: needs exactly one normal outgoing flowline")
            }
            Violation::MultipleOperations { block } => {
                write!(f, "block {block}: more than one operation")
            }
            Violation::ConditionShape { block } => {
                write!(f, "block {block}: condition must compare two operands without operations")
            }
            Violation::Unreachable { block } => write!(f, "block {block}: unreachable from Start"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Flowchart {
    blocks: Vec<Block>,
    edges: Vec<Edge>,
    index: BTreeMap<i64, usize>,
}

fn parse_statement(ty: BlockType, content: &str) -> Result<Statement, StatementSyntaxError> {
    Ok(match ty {
        BlockType::Start | BlockType::End => Statement::Empty,
        BlockType::Process => Statement::Assign(stmt::parse_assignment(content)?),
        BlockType::Decision => Statement::Condition(stmt::parse_condition(content)?),
        BlockType::Input | BlockType::Output => {
            Statement::Declare(stmt::parse_declaration(content)?)
        }
    })
}

impl Flowchart {
    /// Builds a chart from raw `(id, type, content)` and `(from, to, type)` records.
    pub fn from_raw(
        blocks: impl IntoIterator<Item = (i64, i64, String)>,
        edges: impl IntoIterator<Item = (i64, i64, i64)>,
    ) -> Result<Flowchart, FlowchartError> {
        let mut out = Vec::new();
        let mut index = BTreeMap::new();
        for (id, ty, content) in blocks {
            let t = BlockType::from_code(ty).ok_or(FlowchartError::UnknownBlockType { id, ty })?;
            if index.insert(id, out.len()).is_some() {
                return Err(FlowchartError::DuplicateBlockId(id));
            }
            let statement = parse_statement(t, &content)
                .map_err(|error| FlowchartError::Statement { block: id, error })?;
            out.push(Block { id, ty: t, content, statement });
        }
        let mut es = Vec::new();
        for (from, to, ty) in edges {
            let t = EdgeType::from_code(ty).ok_or(FlowchartError::UnknownEdgeType { from, to, ty })?;
            if !index.contains_key(&from) || !index.contains_key(&to) {
                return Err(FlowchartError::DanglingEdge { from, to });
            }
            es.push(Edge { from, to, ty: t });
        }
        Ok(Flowchart { blocks: out, edges: es, index })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn block(&self, id: i64) -> Option<&Block> {
        self.index.get(&id).map(|&i| &self.blocks[i])
    }

    /// Target of the first outgoing edge of `id` with type `ty`.
    pub fn successor(&self, id: i64, ty: EdgeType) -> Option<i64> {
        self.edges.iter().find(|e| e.from == id && e.ty == ty).map(|e| e.to)
    }

    pub fn start(&self) -> Option<i64> {
        self.blocks.iter().find(|b| b.ty == BlockType::Start).map(|b| b.id)
    }

    /// Declarations of all blocks of type `ty`, in block order.
    pub fn declarations(&self, ty: BlockType) -> impl Iterator<Item = &Declaration> {
        self.blocks.iter().filter(move |b| b.ty == ty).filter_map(|b| match &b.statement {
            Statement::Declare(d) => Some(d),
            _ => None,
        })
    }

    /// Whether some input block declares the iteration bound `iterations`.
    pub fn declares_iterations(&self) -> bool {
        self.declarations(BlockType::Input)
            .any(|d| d.vars.iter().any(|v| v.name == crate::builder::ITERATIONS))
    }

    /// Structural checks; an empty list means the chart is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let count = |t| self.blocks.iter().filter(|b| b.ty == t).count();
        let starts = count(BlockType::Start);
        let ends = count(BlockType::End);
        if starts != 1 {
            v.push(Violation::StartCount(starts));
        }
        if ends != 1 {
            v.push(Violation::EndCount(ends));
        }
        let out_of = |id: i64, ty: Option<EdgeType>| {
            self.edges.iter().filter(|e| e.from == id && ty.is_none_or(|t| e.ty == t)).count()
        };
        let into = |id: i64| self.edges.iter().filter(|e| e.to == id).count();
        for b in &self.blocks {
            match b.ty {
                BlockType::Start => {
                    if into(b.id) != 0 || out_of(b.id, None) != 1 {
                        v.push(Violation::StartDegree { block: b.id });
                    }
                }
                BlockType::End => {
                    if into(b.id) == 0 || out_of(b.id, None) != 0 {
                        v.push(Violation::EndDegree { block: b.id });
                    }
                }
                BlockType::Decision => {
                    if out_of(b.id, Some(EdgeType::True)) != 1
                        || out_of(b.id, Some(EdgeType::False)) != 1
                        || out_of(b.id, None) != 2
                    {
                        v.push(Violation::DecisionArity { block: b.id });
                    }
                    if let Statement::Condition(c) = &b.statement {
                        if !condition_shape_ok(c) {
                            v.push(Violation::ConditionShape { block: b.id });
                        }
                    }
                }
                BlockType::Process | BlockType::Input | BlockType::Output => {
                    if out_of(b.id, Some(EdgeType::Normal)) != 1 || out_of(b.id, None) != 1 {
                        v.push(Violation::FlowArity { block: b.id });
                    }
                    if let Statement::Assign(a) = &b.statement {
                        if a.rhs.op_count() > 1 {
                            v.push(Violation::MultipleOperations { block: b.id });
                        }
                    }
                }
            }
        }
        if let Some(s) = self.start() {
            let mut seen = BTreeSet::new();
            let mut stack = vec![s];
            while let Some(id) = stack.pop() {
                if seen.insert(id) {
                    stack.extend(self.edges.iter().filter(|e| e.from == id).map(|e| e.to));
                }
            }
            for b in &self.blocks {
                if !seen.contains(&b.id) {
                    v.push(Violation::Unreachable { block: b.id });
                }
            }
        }
        v
    }
}

/// A comparison of two operation-free operands, or a bare boolean variable.
fn condition_shape_ok(c: &SExpr) -> bool {
    match c {
        SExpr::Binary(op, a, b) => op.is_comparison() && a.is_leaf() && b.is_leaf(),
        SExpr::Var { .. } | SExpr::Bool(_) => true,
        _ => false,
    }
}

/// Incremental construction of a chart with sequential ids.
#[derive(Clone, Debug, Default)]
pub struct ChartBuilder {
    blocks: Vec<(i64, i64, String)>,
    edges: Vec<(i64, i64, i64)>,
}

impl ChartBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn block(&mut self, ty: BlockType, content: &str) -> i64 {
        let id = self.blocks.len() as i64;
        self.blocks.push((id, ty.code() as i64, content.into()));
        id
    }

    pub fn edge(&mut self, from: i64, to: i64, ty: EdgeType) {
        self.edges.push((from, to, ty.code() as i64));
    }

    /// A chain of process blocks linked by normal edges; returns (first, last).
    pub fn process_chain(&mut self, statements: &[&str]) -> (i64, i64) {
        let first = self.block(BlockType::Process, statements[0]);
        let mut last = first;
        for s in &statements[1..] {
            let b = self.block(BlockType::Process, s);
            self.edge(last, b, EdgeType::Normal);
            last = b;
        }
        (first, last)
    }

    pub fn build(self) -> Result<Flowchart, FlowchartError> {
        Flowchart::from_raw(self.blocks, self.edges)
    }
}
