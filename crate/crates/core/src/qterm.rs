//! Q-terms and Q-determinants.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::expr::{EvalError, ExprArena, ExprId, Interpretation, Kind, Value, VarRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GuardedPair {
    pub guard: ExprId,
    pub value: ExprId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QTerm {
    Unconditional(ExprId),
    Conditional(Vec<GuardedPair>),
    /// An infinite conditional term cut after `bound` pairs.
    Truncated { pairs: Vec<GuardedPair>, bound: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TermKind {
    Unconditional,
    Conditional,
    Truncated,
}

impl QTerm {
    pub fn kind(&self) -> TermKind {
        match self {
            QTerm::Unconditional(_) => TermKind::Unconditional,
            QTerm::Conditional(_) => TermKind::Conditional,
            QTerm::Truncated { .. } => TermKind::Truncated,
        }
    }

    /// Guarded pairs; empty for an unconditional term.
    pub fn pairs(&self) -> &[GuardedPair] {
        match self {
            QTerm::Unconditional(_) => &[],
            QTerm::Conditional(p) | QTerm::Truncated { pairs: p, .. } => p,
        }
    }

    /// Number of pairs, or 1 for an unconditional term.
    pub fn len(&self) -> usize {
        match self {
            QTerm::Unconditional(_) => 1,
            _ => self.pairs().len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Guard then value for each pair; just the value when unconditional.
    pub fn expressions(&self) -> Vec<ExprId> {
        match self {
            QTerm::Unconditional(w) => alloc::vec![*w],
            _ => self.pairs().iter().flat_map(|p| [p.guard, p.value]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum QError {
    #[error("output {0} is defined twice")]
    DuplicateOutput(String),
    #[error("conditional term for {0} has no pairs")]
    EmptyTerm(String),
    #[error("term for {output}: {what} has the wrong kind")]
    WrongKind { output: String, what: &'static str },
    #[error("truncated term for {output} has {len} pairs, expected {bound}")]
    TruncationLength { output: String, len: usize, bound: u32 },
    #[error("expression id {0} is not in the arena")]
    UnknownId(ExprId),
    #[error("output variable {0} also occurs as an input")]
    OutputUsedAsInput(String),
}

/// U/C/I split of the outputs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Partition {
    pub unconditional: Vec<VarRef>,
    pub conditional: Vec<VarRef>,
    pub infinite: Vec<VarRef>,
}

/// Result for one output under a concrete interpretation.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Value(Value),
    /// No guard held. Lists guard evaluation failures by pair index.
    Undetermined { causes: Vec<(usize, EvalError)> },
}

impl Outcome {
    pub fn value(&self) -> Option<Value> {
        match self {
            Outcome::Value(v) => Some(*v),
            Outcome::Undetermined { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("evaluating {output} (pair {pair}): {error}")]
pub struct ValueError {
    pub output: String,
    pub pair: usize,
    pub error: EvalError,
}

/// The parameter point a determinant was built for.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamKey {
    pub params: BTreeMap<String, i64>,
    pub iterations: u32,
}

impl core::fmt::Display for ParamKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let mut first = true;
        for (k, v) in &self.params {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        if self.iterations > 0 {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "L={}", self.iterations)?;
        }
        if first && self.iterations == 0 {
            f.write_str("-")?;
        }
        Ok(())
    }
}

/// One Q-term per output variable, for fixed dimension parameters and iteration bound.
#[derive(Clone, Debug, Default)]
pub struct QDeterminant {
    pub arena: ExprArena,
    outputs: BTreeMap<VarRef, QTerm>,
    params: BTreeMap<String, i64>,
    iterations: u32,
}

impl QDeterminant {
    pub fn new(arena: ExprArena, params: BTreeMap<String, i64>, iterations: u32) -> Self {
        QDeterminant { arena, outputs: BTreeMap::new(), params, iterations }
    }

    pub fn params(&self) -> &BTreeMap<String, i64> {
        &self.params
    }

    pub fn iterations(&self) -> u32 {
        self.iterations
    }

    pub fn key(&self) -> ParamKey {
        ParamKey { params: self.params.clone(), iterations: self.iterations }
    }

    pub fn outputs(&self) -> &BTreeMap<VarRef, QTerm> {
        &self.outputs
    }

    pub fn term(&self, v: &VarRef) -> Option<&QTerm> {
        self.outputs.get(v)
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Adds the term for `output`, checking kinds and shape.
    pub fn insert(&mut self, output: VarRef, term: QTerm) -> Result<(), QError> {
        let name = output.to_string();
        if self.outputs.contains_key(&output) {
            return Err(QError::DuplicateOutput(name));
        }
        for id in term.expressions() {
            if !self.arena.contains(id) {
                return Err(QError::UnknownId(id));
            }
        }
        match &term {
            QTerm::Unconditional(w) => {
                if self.arena.kind(*w) != Kind::Arith {
                    return Err(QError::WrongKind { output: name, what: "value" });
                }
            }
            QTerm::Conditional(pairs) | QTerm::Truncated { pairs, .. } => {
                if pairs.is_empty() {
                    return Err(QError::EmptyTerm(name));
                }
                for p in pairs {
                    if self.arena.kind(p.guard) != Kind::Bool {
                        return Err(QError::WrongKind { output: name, what: "guard" });
                    }
                    if self.arena.kind(p.value) != Kind::Arith {
                        return Err(QError::WrongKind { output: name, what: "value" });
                    }
                }
                if let QTerm::Truncated { bound, .. } = term {
                    if pairs.len() != bound as usize {
                        return Err(QError::TruncationLength {
                            output: name,
                            len: pairs.len(),
                            bound,
                        });
                    }
                }
            }
        }
        self.outputs.insert(output, term);
        Ok(())
    }

    /// Checks that no output variable appears inside any expression.
    pub fn validate(&self) -> Result<(), QError> {
        let ids = self.expression_set();
        for n in self.arena.reachable(&ids) {
            if let crate::expr::Node::Var(v) = self.arena.node(n) {
                if self.outputs.contains_key(v) {
                    return Err(QError::OutputUsedAsInput(v.to_string()));
                }
            }
        }
        Ok(())
    }

    pub fn classify(&self) -> Partition {
        let mut p = Partition::default();
        for (v, t) in &self.outputs {
            match t.kind() {
                TermKind::Unconditional => p.unconditional.push(v.clone()),
                TermKind::Conditional => p.conditional.push(v.clone()),
                TermKind::Truncated => p.infinite.push(v.clone()),
            }
        }
        p
    }

    /// Every guard and value, output by output and pair by pair, duplicates kept.
    pub fn listed_expressions(&self) -> Vec<ExprId> {
        self.outputs.values().flat_map(|t| t.expressions()).collect()
    }

    /// [`listed_expressions`](Self::listed_expressions) with repeats dropped,
    /// keeping first occurrences in order.
    pub fn expression_set(&self) -> Vec<ExprId> {
        let mut seen = BTreeSet::new();
        self.listed_expressions().into_iter().filter(|id| seen.insert(*id)).collect()
    }

    /// All free variables of the stored expressions.
    pub fn input_variables(&self) -> BTreeSet<VarRef> {
        let ids = self.expression_set();
        self.arena
            .reachable(&ids)
            .into_iter()
            .filter_map(|n| match self.arena.node(n) {
                crate::expr::Node::Var(v) => Some(v.clone()),
                _ => None,
            })
            .collect()
    }

    /// Value of every output: guards are tried in pair order and the first true one wins.
    pub fn value(
        &self,
        interp: &Interpretation,
    ) -> Result<BTreeMap<VarRef, Outcome>, ValueError> {
        let mut memo = BTreeMap::new();
        let mut out = BTreeMap::new();
        for (v, t) in &self.outputs {
            let fail = |pair, error| ValueError { output: v.to_string(), pair, error };
            let outcome = match t {
                QTerm::Unconditional(w) => Outcome::Value(
                    self.arena.evaluate_memo(*w, interp, &mut memo).map_err(|e| fail(0, e))?,
                ),
                _ => {
                    let mut causes = Vec::new();
                    let mut found = None;
                    for (j, p) in t.pairs().iter().enumerate() {
                        match self.arena.evaluate_memo(p.guard, interp, &mut memo) {
                            Ok(Value::Bool(true)) => {
                                found = Some((j, p.value));
                                break;
                            }
                            Ok(_) => {}
                            Err(e) => causes.push((j, e)),
                        }
                    }
                    match found {
                        Some((j, w)) => Outcome::Value(
                            self.arena.evaluate_memo(w, interp, &mut memo).map_err(|e| fail(j, e))?,
                        ),
                        None => Outcome::Undetermined { causes },
                    }
                }
            };
            out.insert(v.clone(), outcome);
        }
        Ok(out)
    }

    /// Drops the outputs for which `keep` is false.
    pub fn retain_outputs(&mut self, mut keep: impl FnMut(&VarRef) -> bool) {
        self.outputs.retain(|v, _| keep(v));
    }
}
