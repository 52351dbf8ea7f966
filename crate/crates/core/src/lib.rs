//! Q-determinant representation of numerical algorithms.
//!
//! An algorithm is described by one Q-term per output variable: an
//! unconditional expression, or a list of (guard, value) pairs of which exactly
//! one guard holds. From that description this crate derives the height
//! (parallel step count) and width (peak processor count) of the algorithm's
//! most parallel realization.

#![no_std]

extern crate alloc;

pub mod analyzer;
pub mod builder;
pub mod compare;
pub mod evaluator;
pub mod expr;
pub mod flowchart;
pub mod formulas;
pub mod generators;
pub mod qterm;
pub mod stmt;

pub use analyzer::{analyze, AnalysisFlags, ChainCount, Characteristics};
pub use builder::{build_qdet, next_branch, BranchTrace, BuildConfig, BuildError, GuardMode};
pub use expr::{ExprArena, ExprId, Interpretation, Node, Op, Sharing, Value, VarRef};
pub use flowchart::{BlockType, ChartBuilder, EdgeType, Flowchart};
pub use qterm::{GuardedPair, Outcome, ParamKey, QDeterminant, QTerm};
