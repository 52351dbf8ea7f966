//! Level schedules, height and width.
//!
//! Every operation runs at the step equal to its nesting level, which is the
//! earliest step at which its operands are ready. The height is the number of
//! steps and the width the largest number of operations in one step.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{ExprArena, ExprId, Node, Op, Sharing};
use crate::qterm::{ParamKey, QDeterminant};

/// How rebuilt chains contribute to per-level counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum ChainCount {
    /// The operations actually present in the rebuilt trees.
    #[default]
    Exact,
    /// `floor(m / 2^j)` operations at relative depth `j` for a chain of `m`
    /// equal-level operands. Chains with mixed operand levels stay exact.
    Floor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AnalysisFlags {
    pub sharing: Sharing,
    pub doubling: bool,
    pub chain_count: ChainCount,
}

impl Default for AnalysisFlags {
    fn default() -> Self {
        AnalysisFlags { sharing: Sharing::Dag, doubling: true, chain_count: ChainCount::Exact }
    }
}

/// One scheduled operation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Instance {
    Node(ExprId),
    /// An occurrence inside expression `expr`, reached from its root by taking
    /// operand `path[0]`, then `path[1]`, and so on.
    Occurrence { expr: usize, path: Vec<u8>, node: ExprId },
}

impl Instance {
    pub fn node(&self) -> ExprId {
        match self {
            Instance::Node(n) | Instance::Occurrence { node: n, .. } => *n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub sharing: Sharing,
    /// `levels[r - 1]` holds the operations of step `r`.
    pub levels: Vec<Vec<Instance>>,
}

impl Schedule {
    pub fn height(&self) -> usize {
        self.levels.len()
    }

    pub fn width(&self) -> usize {
        self.levels.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }
}

/// An expression set ready for analysis, rebalanced when doubling is on.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub arena: ExprArena,
    pub roots: Vec<ExprId>,
}

impl Prepared {
    pub fn new(q: &QDeterminant, doubling: bool) -> Prepared {
        let mut arena = q.arena.clone();
        let mut roots = q.expression_set();
        if doubling {
            roots = arena.rebalance_all(&roots);
            let mut seen = BTreeSet::new();
            roots.retain(|r| seen.insert(*r));
        }
        Prepared { arena, roots }
    }

    pub fn height(&self) -> u32 {
        height(&self.arena, &self.roots)
    }

    pub fn level_counts(&self, sharing: Sharing, chain_count: ChainCount) -> Vec<u64> {
        level_counts(&self.arena, &self.roots, sharing, chain_count)
    }

    pub fn width(&self, sharing: Sharing, chain_count: ChainCount) -> u64 {
        self.level_counts(sharing, chain_count).into_iter().max().unwrap_or(0)
    }

    pub fn schedule(&self, sharing: Sharing) -> Schedule {
        make_schedule(&self.arena, &self.roots, sharing)
    }
}

pub fn height(arena: &ExprArena, roots: &[ExprId]) -> u32 {
    roots.iter().map(|&r| arena.level(r)).max().unwrap_or(0)
}

pub fn make_schedule(arena: &ExprArena, roots: &[ExprId], sharing: Sharing) -> Schedule {
    let mut levels: Vec<Vec<Instance>> = vec![Vec::new(); height(arena, roots) as usize];
    match sharing {
        Sharing::Dag => {
            for n in arena.reachable(roots) {
                if !arena.node(n).is_leaf() {
                    levels[arena.level(n) as usize - 1].push(Instance::Node(n));
                }
            }
        }
        Sharing::Tree => {
            for (k, &r) in roots.iter().enumerate() {
                let mut stack = vec![(r, Vec::new())];
                while let Some((n, path)) = stack.pop() {
                    let node = arena.node(n);
                    if node.is_leaf() {
                        continue;
                    }
                    for (i, o) in node.operands().enumerate() {
                        let mut p = path.clone();
                        p.push(i as u8);
                        stack.push((o, p));
                    }
                    levels[arena.level(n) as usize - 1].push(Instance::Occurrence {
                        expr: k,
                        path,
                        node: n,
                    });
                }
            }
            for l in &mut levels {
                l.sort();
            }
        }
    }
    Schedule { sharing, levels }
}

/// Operations per level; entry `r - 1` is level `r`.
pub fn level_counts(
    arena: &ExprArena,
    roots: &[ExprId],
    sharing: Sharing,
    chain_count: ChainCount,
) -> Vec<u64> {
    let mut counts = arena.count_ops_per_level(roots, sharing);
    if chain_count == ChainCount::Floor {
        let mult: Vec<(ExprId, u64)> = match sharing {
            Sharing::Dag => arena.reachable(roots).into_iter().map(|n| (n, 1)).collect(),
            Sharing::Tree => arena
                .occurrence_counts(roots)
                .into_iter()
                .enumerate()
                .filter(|(_, p)| *p > 0)
                .map(|(i, p)| (ExprId(i as u32), p as u64))
                .collect(),
        };
        for (n, m) in mult {
            let Some(info) = arena.chain(n) else { continue };
            if !info.homogeneous {
                continue;
            }
            let base = info.base_level as usize;
            for (j, c) in info.exact_counts(arena).into_iter().enumerate() {
                counts[base + j] = counts[base + j].saturating_sub(m * c);
            }
            for (j, c) in info.floor_counts().into_iter().enumerate() {
                counts[base + j] += m * c;
            }
        }
    }
    counts
}

pub fn width(arena: &ExprArena, roots: &[ExprId], sharing: Sharing, chain_count: ChainCount) -> u64 {
    level_counts(arena, roots, sharing, chain_count).into_iter().max().unwrap_or(0)
}

/// Height and width of one determinant under fixed counting flags.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Characteristics {
    pub d: u32,
    pub p: u64,
    pub key: ParamKey,
    pub flags: AnalysisFlags,
}

pub fn analyze(q: &QDeterminant, flags: AnalysisFlags) -> Characteristics {
    let prep = Prepared::new(q, flags.doubling);
    Characteristics {
        d: prep.height(),
        p: prep.width(flags.sharing, flags.chain_count),
        key: q.key(),
        flags,
    }
}

/// Largest nesting level among the guards of all conditional terms.
pub fn guard_height(q: &QDeterminant, doubling: bool) -> u32 {
    let mut arena = q.arena.clone();
    let guards: Vec<ExprId> = q.outputs().values().flat_map(|t| t.pairs().iter().map(|p| p.guard)).collect();
    let guards = if doubling { arena.rebalance_all(&guards) } else { guards };
    height(&arena, &guards)
}

/// Number of conjunction operands of a guard, counting through nested `and`s.
pub fn conjunct_count(arena: &ExprArena, guard: ExprId) -> usize {
    match arena.node(guard) {
        Node::Binary(Op::And, _, _) => arena.flatten_chain(guard).map(|(_, v)| v.len()).unwrap_or(1),
        _ => 1,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Realizability {
    Realizable,
    RealizableByTruncation,
    /// Infinite terms with no truncation: the per-level operation sets need not be finite.
    Unknown,
}

/// What realizability depends on, for algorithms not held as a determinant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct StructuralDescriptor {
    pub infinite_terms: bool,
    pub truncated: bool,
}

pub fn realizability_of(d: StructuralDescriptor) -> Realizability {
    match (d.infinite_terms, d.truncated) {
        (false, _) => Realizability::Realizable,
        (true, true) => Realizability::RealizableByTruncation,
        (true, false) => Realizability::Unknown,
    }
}

pub fn realizability(q: &QDeterminant) -> Realizability {
    let infinite = !q.classify().infinite.is_empty();
    realizability_of(StructuralDescriptor { infinite_terms: infinite, truncated: infinite })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::VarRef;
    use crate::qterm::QTerm;
    use alloc::collections::BTreeMap;

    fn sum(n: i64, doubling: bool) -> Prepared {
        let mut ar = ExprArena::new();
        let mut acc = None;
        for i in 1..=n {
            let a = ar.named("a", &[i]);
            let b = ar.named("b", &[i]);
            let p = ar.binary(Op::Mul, a, b).unwrap();
            acc = Some(match acc {
                None => p,
                Some(s) => ar.binary(Op::Add, s, p).unwrap(),
            });
        }
        let mut q = QDeterminant::new(ar, BTreeMap::new(), 0);
        q.insert(VarRef::scalar("S"), QTerm::Unconditional(acc.unwrap())).unwrap();
        Prepared::new(&q, doubling)
    }

    #[test]
    fn single_op() {
        let mut ar = ExprArena::new();
        let x = ar.named("b", &[1]);
        let y = ar.named("b", &[2]);
        let s = ar.binary(Op::Add, x, y).unwrap();
        let sch = make_schedule(&ar, &[s], Sharing::Dag);
        assert_eq!(sch.sizes(), [1]);
        assert_eq!(make_schedule(&ar, &[s], Sharing::Tree).sizes(), [1]);
    }

    #[test]
    fn scalar_product_shapes() {
        let p = sum(8, true);
        assert_eq!(p.schedule(Sharing::Dag).sizes(), [8, 4, 2, 1]);
        assert_eq!((p.height(), p.width(Sharing::Dag, ChainCount::Exact)), (4, 8));
        let p = sum(8, false);
        assert_eq!(p.height(), 8);
        let p = sum(5, true);
        assert_eq!(p.level_counts(Sharing::Dag, ChainCount::Exact), [5, 2, 1, 1]);
        assert_eq!(p.level_counts(Sharing::Dag, ChainCount::Floor), [5, 2, 1, 0]);
    }

    #[test]
    fn tree_schedule_matches_counts() {
        let mut ar = ExprArena::new();
        let x = ar.named("x", &[]);
        let s = ar.binary(Op::Add, x, x).unwrap();
        let p = ar.binary(Op::Mul, s, s).unwrap();
        let q = ar.binary(Op::Sub, p, s).unwrap();
        let sch = make_schedule(&ar, &[q, p], Sharing::Tree);
        assert_eq!(sch.sizes(), [5, 2, 1]);
        assert_eq!(level_counts(&ar, &[q, p], Sharing::Tree, ChainCount::Exact), [5, 2, 1]);
        assert_eq!(make_schedule(&ar, &[q, p], Sharing::Dag).sizes(), [1, 1, 1]);
    }

    #[test]
    fn realizability_cases() {
        assert_eq!(realizability_of(StructuralDescriptor::default()), Realizability::Realizable);
        assert_eq!(
            realizability_of(StructuralDescriptor { infinite_terms: true, truncated: true }),
            Realizability::RealizableByTruncation
        );
        assert_eq!(
            realizability_of(StructuralDescriptor { infinite_terms: true, truncated: false }),
            Realizability::Unknown
        );
    }
}
