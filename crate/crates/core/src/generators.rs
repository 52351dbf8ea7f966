//! Built-in reference algorithms.
//!
//! Algorithms with data-dependent control flow come as flowcharts so that the
//! builder does the branch enumeration; the others are assembled directly as
//! Q-determinants.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{ExprArena, ExprId, Op, VarRef};
use crate::flowchart::{BlockType, ChartBuilder, EdgeType, Flowchart};
use crate::qterm::{GuardedPair, QDeterminant, QTerm};

/// Names the generators accept.
pub const NAMES: [&str; 6] = ["scalar", "matmul", "gauss-jordan", "jacobi", "gauss-seidel", "grid-jacobi"];

type Port = (i64, EdgeType);

/// Small helper for wiring charts block by block.
struct Chart {
    c: ChartBuilder,
    end: i64,
}

impl Chart {
    /// Start, the input declaration and a reserved End block.
    fn new(inputs: &str) -> (Chart, Port) {
        let mut c = ChartBuilder::new();
        let s = c.block(BlockType::Start, "Start");
        let end = c.block(BlockType::End, "End");
        let i = c.block(BlockType::Input, inputs);
        c.edge(s, i, EdgeType::Normal);
        (Chart { c, end }, (i, EdgeType::Normal))
    }

    fn procs(&mut self, mut at: Port, stmts: &[&str]) -> Port {
        for s in stmts {
            let b = self.c.block(BlockType::Process, s);
            self.c.edge(at.0, b, at.1);
            at = (b, EdgeType::Normal);
        }
        at
    }

    fn decision(&mut self, at: Port, cond: &str) -> (Port, Port) {
        let d = self.c.block(BlockType::Decision, cond);
        self.c.edge(at.0, d, at.1);
        ((d, EdgeType::True), (d, EdgeType::False))
    }

    fn join(&mut self, at: Port, to: i64) {
        self.c.edge(at.0, to, at.1);
    }

    /// `for v = from..=to { body }`; the body's open ports all continue the loop.
    fn for_loop(
        &mut self,
        at: Port,
        v: &str,
        from: &str,
        to: &str,
        body: impl FnOnce(&mut Chart, Port) -> Vec<Port>,
    ) -> Port {
        let init = self.procs(at, &[&format!("{v} = {from}")]);
        let (t, f) = self.decision(init, &format!("{v} <= {to}"));
        let ends = body(self, t);
        let inc = self.c.block(BlockType::Process, &format!("{v} = {v} + 1"));
        for e in ends {
            self.join(e, inc);
        }
        self.join((inc, EdgeType::Normal), t.0);
        f
    }

    fn finish(mut self, at: Port, outputs: &str) -> Flowchart {
        let o = self.c.block(BlockType::Output, outputs);
        self.join(at, o);
        self.join((o, EdgeType::Normal), self.end);
        self.c.build().expect("generated charts are well formed")
    }
}

/// Scalar product of `a(n)` and `b(n)` into `S`.
///
/// Without doubling the products are summed left to right. With doubling the
/// chart adds pairs at strides 1, 2, 4, ... in place.
pub fn gen_scalar_product(n: i64, doubling: bool) -> Flowchart {
    assert!(n >= 1, "n must be positive");
    let (mut ch, at) = Chart::new("[n] a(n), b(n)");
    let at = if doubling {
        let at = ch.for_loop(at, "i", "1", "n", |ch, at| vec![ch.procs(at, &["p(i) = a(i) * b(i)"])]);
        let at = ch.procs(at, &["st = 1"]);
        let (more, done) = ch.decision(at, "st < n");
        let at = ch.procs(more, &["t = 2 * st", "i = 1"]);
        let at = ch.procs(at, &["j = i + st"]);
        let head = at.0;
        let (inside, outside) = ch.decision(at, "j <= n");
        let at = ch.procs(inside, &["p(i) = p(i) + p(j)", "i = i + t"]);
        ch.join(at, head);
        let at = ch.procs(outside, &["st = t"]);
        ch.join(at, more.0);
        ch.procs(done, &["S = p(1)"])
    } else {
        ch.for_loop(at, "i", "1", "n", |ch, at| {
            let at = ch.procs(at, &["p = a(i) * b(i)"]);
            let (first, rest) = ch.decision(at, "i = 1");
            vec![ch.procs(first, &["S = p"]), ch.procs(rest, &["S = S + p"])]
        })
    };
    ch.finish(at, "S")
}

/// `C = A B` for `A(n,k)`, `B(k,m)`, one unconditional term per entry.
///
/// With `doubling` each sum is built as a balanced tree, otherwise as a left
/// fold; analysis with doubling on gives both the same shape.
pub fn gen_matmul(n: i64, k: i64, m: i64, doubling: bool) -> QDeterminant {
    assert!(n >= 1 && k >= 1 && m >= 1, "dimensions must be positive");
    let mut ar = ExprArena::new();
    let mut terms = Vec::new();
    for i in 1..=n {
        for j in 1..=m {
            let prods: Vec<ExprId> = (1..=k)
                .map(|s| {
                    let a = ar.named("A", &[i, s]);
                    let b = ar.named("B", &[s, j]);
                    ar.binary(Op::Mul, a, b).expect("numeric operands")
                })
                .collect();
            let sum = if doubling {
                ar.build_doubling(Op::Add, &prods)
            } else {
                fold(&mut ar, Op::Add, &prods)
            };
            terms.push((VarRef::new("C", &[i, j]), sum));
        }
    }
    let params = [("n", n), ("k", k), ("m", m)].iter().map(|(s, v)| (s.to_string(), *v)).collect();
    let mut q = QDeterminant::new(ar, params, 0);
    for (v, w) in terms {
        q.insert(v, QTerm::Unconditional(w)).expect("distinct outputs");
    }
    q
}

fn fold(ar: &mut ExprArena, op: Op, xs: &[ExprId]) -> ExprId {
    let mut acc = xs[0];
    for &x in &xs[1..] {
        acc = ar.binary(op, acc, x).expect("operands of matching kind");
    }
    acc
}

/// Gauss–Jordan elimination for `A x = B`, `A(n,n)`, choosing in each row the
/// first nonzero entry among the columns not yet used as pivots.
pub fn gen_gauss_jordan(n: i64) -> Flowchart {
    gauss_jordan_chart(n, false)
}

/// With `test_used`, the pivot search also visits used columns and requires
/// their entries to be zero, cancelling the pass otherwise.
pub(crate) fn gauss_jordan_chart(n: i64, test_used: bool) -> Flowchart {
    assert!((2..=5).contains(&n), "n must be in 2..=5");
    let (mut ch, at) = Chart::new("[n] A(n,n), B(n)");
    let end = ch.end;
    let at = ch.procs(at, &["n1 = n + 1"]);
    let at = ch.for_loop(at, "i", "1", "n", |ch, at| {
        let at = ch.for_loop(at, "j", "1", "n", |ch, at| vec![ch.procs(at, &["M(i,j) = A(i,j)"])]);
        vec![ch.procs(at, &["M(i,n1) = B(i)", "u(i) = 0"])]
    });
    let at = ch.for_loop(at, "k", "1", "n", |ch, at| {
        let at = ch.procs(at, &["j = 1"]);
        let (col, none) = ch.decision(at, "j <= n");
        let head = col.0;
        let at = ch.procs(none, &["empout = 0"]);
        ch.join(at, end);
        let next = ch.c.block(BlockType::Process, "j = j + 1");
        ch.join((next, EdgeType::Normal), head);
        let (used, free) = ch.decision(col, "u(j) = 1");
        if test_used {
            let (zero, nonzero) = ch.decision(used, "M(k,j) = 0");
            ch.join(zero, next);
            let at = ch.procs(nonzero, &["empout = 0"]);
            ch.join(at, end);
        } else {
            ch.join(used, next);
        }
        let (pivot, skip) = ch.decision(free, "M(k,j) != 0");
        ch.join(skip, next);
        let at = ch.procs(pivot, &["c(k) = j", "u(j) = 1", "p = M(k,j)"]);
        let at = ch.for_loop(at, "q", "1", "n1", |ch, at| vec![ch.procs(at, &["M(k,q) = M(k,q) / p"])]);
        let at = ch.for_loop(at, "i", "1", "n", |ch, at| {
            let (same, other) = ch.decision(at, "i = k");
            let at = ch.procs(other, &["f = M(i,j)"]);
            let at = ch.for_loop(at, "q", "1", "n1", |ch, at| {
                vec![ch.procs(at, &["t = M(k,q) * f", "M(i,q) = M(i,q) - t"])]
            });
            vec![same, at]
        });
        vec![at]
    });
    let at = ch.for_loop(at, "i", "1", "n", |ch, at| vec![ch.procs(at, &["X(c(i)) = M(i,n1)"])]);
    ch.finish(at, "[n] X(n)")
}

/// Jacobi iteration for `A x = B` from `X0`, stopping once every component
/// moved by less than `e`.
pub fn gen_jacobi_linear(n: i64, l: u32) -> Flowchart {
    iterative_chart(n, l, false)
}

/// Gauss–Seidel iteration: like Jacobi, but each update uses the components
/// already refreshed in the current sweep.
pub fn gen_gauss_seidel(n: i64, l: u32) -> Flowchart {
    iterative_chart(n, l, true)
}

fn iterative_chart(n: i64, l: u32, in_place: bool) -> Flowchart {
    assert!(n >= 2 && l >= 1, "need n >= 2 and at least one iteration");
    let (mut ch, at) = Chart::new("[n] A(n,n), B(n), X0(n), e, iterations");
    let end = ch.end;
    let at = ch.for_loop(at, "i", "1", "n", |ch, at| vec![ch.procs(at, &["Y(i) = X0(i)"])]);
    let at = ch.procs(at, &["it = 0"]);
    let at = ch.procs(at, &["it = it + 1"]);
    let sweep = at.0;
    let at = ch.for_loop(at, "i", "1", "n", |ch, at| {
        let at = ch.procs(at, &["h = 0"]);
        let at = ch.for_loop(at, "j", "1", "n", |ch, at| {
            let (same, other) = ch.decision(at, "j = i");
            let at = ch.procs(other, &["t = A(i,j) * Y(j)"]);
            let (first, rest) = ch.decision(at, "h = 0");
            vec![same, ch.procs(first, &["s = t", "h = 1"]), ch.procs(rest, &["s = s + t"])]
        });
        let at = ch.procs(at, &["r = B(i) - s"]);
        let at = if in_place {
            ch.procs(at, &["z = r / A(i,i)", "d = z - Y(i)", "Y(i) = z"])
        } else {
            ch.procs(at, &["Z(i) = r / A(i,i)", "d = Z(i) - Y(i)"])
        };
        let at = ch.procs(at, &["a = abs(d)", "g = a < e"]);
        let (first, rest) = ch.decision(at, "i = 1");
        vec![ch.procs(first, &["ok = g"]), ch.procs(rest, &["ok = ok and g"])]
    });
    let at = if in_place {
        at
    } else {
        ch.for_loop(at, "i", "1", "n", |ch, at| vec![ch.procs(at, &["Y(i) = Z(i)"])])
    };
    let at = ch.for_loop(at, "i", "1", "n", |ch, at| vec![ch.procs(at, &["X(i) = Y(i)"])]);
    let (stop, more) = ch.decision(at, "ok");
    let (again, out) = ch.decision(more, "it < iterations");
    ch.join(again, sweep);
    let at = ch.procs(out, &["empout = 0"]);
    ch.join(at, end);
    ch.finish(stop, "[n] X(n)")
}

/// Values used for neighbours outside the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GridBoundary {
    /// The constant 0.
    #[default]
    Zero,
    /// Indices wrap around, so every point has four computed neighbours.
    Periodic,
}

/// Jacobi sweeps for the five-point grid equations on a `K x J` grid with zero
/// boundary values, `L` sweeps.
pub fn gen_grid_jacobi(k: i64, j: i64, l: u32) -> QDeterminant {
    gen_grid_jacobi_with(k, j, l, GridBoundary::Zero)
}

pub fn gen_grid_jacobi_with(k: i64, j: i64, l: u32, boundary: GridBoundary) -> QDeterminant {
    assert!(k >= 1 && j >= 1 && l >= 1, "K, J and L must be positive");
    let mut ar = ExprArena::new();
    let eps = ar.named("eps", &[]);
    let zero = ar.num(0.0).expect("finite");
    let mut prev: BTreeMap<(i64, i64), ExprId> = BTreeMap::new();
    for p in 1..=k {
        for q in 1..=j {
            prev.insert((p, q), ar.named("u0", &[p, q]));
        }
    }
    let mut pairs: BTreeMap<(i64, i64), Vec<GuardedPair>> = BTreeMap::new();
    for _ in 1..=l {
        let mut next = BTreeMap::new();
        for p in 1..=k {
            for q in 1..=j {
                let nb = |dp: i64, dq: i64| match boundary {
                    GridBoundary::Zero => prev.get(&(p + dp, q + dq)).copied().unwrap_or(zero),
                    GridBoundary::Periodic => prev[&((p + dp - 1).rem_euclid(k) + 1, (q + dq - 1).rem_euclid(j) + 1)],
                };
                let mut acc = ar.named("f", &[p, q]);
                for (c, u) in [("a", nb(-1, 0)), ("b", nb(1, 0)), ("c", nb(0, -1)), ("d", nb(0, 1))] {
                    let coef = ar.named(c, &[p, q]);
                    let t = ar.binary(Op::Mul, coef, u).expect("numeric");
                    acc = ar.binary(Op::Add, acc, t).expect("numeric");
                }
                let e = ar.named("e", &[p, q]);
                next.insert((p, q), ar.binary(Op::Div, acc, e).expect("numeric"));
            }
        }
        let mut conds = Vec::new();
        for (pos, &u) in &next {
            let d = ar.binary(Op::Sub, u, prev[pos]).expect("numeric");
            let a = ar.unary(Op::Abs, d).expect("numeric");
            conds.push(ar.binary(Op::Lt, a, eps).expect("numeric"));
        }
        let v = fold(&mut ar, Op::And, &conds);
        for (pos, &u) in &next {
            pairs.entry(*pos).or_default().push(GuardedPair { guard: v, value: u });
        }
        prev = next;
    }
    let params: BTreeMap<String, i64> = [("K".to_string(), k), ("J".to_string(), j)].into();
    let mut q = QDeterminant::new(ar, params, l);
    for ((p, r), ps) in pairs {
        q.insert(VarRef::new("u", &[p, r]), QTerm::Truncated { pairs: ps, bound: l })
            .expect("well-formed truncated term");
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::{analyze, guard_height, AnalysisFlags};
    use crate::builder::{build_qdet, BuildConfig};
    use crate::qterm::TermKind;

    fn flags(doubling: bool) -> AnalysisFlags {
        AnalysisFlags { doubling, ..Default::default() }
    }

    fn dp(q: &QDeterminant, doubling: bool) -> (u32, u64) {
        let c = analyze(q, flags(doubling));
        (c.d, c.p)
    }

    #[test]
    fn scalar_product_charts() {
        for doubling in [false, true] {
            let fc = gen_scalar_product(8, doubling);
            assert!(fc.validate().is_empty());
            let q = build_qdet(&fc, &BuildConfig::new(&[("n", 8)])).unwrap();
            assert_eq!(q.term(&VarRef::scalar("S")).unwrap().kind(), TermKind::Unconditional);
            assert_eq!(dp(&q, true), (4, 8));
            assert_eq!(dp(&q, false), if doubling { (4, 8) } else { (8, 8) });
        }
        let q = build_qdet(&gen_scalar_product(2, false), &BuildConfig::new(&[("n", 2)])).unwrap();
        assert_eq!(dp(&q, true), (2, 2));
        let q = build_qdet(&gen_scalar_product(1, true), &BuildConfig::new(&[("n", 1)])).unwrap();
        assert_eq!(dp(&q, true), (1, 1));
    }

    #[test]
    fn matmul_terms() {
        let q = gen_matmul(2, 2, 2, true);
        assert_eq!(q.len(), 4);
        assert_eq!(dp(&q, false), (2, 8));
        assert_eq!(dp(&gen_matmul(2, 8, 2, false), false), (8, 32));
        assert_eq!(dp(&gen_matmul(2, 8, 2, true), false), (4, 32));
    }

    #[test]
    fn gauss_jordan_shape() {
        for (n, len) in [(2, 2), (3, 6)] {
            let fc = gen_gauss_jordan(n);
            assert!(fc.validate().is_empty());
            let q = build_qdet(&fc, &BuildConfig::new(&[("n", n)])).unwrap();
            assert_eq!(q.len(), n as usize);
            assert!(q.outputs().values().all(|t| t.kind() == TermKind::Conditional && t.len() == len));
            assert_eq!(dp(&q, true).0, 3 * n as u32);
            assert_eq!(guard_height(&q, true), 3 * n as u32 - 1);
        }
    }

    #[test]
    fn used_column_tests_deepen_guards() {
        let q = build_qdet(&gauss_jordan_chart(2, true), &BuildConfig::new(&[("n", 2)])).unwrap();
        assert!(q.outputs().values().all(|t| t.len() == 2));
        assert_eq!(guard_height(&q, true), 6);
    }

    #[test]
    fn iterative_charts() {
        for chart in [gen_jacobi_linear, gen_gauss_seidel] {
            for l in [1, 3] {
                let fc = chart(2, l);
                assert!(fc.validate().is_empty());
                let q = build_qdet(&fc, &BuildConfig::new(&[("n", 2)]).with_iterations(l)).unwrap();
                assert_eq!(q.len(), 2);
                for t in q.outputs().values() {
                    assert_eq!(t.kind(), TermKind::Truncated);
                    assert_eq!(t.len(), l as usize);
                    let g = t.pairs()[0].guard;
                    assert_eq!(crate::analyzer::conjunct_count(&q.arena, g), 2);
                }
            }
        }
    }

    #[test]
    fn grid_jacobi_height() {
        let q = gen_grid_jacobi_with(2, 2, 2, GridBoundary::Periodic);
        assert_eq!(q.len(), 4);
        assert_eq!(q.iterations(), 2);
        assert_eq!(dp(&q, true).0, 15);
        // products against boundary zeros are ready early, so sweeps take four steps
        let q = gen_grid_jacobi(2, 2, 2);
        assert_eq!(dp(&q, true).0, 14);
        let c = crate::analyzer::Prepared::new(&q, true).level_counts(crate::expr::Sharing::Dag, Default::default());
        assert_eq!(c[0], 16);
    }
}
