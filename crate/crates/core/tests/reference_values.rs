use std::time::{Duration, Instant};

use qdet_core::analyzer::guard_height;
use qdet_core::compare::{compare, Verdict};
use qdet_core::formulas::{gauss_jordan_width_lower_bound, scalar_characteristics};
use qdet_core::generators::*;
use qdet_core::*;

fn flags(doubling: bool, sharing: Sharing) -> AnalysisFlags {
    AnalysisFlags { sharing, doubling, chain_count: ChainCount::Exact }
}

#[test]
fn expression_examples() {
    let mut ar = ExprArena::new();
    let b: Vec<ExprId> = (1..=6).map(|i| ar.named(&format!("b{i}"), &[])).collect();
    let s = ar.binary(Op::Add, b[1], b[2]).unwrap();
    let m = ar.binary(Op::Mul, b[0], s).unwrap();
    let w1 = ar.binary(Op::Div, m, b[3]).unwrap();

    let s12 = ar.binary(Op::Add, b[0], b[1]).unwrap();
    let p34 = ar.binary(Op::Mul, b[2], b[3]).unwrap();
    let le = ar.binary(Op::Le, s12, p34).unwrap();
    let le56 = ar.binary(Op::Le, b[4], b[5]).unwrap();
    let not = ar.unary(Op::Not, le56).unwrap();
    let w2 = ar.binary(Op::Or, le, not).unwrap();

    let ge = ar.binary(Op::Ge, b[0], b[2]).unwrap();
    let d24 = ar.binary(Op::Sub, b[1], b[3]).unwrap();
    let zero = ar.num(0.0).unwrap();
    let ne = ar.binary(Op::Ne, d24, zero).unwrap();
    let and = ar.binary(Op::And, ge, ne).unwrap();
    let eq = ar.binary(Op::Eq, b[4], zero).unwrap();
    let w3 = ar.binary(Op::And, and, eq).unwrap();

    assert_eq!([w1, w2, w3].map(|w| ar.level(w)), [3, 3, 4]);
    let interp: Interpretation =
        (1..=6).map(|i| (VarRef::scalar(format!("b{i}")), Value::Num(i as f64))).collect();
    assert_eq!(ar.evaluate(w1, &interp), Ok(Value::Num(1.25)));
    assert_eq!(ar.evaluate(w2, &interp), Ok(Value::Bool(true)));
    assert_eq!(ar.evaluate(w3, &interp), Ok(Value::Bool(false)));
}

#[test]
fn scalar_product_height_and_width() {
    for n in [1i64, 2, 4, 7, 16, 100, 1000] {
        let q = build_qdet(&gen_scalar_product(n, false), &BuildConfig::new(&[("n", n)])).unwrap();
        let c = analyze(&q, flags(true, Sharing::Dag));
        assert_eq!((c.d, c.p), scalar_characteristics(n as u64), "n={n}");
    }
    for n in 2..=64i64 {
        let q = build_qdet(&gen_scalar_product(n, false), &BuildConfig::new(&[("n", n)])).unwrap();
        assert_eq!(analyze(&q, flags(false, Sharing::Dag)).d, n as u32, "n={n}");
    }
}

#[test]
fn gauss_jordan_small() {
    for (n, fact) in [(2i64, 2usize), (3, 6)] {
        let q = build_qdet(&gen_gauss_jordan(n), &BuildConfig::new(&[("n", n)])).unwrap();
        assert!(q.outputs().values().all(|t| t.len() == fact));
        let dag = analyze(&q, flags(true, Sharing::Dag));
        let tree = analyze(&q, flags(true, Sharing::Tree));
        assert_eq!(dag.d as i64, 3 * n);
        assert_eq!(tree.d, dag.d);
        let bound: u64 = gauss_jordan_width_lower_bound(n as u64).try_into().unwrap();
        assert!(tree.p >= bound, "n={n}: {} < {bound}", tree.p);
        assert_eq!(guard_height(&q, true) as i64, 3 * n - 1);
    }
}

#[test]
fn gauss_jordan_four_smoke() {
    let t = Instant::now();
    let q = build_qdet(&gen_gauss_jordan(4), &BuildConfig::new(&[("n", 4)])).unwrap();
    assert!(q.outputs().values().all(|t| t.len() == 24));
    assert_eq!(analyze(&q, flags(true, Sharing::Dag)).d, 12);
    assert!(t.elapsed() < Duration::from_secs(10), "{:?}", t.elapsed());
}

#[test]
fn matmul_doubling_is_lower_not_wider() {
    let f = flags(false, Sharing::Dag);
    let (a, b): (Vec<_>, Vec<_>) = [2i64, 4, 8]
        .into_iter()
        .map(|n| (analyze(&gen_matmul(n, n, n, true), f), analyze(&gen_matmul(n, n, n, false), f)))
        .unzip();
    let r = compare(&a, &b).unwrap();
    assert_eq!(r.shared.len(), 3);
    assert_eq!((r.delta_p, r.verdict_d), (0, Verdict::Less));
}

#[test]
fn branch_transitions() {
    let t = |e: &[(u32, u8)]| BranchTrace::new(e);
    assert_eq!(next_branch(&t(&[(1, 1), (2, 1)])), Some(t(&[(1, 1), (2, 0)])));
    assert_eq!(next_branch(&t(&[(1, 1), (2, 0)])), Some(t(&[(1, 0)])));
    assert_eq!(next_branch(&t(&[(1, 0)])), None);
}
