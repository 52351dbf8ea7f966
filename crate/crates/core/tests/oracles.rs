//! Sequential run, determinant value and level-synchronous run agree on random
//! inputs, and match solvers written independently of the library.

mod common;

use common::*;
use qdet_core::evaluator::run_q_effective;
use qdet_core::generators::*;
use qdet_core::{BuildConfig, Value, VarRef};
use rand::Rng;

const DRAWS: usize = 100;

#[test]
fn scalar_product() {
    let mut r = rng(11);
    for n in [1i64, 2, 3, 5, 8, 16] {
        for doubling in [false, true] {
            let fc = gen_scalar_product(n, doubling);
            let cfg = BuildConfig::new(&[("n", n)]);
            let q = build(&fc, &cfg);
            for _ in 0..DRAWS {
                let (a, b) = (vector(&mut r, n as usize), vector(&mut r, n as usize));
                let mut inp = Inputs::default();
                for i in 0..n as usize {
                    inp.set("a", &[i as i64 + 1], a[i]);
                    inp.set("b", &[i as i64 + 1], b[i]);
                }
                let out = three_way(&fc, &q, &cfg, &inp.0).unwrap();
                let want: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                assert!(close(num(&out, "S", &[]).unwrap(), want, 1e-12));
            }
        }
    }
}

#[test]
fn matmul() {
    let mut r = rng(12);
    for (n, k, m) in [(1, 1, 1), (2, 3, 2), (4, 4, 4), (3, 1, 4)] {
        for doubling in [false, true] {
            let q = gen_matmul(n, k, m, doubling);
            for _ in 0..DRAWS {
                let mut inp = Inputs::default();
                let a: Vec<Vec<f64>> = (0..n).map(|_| vector(&mut r, k as usize)).collect();
                let b: Vec<Vec<f64>> = (0..k).map(|_| vector(&mut r, m as usize)).collect();
                for i in 0..n {
                    for s in 0..k {
                        inp.set("A", &[i + 1, s + 1], a[i as usize][s as usize]);
                    }
                }
                for s in 0..k {
                    for j in 0..m {
                        inp.set("B", &[s + 1, j + 1], b[s as usize][j as usize]);
                    }
                }
                let val = q.value(&inp.0).unwrap();
                assert!(same_outcomes(&val, &run_q_effective(&q, &inp.0, true).outputs));
                for i in 0..n {
                    for j in 0..m {
                        let want: f64 = (0..k).map(|s| a[i as usize][s as usize] * b[s as usize][j as usize]).sum();
                        assert!(close(num(&val, "C", &[i + 1, j + 1]).unwrap(), want, 1e-12));
                    }
                }
            }
        }
    }
}

#[test]
fn gauss_jordan() {
    let mut r = rng(13);
    for n in [2i64, 3] {
        let fc = gen_gauss_jordan(n);
        let cfg = BuildConfig::new(&[("n", n)]);
        let q = build(&fc, &cfg);
        let mut branches = std::collections::BTreeSet::new();
        for _ in 0..DRAWS {
            let a = sparse_int_matrix(&mut r, n as usize);
            let b: Vec<f64> = (0..n).map(|_| r.gen_range(-9i32..=9) as f64).collect();
            let inp = linear_system_inputs(&a, &b);
            let out = three_way(&fc, &q, &cfg, &inp.0).unwrap();
            let x = solve(&a, &b);
            for (i, want) in x.iter().enumerate() {
                assert!(close(num(&out, "X", &[i as i64 + 1]).unwrap(), *want, 1e-9));
            }
            // pivot sequences exclude each other
            let term = q.term(&VarRef::new("X", &[1])).unwrap();
            let holding: Vec<usize> = term
                .pairs()
                .iter()
                .enumerate()
                .filter(|(_, p)| q.arena.evaluate(p.guard, &inp.0) == Ok(Value::Bool(true)))
                .map(|(k, _)| k)
                .collect();
            assert_eq!(holding.len(), 1);
            branches.insert(holding[0]);
        }
        assert!(branches.len() > 1, "draws exercised only one pivot sequence");
    }
}

#[test]
fn gauss_jordan_fallback_pivot() {
    let fc = gen_gauss_jordan(2);
    let cfg = BuildConfig::new(&[("n", 2)]);
    let q = build(&fc, &cfg);
    let inp = linear_system_inputs(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[5.0, 7.0]);
    let out = three_way(&fc, &q, &cfg, &inp.0).unwrap();
    assert_eq!(num(&out, "X", &[1]), Some(7.0));
    assert_eq!(num(&out, "X", &[2]), Some(5.0));
    let inp = linear_system_inputs(&[vec![2.0, 0.0], vec![0.0, 3.0]], &[4.0, 9.0]);
    let out = three_way(&fc, &q, &cfg, &inp.0).unwrap();
    assert_eq!((num(&out, "X", &[1]), num(&out, "X", &[2])), (Some(2.0), Some(3.0)));
}

#[test]
fn iterative_solvers() {
    let mut r = rng(14);
    for (name, chart) in [("jacobi", gen_jacobi_linear as fn(i64, u32) -> _), ("gauss-seidel", gen_gauss_seidel)] {
        for n in [2i64, 3, 4] {
            for l in [1u32, 3, 60] {
                let fc = chart(n, l);
                let cfg = BuildConfig::new(&[("n", n)]).with_iterations(l);
                let q = build(&fc, &cfg);
                let mut converged = 0;
                for _ in 0..DRAWS {
                    let a = dominant_matrix(&mut r, n as usize);
                    let b = vector(&mut r, n as usize);
                    let mut inp = linear_system_inputs(&a, &b);
                    for i in 0..n {
                        inp.set("X0", &[i + 1], r.gen_range(-1.0..1.0));
                    }
                    inp.set("e", &[], 1e-10);
                    let out = three_way(&fc, &q, &cfg, &inp.0).unwrap_or_else(|e| panic!("{name}: {e}"));
                    if let Some(x1) = num(&out, "X", &[1]) {
                        converged += 1;
                        let x = solve(&a, &b);
                        assert!(close(x1, x[0], 1e-6), "{name} n={n}: {x1} vs {}", x[0]);
                    }
                }
                if l == 60 {
                    assert!(converged > DRAWS / 2, "{name} n={n}: only {converged} runs converged");
                }
            }
        }
    }
}

#[test]
fn grid_jacobi() {
    let mut r = rng(15);
    for (k, j) in [(1, 1), (1, 3), (2, 2), (3, 2), (3, 3)] {
        for l in [1u32, 2, 6] {
            let q = gen_grid_jacobi(k, j, l);
            for _ in 0..DRAWS {
                let g = Grid::random(&mut r, k as usize, j as usize);
                let inp = g.inputs();
                let val = q.value(&inp.0).unwrap();
                assert!(same_outcomes(&val, &run_q_effective(&q, &inp.0, true).outputs));
                match g.run(l) {
                    Some(u) => {
                        for p in 0..k {
                            for s in 0..j {
                                let got = num(&val, "u", &[p + 1, s + 1]).unwrap();
                                assert!(close(got, u[(p * j + s) as usize], 1e-9));
                            }
                        }
                    }
                    None => assert!(val.values().all(|o| o.value().is_none())),
                }
            }
        }
    }
}
