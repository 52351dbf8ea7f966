//! Input generators and independent reference solvers shared by the test targets.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use qdet_core::evaluator::{run_flowchart, run_q_effective};
use qdet_core::{build_qdet, BuildConfig, Flowchart, Interpretation, Outcome, QDeterminant, Value, VarRef};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const REL_TOL: f64 = 1e-9;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn same_outcome(x: &Outcome, y: &Outcome) -> bool {
    match (x, y) {
        (Outcome::Value(Value::Num(a)), Outcome::Value(Value::Num(b))) => close(*a, *b, REL_TOL),
        (Outcome::Value(Value::Bool(a)), Outcome::Value(Value::Bool(b))) => a == b,
        (Outcome::Undetermined { .. }, Outcome::Undetermined { .. }) => true,
        _ => false,
    }
}

pub fn same_outcomes(a: &BTreeMap<VarRef, Outcome>, b: &BTreeMap<VarRef, Outcome>) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|((va, x), (vb, y))| va == vb && same_outcome(x, y))
}

pub fn num(out: &BTreeMap<VarRef, Outcome>, name: &str, idx: &[i64]) -> Option<f64> {
    match out.get(&VarRef::new(name, idx))?.value()? {
        Value::Num(x) => Some(x),
        Value::Bool(_) => None,
    }
}

#[derive(Default)]
pub struct Inputs(pub Interpretation);

impl Inputs {
    pub fn set(&mut self, name: &str, idx: &[i64], x: f64) {
        self.0.insert(VarRef::new(name, idx), Value::Num(x));
    }
}

pub fn vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect()
}

/// Row-major `n x n` with small integer entries, some of them zero, and |det| >= 1.
pub fn sparse_int_matrix(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    loop {
        let a: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| if rng.gen_bool(0.35) { 0.0 } else { rng.gen_range(-4i32..=4) as f64 })
                    .collect()
            })
            .collect();
        if det(&a).abs() > 0.5 {
            return a;
        }
    }
}

/// Strictly diagonally dominant.
pub fn dominant_matrix(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    for (i, row) in a.iter_mut().enumerate() {
        let off: f64 = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| x.abs()).sum();
        row[i] = (off + rng.gen_range(1.0..3.0)) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    }
    a
}

/// Gaussian elimination with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &y)| r.iter().copied().chain([y]).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

pub fn det(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut d = 1.0;
    for c in 0..n {
        let Some(p) = (c..n).filter(|&i| m[i][c] != 0.0).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
        else {
            return 0.0;
        };
        if p != c {
            m.swap(c, p);
            d = -d;
        }
        d *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    d
}

pub fn linear_system_inputs(a: &[Vec<f64>], b: &[f64]) -> Inputs {
    let mut i = Inputs::default();
    for (r, row) in a.iter().enumerate() {
        for (c, &x) in row.iter().enumerate() {
            i.set("A", &[r as i64 + 1, c as i64 + 1], x);
        }
        i.set("B", &[r as i64 + 1], b[r]);
    }
    i
}

/// Sweeps of the five-point grid iteration with zero boundary values; returns
/// the first iterate that moved by less than `eps` everywhere.
pub struct Grid {
    pub k: usize,
    pub j: usize,
    /// Coefficients a, b, c, d, e, f per point, row-major.
    pub coef: [Vec<f64>; 6],
    pub u0: Vec<f64>,
    pub eps: f64,
}

impl Grid {
    pub fn random(rng: &mut ChaCha8Rng, k: usize, j: usize) -> Grid {
        let n = k * j;
        let mut small = || (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>();
        let (a, b, c, d) = (small(), small(), small(), small());
        let e = (0..n).map(|_| rng.gen_range(5.0..8.0)).collect();
        let f = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let u0 = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Grid { k, j, coef: [a, b, c, d, e, f], u0, eps: rng.gen_range(1e-3..1e-1) }
    }

    pub fn inputs(&self) -> Inputs {
        let mut i = Inputs::default();
        for p in 0..self.k {
            for q in 0..self.j {
                let idx = [p as i64 + 1, q as i64 + 1];
                let at = p * self.j + q;
                for (name, v) in ["a", "b", "c", "d", "e", "f"].iter().zip(&self.coef) {
                    i.set(name, &idx, v[at]);
                }
                i.set("u0", &idx, self.u0[at]);
            }
        }
        i.set("eps", &[], self.eps);
        i
    }

    /// `Some(u)` for the first sweep within `l` that passes the test.
    pub fn run(&self, l: u32) -> Option<Vec<f64>> {
        let mut u = self.u0.clone();
        let get = |u: &Vec<f64>, p: i64, q: i64| {
            if p < 0 || q < 0 || p >= self.k as i64 || q >= self.j as i64 {
                0.0
            } else {
                u[p as usize * self.j + q as usize]
            }
        };
        for _ in 0..l {
            let mut next = vec![0.0; u.len()];
            for p in 0..self.k as i64 {
                for q in 0..self.j as i64 {
                    let at = p as usize * self.j + q as usize;
                    let [a, b, c, d, e, f] = &self.coef;
                    let s = f[at]
                        + a[at] * get(&u, p - 1, q)
                        + b[at] * get(&u, p + 1, q)
                        + c[at] * get(&u, p, q - 1)
                        + d[at] * get(&u, p, q + 1);
                    next[at] = s / e[at];
                }
            }
            let done = next.iter().zip(&u).all(|(x, y)| (x - y).abs() < self.eps);
            u = next;
            if done {
                return Some(u);
            }
        }
        None
    }
}

/// Builds `fc` and checks that the sequential run, the determinant's value and
/// the level-synchronous run agree; returns the determinant's outcomes.
pub fn three_way(
    fc: &Flowchart,
    q: &QDeterminant,
    cfg: &BuildConfig,
    inputs: &Interpretation,
) -> Result<BTreeMap<VarRef, Outcome>, String> {
    let seq = run_flowchart(fc, cfg, inputs).map_err(|e| e.to_string())?;
    let val = q.value(inputs).map_err(|e| e.to_string())?;
    let eff = run_q_effective(q, inputs, true).outputs;
    if !same_outcomes(&seq, &val) {
        return Err(format!("sequential run {seq:?} differs from determinant value {val:?}"));
    }
    if !same_outcomes(&val, &eff) {
        return Err(format!("determinant value {val:?} differs from level-synchronous run {eff:?}"));
    }
    Ok(val)
}

pub fn build(fc: &Flowchart, cfg: &BuildConfig) -> QDeterminant {
    build_qdet(fc, cfg).expect("generator charts build")
}
