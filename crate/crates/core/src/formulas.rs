//! Closed forms for the height and width of the reference algorithms.

use alloc::vec::Vec;

use num_bigint::BigUint;

/// `ceil(log2 x)` for `x >= 1`.
pub fn ceil_log2(x: u64) -> u32 {
    assert!(x >= 1, "log of zero");
    64 - (x - 1).leading_zeros()
}

/// `(D, P)` of the scalar product of two `n`-vectors.
pub fn scalar_characteristics(n: u64) -> (u32, u64) {
    (ceil_log2(n) + 1, n)
}

pub fn gauss_jordan_height(n: u64) -> u64 {
    3 * n
}

/// Largest guard nesting level of the Gauss–Jordan determinant.
pub fn gauss_jordan_guard_height(n: u64) -> u64 {
    3 * n - 1
}

/// `(3/2)(n+1)!`, the level-1 operation count summed over all pivot sequences.
pub fn gauss_jordan_width_lower_bound(n: u64) -> BigUint {
    let f: BigUint = (1..=n + 1).map(BigUint::from).product();
    f * 3u32 / 2u32
}

/// `5 n0 + 3 + ceil(log2 KJ)`.
pub fn grid_jacobi_height(kj: u64, n0: u64) -> u64 {
    5 * n0 + 3 + ceil_log2(kj) as u64
}

/// `5 KJ + sum_i floor(KJ / (8 * 32^i))`.
pub fn grid_jacobi_width(kj: u64) -> u64 {
    let mut p = 5 * kj;
    let mut d = 8u64;
    while d <= kj {
        p += kj / d;
        d = match d.checked_mul(32) {
            Some(x) => x,
            None => break,
        };
    }
    p
}

/// `KJ = a + 8 b_0 + 8*32 b_1 + ... + 8*32^(p-3) b_(p-3)` with the
/// coefficients `c_i = floor(KJ / (8 * 32^i))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WidthDecomposition {
    pub kj: u64,
    /// Stage at which the first convergence test finishes.
    pub p: u32,
    pub a: u64,
    pub b: Vec<u64>,
    pub c: Vec<u64>,
}

impl WidthDecomposition {
    /// Defined for `KJ >= 256`, where `p >= 4`.
    pub fn new(kj: u64) -> Option<WidthDecomposition> {
        if kj < 256 {
            return None;
        }
        let a = kj % 8;
        let mut b = Vec::new();
        let mut rest = kj / 8;
        while rest > 0 {
            b.push(rest % 32);
            rest /= 32;
        }
        let mut c = alloc::vec![0; b.len()];
        let last = b.len() - 1;
        c[last] = b[last];
        for i in (1..=last).rev() {
            c[i - 1] = b[i - 1] + 32 * c[i];
        }
        Some(WidthDecomposition { kj, p: last as u32 + 3, a, b, c })
    }

    /// `5 KJ + c_0 + ... + c_(p-3)`.
    pub fn width(&self) -> u64 {
        5 * self.kj + self.c.iter().sum::<u64>()
    }

    /// `P(KJ + 1) - P(KJ)` by the digit rule.
    pub fn increment(&self) -> u64 {
        if self.a < 7 {
            return 5;
        }
        match self.b.iter().position(|&d| d != 31) {
            Some(l) => l as u64 + 6,
            None => self.p as u64 + 4,
        }
    }
}

/// Width by the piecewise rules: `5 KJ` below 8, `5 KJ + floor(KJ/8)` below
/// 256, the digit decomposition above.
pub fn grid_jacobi_width_piecewise(kj: u64) -> u64 {
    match kj {
        0..=7 => 5 * kj,
        8..=255 => 5 * kj + kj / 8,
        _ => WidthDecomposition::new(kj).expect("KJ >= 256").width(),
    }
}

/// `5 * 2^s + 2^(2+r) (2^(s-r) - 1) / 31` with `r = s mod 5` taken in `-2..=2`.
pub fn grid_jacobi_width_pow2(s: u32) -> BigUint {
    let two = BigUint::from(2u32);
    if s < 3 {
        return BigUint::from(5u32) * two.pow(s);
    }
    let r = ((s as i64 + 2).rem_euclid(5)) - 2;
    let e = (s as i64 - r) as u32;
    let head = BigUint::from(5u32) * two.pow(s);
    let tail = two.pow((2 + r) as u32) * (two.pow(e) - 1u32) / 31u32;
    head + tail
}

/// `P(KJ + 1) - P(KJ)`; the digit rule for `KJ >= 256`, differences below.
pub fn grid_jacobi_width_increment(kj: u64) -> u64 {
    match WidthDecomposition::new(kj) {
        Some(d) => d.increment(),
        None => grid_jacobi_width(kj + 1) - grid_jacobi_width(kj),
    }
}
