//! Signed Pauli strings in the canonical form `i^{a·b} (−1)^s X^b Z^a`.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::linalg::{Mat, C64, I, ONE, ZERO};

#[inline]
pub(crate) fn dot(a: u64, b: u64) -> bool {
    (a & b).count_ones() & 1 == 1
}

/// `i^{a·b}(−1)^s X^b Z^a`, with `a·b` taken over F2 so the operator is Hermitian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString {
    pub n: usize,
    pub s: bool,
    /// Z part.
    pub a: u64,
    /// X part.
    pub b: u64,
}

/// The partition of the signed Pauli set used by the twirling results.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliSubset {
    P0,
    P1,
    PZ,
    Even,
    Odd,
}

impl PauliSubset {
    pub const ALL: [PauliSubset; 5] = [
        PauliSubset::P0,
        PauliSubset::P1,
        PauliSubset::PZ,
        PauliSubset::Even,
        PauliSubset::Odd,
    ];

    /// Closed-form size of the subset on `n` qubits.
    pub fn size(self, n: usize) -> u64 {
        let d = 1u64 << n;
        match self {
            PauliSubset::P0 | PauliSubset::P1 => 1,
            PauliSubset::PZ => 2 * (d - 1),
            // (a, b) pairs with a·b = 1 number d(d−1)/2, as do those with b ≠ 0, a·b = 0.
            PauliSubset::Even | PauliSubset::Odd => d * (d - 1),
        }
    }
}

impl PauliString {
    pub fn new(n: usize, s: bool, a: u64, b: u64) -> Self {
        debug_assert!(n == 64 || (a >> n == 0 && b >> n == 0));
        PauliString { n, s, a, b }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, false, 0, 0)
    }

    pub fn z(n: usize, qubit: usize) -> Self {
        Self::new(n, false, 1 << qubit, 0)
    }

    pub fn x(n: usize, qubit: usize) -> Self {
        Self::new(n, false, 0, 1 << qubit)
    }

    /// Every element of the signed set, `2^{2n+1}` in total.
    pub fn all(n: usize) -> impl Iterator<Item = PauliString> {
        let d = 1u64 << n;
        (0..2 * d * d).map(move |k| {
            PauliString::new(n, k & 1 == 1, (k >> 1) % d, (k >> 1) / d)
        })
    }

    /// The `4^n` unsigned strings (`s = 0`).
    pub fn unsigned(n: usize) -> impl Iterator<Item = PauliString> {
        let d = 1u64 << n;
        (0..d * d).map(move |k| PauliString::new(n, false, k % d, k / d))
    }

    pub fn is_identity_up_to_sign(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    pub fn negated(self) -> Self {
        PauliString { s: !self.s, ..self }
    }

    pub fn subset(&self) -> PauliSubset {
        match (self.a, self.b) {
            (0, 0) if !self.s => PauliSubset::P0,
            (0, 0) => PauliSubset::P1,
            (_, 0) => PauliSubset::PZ,
            _ if dot(self.a, self.b) => PauliSubset::Odd,
            _ => PauliSubset::Even,
        }
    }

    /// Phase `i^{a·b}(−1)^s`.
    pub fn phase(&self) -> C64 {
        let base = if dot(self.a, self.b) { I } else { ONE };
        if self.s {
            -base
        } else {
            base
        }
    }

    /// `P|x⟩ = coefficient · |x ⊕ b⟩`.
    #[inline]
    pub fn apply_basis(&self, x: u64) -> (u64, C64) {
        let c = if dot(self.a, x) { -self.phase() } else { self.phase() };
        (x ^ self.b, c)
    }

    pub fn matrix(&self) -> Mat {
        let d = 1usize << self.n;
        let mut m = Mat::zeros(d, d);
        for x in 0..d as u64 {
            let (y, c) = self.apply_basis(x);
            m[(y as usize, x as usize)] = c;
        }
        m
    }

    /// `P v`.
    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; v.len()];
        for (x, &amp) in v.iter().enumerate() {
            let (y, c) = self.apply_basis(x as u64);
            out[y as usize] = c * amp;
        }
        out
    }

    /// `P ρ P†` in `O(d²)`: the phase `i^{a·b}(−1)^s` cancels and
    /// `(PρP)[x⊕b, y⊕b] = (−1)^{a·(x⊕y)} ρ[x, y]`.
    pub fn conjugate_mat(&self, rho: &Mat) -> Mat {
        let d = rho.rows();
        let mut out = Mat::zeros(d, d);
        for x in 0..d {
            for y in 0..d {
                let v = rho[(x, y)];
                let xb = x ^ self.b as usize;
                let yb = y ^ self.b as usize;
                out[(xb, yb)] = if dot(self.a, (x ^ y) as u64) { -v } else { v };
            }
        }
        out
    }

    /// `P Q = i^e R` with `e ∈ {0, 1}` and `R` canonical.
    pub fn multiply(&self, other: &PauliString) -> (u8, PauliString) {
        assert_eq!(self.n, other.n);
        let a = self.a ^ other.a;
        let b = self.b ^ other.b;
        let k1 = dot(self.a, self.b) as i32;
        let k2 = dot(other.a, other.b) as i32;
        let k3 = dot(a, b) as i32;
        let sign = self.s ^ other.s ^ dot(self.a, other.b);
        let diff = (k1 + k2 - k3).rem_euclid(4);
        let extra = (diff & 1) as u8;
        let flip = diff >> 1 == 1;
        (extra, PauliString::new(self.n, sign ^ flip, a, b))
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        dot(self.a, other.b) == dot(other.a, self.b)
    }

    /// `⟨v|P|v⟩`.
    pub fn expectation(&self, v: &[C64]) -> C64 {
        let pv = self.apply_vec(v);
        v.iter().zip(&pv).map(|(a, b)| a.conj() * b).sum()
    }

    /// Recognize a matrix as `±` a canonical Pauli (up to `tol` in max norm).
    pub fn from_matrix(m: &Mat, tol: f64) -> Option<PauliString> {
        let d = m.rows();
        if !m.is_square() || !d.is_power_of_two() {
            return None;
        }
        let n = d.trailing_zeros() as usize;
        // Column 0 determines b and the phase.
        let col0 = m.column(0);
        let (b, &c0) = col0
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))?;
        let b = b as u64;
        let mut a = 0u64;
        for q in 0..n {
            let x = 1u64 << q;
            let v = m[((x ^ b) as usize, x as usize)];
            if (v + c0).norm() < (v - c0).norm() {
                a |= x;
            }
        }
        for s in [false, true] {
            let cand = PauliString::new(n, s, a, b);
            if cand.matrix().max_abs_diff(m) <= tol {
                return Some(cand);
            }
        }
        None
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", if self.s { '-' } else { '+' })?;
        for q in 0..self.n {
            let c = match (self.a >> q & 1, self.b >> q & 1) {
                (0, 0) => 'I',
                (1, 0) => 'Z',
                (0, 1) => 'X',
                _ => 'Y',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
    use std::collections::HashMap;

    #[test]
    fn canonical_examples() {
        assert_eq!(PauliString::identity(2).matrix(), Mat::identity(4));
        let y = PauliString::new(1, false, 1, 1).matrix();
        let expected = Mat::from_vec(2, 2, vec![ZERO, -I, I, ZERO]);
        assert!(y.max_abs_diff(&expected) < 1e-15);
        assert_eq!(PauliString::new(1, false, 1, 1).to_string(), "+Y");
    }

    #[test]
    fn all_are_hermitian_unitary_involutions() {
        for n in 1..=3 {
            for p in PauliString::all(n) {
                let m = p.matrix();
                assert!(m.hermiticity_error() < 1e-15);
                assert!(m.matmul(&m).max_abs_diff(&Mat::identity(1 << n)) < 1e-15);
            }
        }
    }

    #[test]
    fn subset_sizes_by_enumeration() {
        for n in 1..=4 {
            let mut counts: HashMap<PauliSubset, u64> = HashMap::new();
            for p in PauliString::all(n) {
                *counts.entry(p.subset()).or_default() += 1;
            }
            let total: u64 = counts.values().sum();
            assert_eq!(total, 2 << (2 * n));
            for s in PauliSubset::ALL {
                assert_eq!(counts[&s], s.size(n), "n={n} {s:?}");
            }
        }
        assert_eq!(PauliString::new(1, true, 1, 0).subset(), PauliSubset::PZ);
        assert_eq!(PauliString::identity(3).subset(), PauliSubset::P0);
    }

    #[test]
    fn canonical_form_is_unique() {
        let n = 2;
        let all: Vec<_> = PauliString::all(n).collect();
        for (i, p) in all.iter().enumerate() {
            for q in &all[i + 1..] {
                assert!(p.matrix().max_abs_diff(&q.matrix()) > 0.5);
            }
        }
    }

    #[test]
    fn from_matrix_round_trip() {
        for p in PauliString::all(3) {
            assert_eq!(PauliString::from_matrix(&p.matrix(), 1e-12), Some(p));
        }
        let h = Mat::from_fn(2, 2, |r, c| {
            C64::new(if r == 1 && c == 1 { -1.0 } else { 1.0 } / 2f64.sqrt(), 0.0)
        });
        assert_eq!(PauliString::from_matrix(&h, 1e-9), None);
    }

    proptest! {
        #[test]
        fn product_matches_dense(n in 1usize..=3, k1 in any::<u64>(), k2 in any::<u64>()) {
            let d = 1u64 << n;
            let mk = |k: u64| PauliString::new(n, k & 1 == 1, (k >> 1) % d, (k >> 8) % d);
            let (p, q) = (mk(k1), mk(k2));
            let (e, r) = p.multiply(&q);
            let lhs = p.matrix().matmul(&q.matrix());
            let rhs = r.matrix().scale(if e == 1 { I } else { ONE });
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-14);
            prop_assert_eq!(e == 0, p.commutes_with(&q));
        }

        #[test]
        fn fast_conjugation_matches_dense(n in 1usize..=3, k in any::<u64>(), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let d = 1u64 << n;
            let p = PauliString::new(n, k & 1 == 1, (k >> 1) % d, (k >> 8) % d);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rho = Mat::from_fn(d as usize, d as usize, |_, _| C64::new(rng.random(), rng.random()));
            let dense = rho.conjugate_by(&p.matrix());
            prop_assert!(p.conjugate_mat(&rho).max_abs_diff(&dense) < 1e-14);
        }
    }
}
