//! The partial Clifford twirl set 𝕋 of operators `C = Z^v Q_B M_A† X^u`.
//!
//! `M_A|x⟩ = |Ax⟩` and `Q_B|x⟩ = (−1)^{xᵀBx}|x⟩`, so `C` is monomial:
//! `C|x⟩ = (−1)^{zᵀBz ⊕ v·z}|z⟩` with `z = A⁻¹(x ⊕ u)`. With these definitions
//! `C|Ψ(g)⟩ = |Ψ(g_C)⟩`, and the twirled state is `E_C C† φ(g_C) C`.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolfn::DataTable;
use crate::device::NoisyDevice;
use crate::error::{Error, Result};
use crate::qcore::pauli::dot;
use crate::qcore::{check_register, DensityMatrix, Mat, PauliString, StateVector, C64};
use crate::rng::stream;

/// Square matrix over F2; bit `j` of `rows[i]` is `M_ij`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gf2Matrix {
    n: usize,
    rows: Vec<u64>,
}

impl Gf2Matrix {
    pub fn zero(n: usize) -> Self {
        Gf2Matrix { n, rows: vec![0; n] }
    }

    pub fn identity(n: usize) -> Self {
        Gf2Matrix {
            n,
            rows: (0..n).map(|i| 1u64 << i).collect(),
        }
    }

    pub fn from_rows(n: usize, rows: Vec<u64>) -> Self {
        assert_eq!(rows.len(), n);
        Gf2Matrix { n, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i] >> j & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        if v {
            self.rows[i] |= 1 << j;
        } else {
            self.rows[i] &= !(1 << j);
        }
    }

    /// `M x`.
    pub fn mul_vec(&self, x: u64) -> u64 {
        self.rows
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &r)| acc | (dot(r, x) as u64) << i)
    }

    pub fn matmul(&self, other: &Gf2Matrix) -> Gf2Matrix {
        let t = other.transpose();
        Gf2Matrix {
            n: self.n,
            rows: self.rows.iter().map(|&r| t.mul_vec(r)).collect(),
        }
    }

    pub fn transpose(&self) -> Gf2Matrix {
        let mut t = Gf2Matrix::zero(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn add(&self, other: &Gf2Matrix) -> Gf2Matrix {
        Gf2Matrix {
            n: self.n,
            rows: self.rows.iter().zip(&other.rows).map(|(a, b)| a ^ b).collect(),
        }
    }

    /// `xᵀ M x`.
    pub fn quadratic_form(&self, x: u64) -> bool {
        dot(self.mul_vec(x), x)
    }

    pub fn rank(&self) -> usize {
        let mut basis: Vec<u64> = Vec::new();
        for &r in &self.rows {
            let v = reduce(&basis, r);
            if v != 0 {
                insert_basis(&mut basis, v);
            }
        }
        basis.len()
    }

    pub fn is_invertible(&self) -> bool {
        self.rank() == self.n
    }

    pub fn is_strictly_upper(&self) -> bool {
        (0..self.n).all(|i| self.rows[i] & ((1u64 << (i + 1)) - 1) == 0)
    }

    /// Swap-free Gauss–Jordan reduction to the identity, returning the row
    /// operations `(control, target)` meaning `row_target ^= row_control`, in
    /// the order they were applied; `None` if singular.
    pub fn gauss_jordan_ops(&self) -> Option<Vec<(usize, usize)>> {
        let mut m = self.rows.clone();
        let mut ops = Vec::new();
        for j in 0..self.n {
            if m[j] >> j & 1 == 0 {
                let r = (j + 1..self.n).find(|&r| m[r] >> j & 1 == 1)?;
                m[j] ^= m[r];
                ops.push((r, j));
            }
            for i in 0..self.n {
                if i != j && m[i] >> j & 1 == 1 {
                    m[i] ^= m[j];
                    ops.push((j, i));
                }
            }
        }
        Some(ops)
    }

    pub fn inverse(&self) -> Option<Gf2Matrix> {
        let ops = self.gauss_jordan_ops()?;
        let mut inv = Gf2Matrix::identity(self.n);
        for (c, t) in ops {
            inv.rows[t] ^= inv.rows[c];
        }
        Some(inv)
    }

    /// Every invertible `n×n` matrix, in lexicographic row order.
    pub fn general_linear_group(n: usize) -> Vec<Gf2Matrix> {
        assert!(n <= 4, "enumeration of GL(n, F2) is capped at n = 4");
        let mut out = Vec::new();
        let total = 1u64 << (n * n);
        for code in 0..total {
            let rows = (0..n).map(|i| code >> (i * n) & ((1 << n) - 1)).collect();
            let m = Gf2Matrix::from_rows(n, rows);
            if m.is_invertible() {
                out.push(m);
            }
        }
        out
    }

    /// Uniform element of GL(n, F2): row `k` is uniform outside the span of
    /// rows `0..k`.
    pub fn random_invertible<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Gf2Matrix {
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut basis: Vec<u64> = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n);
        while rows.len() < n {
            let r = rng.random::<u64>() & mask;
            let red = reduce(&basis, r);
            if red != 0 {
                insert_basis(&mut basis, red);
                rows.push(r);
            }
        }
        Gf2Matrix { n, rows }
    }

    pub fn random_strictly_upper<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Gf2Matrix {
        let rows = (0..n)
            .map(|i| {
                let above = if i + 1 >= 64 { 0 } else { !((1u64 << (i + 1)) - 1) };
                let mask = above & if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
                rng.random::<u64>() & mask
            })
            .collect();
        Gf2Matrix { n, rows }
    }
}

/// Reduce `v` against an echelon basis kept sorted by leading bit.
fn reduce(basis: &[u64], mut v: u64) -> u64 {
    for &b in basis {
        let lead = 63 - b.leading_zeros();
        if v >> lead & 1 == 1 {
            v ^= b;
        }
    }
    v
}

fn insert_basis(basis: &mut Vec<u64>, v: u64) {
    // `v` is already reduced, so its leading bit is new to the basis.
    basis.push(v);
    basis.sort_by_key(|b| b.leading_zeros());
}

/// A single gate of the twirl decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gate {
    X(usize),
    Z(usize),
    Cz(usize, usize),
    Cnot { control: usize, target: usize },
}

impl Gate {
    /// Action on a basis state: `(new index, sign)`.
    pub fn apply_basis(&self, x: u64) -> (u64, f64) {
        match *self {
            Gate::X(q) => (x ^ 1 << q, 1.0),
            Gate::Z(q) => (x, if x >> q & 1 == 1 { -1.0 } else { 1.0 }),
            Gate::Cz(p, q) => (x, if x >> p & x >> q & 1 == 1 { -1.0 } else { 1.0 }),
            Gate::Cnot { control, target } => (x ^ ((x >> control & 1) << target), 1.0),
        }
    }

    pub fn matrix(&self, n: usize) -> Mat {
        let d = 1usize << n;
        let mut m = Mat::zeros(d, d);
        for x in 0..d as u64 {
            let (y, s) = self.apply_basis(x);
            m[(y as usize, x as usize)] = C64::new(s, 0.0);
        }
        m
    }
}

/// `(A, B, u, v)` defining `C = Z^v Q_B M_A† X^u`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TwirlElement {
    pub n: usize,
    pub a: Gf2Matrix,
    pub b: Gf2Matrix,
    pub u: u64,
    pub v: u64,
    a_inv: Gf2Matrix,
}

impl TwirlElement {
    pub fn new(a: Gf2Matrix, b: Gf2Matrix, u: u64, v: u64) -> Result<Self> {
        let n = a.n();
        if b.n() != n {
            return Err(Error::Length {
                expected: n,
                got: b.n(),
            });
        }
        if !b.is_strictly_upper() {
            return Err(Error::Precondition("B must be strictly upper triangular".into()));
        }
        if n < 64 && (u >> n != 0 || v >> n != 0) {
            return Err(Error::Precondition("u or v exceeds n bits".into()));
        }
        let a_inv = a
            .inverse()
            .ok_or_else(|| Error::Precondition("A is singular".into()))?;
        Ok(TwirlElement { n, a, b, u, v, a_inv })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(Gf2Matrix::identity(n), Gf2Matrix::zero(n), 0, 0).expect("identity is valid")
    }

    pub fn a_inverse(&self) -> &Gf2Matrix {
        &self.a_inv
    }

    /// `C|x⟩ = sign · |z⟩`.
    #[inline]
    pub fn apply_basis(&self, x: u64) -> (u64, f64) {
        let z = self.a_inv.mul_vec(x ^ self.u);
        let odd = self.b.quadratic_form(z) ^ dot(self.v, z);
        (z, if odd { -1.0 } else { 1.0 })
    }

    /// Dense realization of `C`.
    pub fn clifford_matrix(&self) -> Result<Mat> {
        check_register(self.n)?;
        let d = 1usize << self.n;
        let mut m = Mat::zeros(d, d);
        for x in 0..d as u64 {
            let (z, s) = self.apply_basis(x);
            m[(z as usize, x as usize)] = C64::new(s, 0.0);
        }
        Ok(m)
    }

    /// Gates of `C` in application (time) order.
    pub fn clifford_gate_list(&self) -> Vec<Gate> {
        let mut gates: Vec<Gate> = (0..self.n)
            .filter(|&q| self.u >> q & 1 == 1)
            .map(Gate::X)
            .collect();
        // Row operations R_k … R_1 reduce A⁻¹ to I, so A⁻¹ = R_1 ⋯ R_k and the
        // CNOTs are applied in reverse order of discovery.
        let ops = self.a_inv.gauss_jordan_ops().expect("A is invertible");
        gates.extend(
            ops.iter()
                .rev()
                .map(|&(control, target)| Gate::Cnot { control, target }),
        );
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.b.get(i, j) {
                    gates.push(Gate::Cz(i, j));
                }
            }
        }
        gates.extend((0..self.n).filter(|&q| self.v >> q & 1 == 1).map(Gate::Z));
        gates
    }

    /// `C P C†` in closed form:
    /// `b' = A⁻¹b`, `a' = Aᵀa ⊕ (B ⊕ Bᵀ)b'`, `s' = s ⊕ u·a ⊕ b'ᵀBb' ⊕ v·b'`.
    pub fn conjugate_pauli(&self, p: &PauliString) -> Result<PauliString> {
        if p.n != self.n {
            return Err(Error::Length {
                expected: self.n,
                got: p.n,
            });
        }
        let b1 = self.a_inv.mul_vec(p.b);
        let sym = self.b.add(&self.b.transpose());
        let a1 = self.a.transpose().mul_vec(p.a) ^ sym.mul_vec(b1);
        let s1 = p.s ^ dot(self.u, p.a) ^ self.b.quadratic_form(b1) ^ dot(self.v, b1);
        Ok(PauliString::new(self.n, s1, a1, b1))
    }

    /// `C† ρ C` using the monomial structure: entry `(x, y)` is
    /// `s(x) s(y) ρ[π(x), π(y)]`.
    pub fn conjugate_dagger(&self, rho: &Mat) -> Mat {
        let d = rho.rows();
        let map: Vec<(usize, f64)> = (0..d as u64)
            .map(|x| {
                let (z, s) = self.apply_basis(x);
                (z as usize, s)
            })
            .collect();
        Mat::from_fn(d, d, |x, y| {
            let (zx, sx) = map[x];
            let (zy, sy) = map[y];
            rho[(zx, zy)] * (sx * sy)
        })
    }

    /// `C ρ C†`.
    pub fn conjugate(&self, rho: &Mat) -> Mat {
        let d = rho.rows();
        let mut out = Mat::zeros(d, d);
        let map: Vec<(usize, f64)> = (0..d as u64)
            .map(|x| {
                let (z, s) = self.apply_basis(x);
                (z as usize, s)
            })
            .collect();
        for x in 0..d {
            for y in 0..d {
                let (zx, sx) = map[x];
                let (zy, sy) = map[y];
                out[(zx, zy)] = rho[(x, y)] * (sx * sy);
            }
        }
        out
    }

    /// Every element of 𝕋 (`|GL(n)|·2^{n(n−1)/2}·4^n` of them).
    pub fn enumerate(n: usize) -> Result<Vec<TwirlElement>> {
        if n > 2 {
            return Err(Error::SizeCap(format!(
                "exact enumeration of the twirl set is limited to n <= 2, got {n}"
            )));
        }
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let mut out = Vec::new();
        for a in Gf2Matrix::general_linear_group(n) {
            for bcode in 0..1u64 << pairs.len() {
                let mut b = Gf2Matrix::zero(n);
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    b.set(i, j, bcode >> k & 1 == 1);
                }
                for u in 0..1u64 << n {
                    for v in 0..1u64 << n {
                        out.push(TwirlElement::new(a.clone(), b.clone(), u, v)?);
                    }
                }
            }
        }
        Ok(out)
    }
}

pub fn sample_twirl<R: Rng + ?Sized>(n: usize, rng: &mut R) -> TwirlElement {
    assert!(n >= 1);
    let a = Gf2Matrix::random_invertible(n, rng);
    let b = Gf2Matrix::random_strictly_upper(n, rng);
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let u = rng.random::<u64>() & mask;
    let v = rng.random::<u64>() & mask;
    TwirlElement::new(a, b, u, v).expect("sampled element is valid")
}

/// `g_C(x) = g(Ax ⊕ u) ⊕ x·v ⊕ xᵀBx`.
pub fn twirl_dataset(g: &DataTable, c: &TwirlElement) -> Result<DataTable> {
    if g.n() != c.n {
        return Err(Error::Length {
            expected: c.n,
            got: g.n(),
        });
    }
    Ok(DataTable::from_fn(g.n(), |x| {
        g.get(c.a.mul_vec(x) ^ c.u) ^ dot(x, c.v) ^ c.b.quadratic_form(x)
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum TwirlMode {
    None,
    ExactEnumeration,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct TwirledState {
    pub state: DensityMatrix,
    pub mode: TwirlMode,
    /// Number of terms averaged.
    pub terms: usize,
    /// Mean over terms of `⟨Ψ(g)|C†φ(g_C)C|Ψ(g)⟩`.
    pub mean_term_fidelity: f64,
    /// Smallest per-term fidelity.
    pub min_term_fidelity: f64,
}

const MC_CHUNK: usize = 256;

/// `E_C C† φ(g_C) C` for a map `φ` from datasets to (noisy) resource states.
pub fn twirled_state_with<F>(g: &DataTable, mode: TwirlMode, phi: F) -> Result<TwirledState>
where
    F: Fn(&DataTable) -> Result<DensityMatrix> + Sync,
{
    let n = g.n();
    check_register(n)?;
    let elements: Vec<TwirlElement> = match mode {
        TwirlMode::None => vec![TwirlElement::identity(n)],
        TwirlMode::ExactEnumeration => TwirlElement::enumerate(n)?,
        TwirlMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::Precondition("Monte Carlo twirl needs samples > 0".into()));
            }
            (0..samples as u64)
                .into_par_iter()
                .map(|i| sample_twirl(n, &mut stream(seed, i)))
                .collect()
        }
    };
    let datasets: Vec<DataTable> = elements
        .par_iter()
        .map(|c| twirl_dataset(g, c))
        .collect::<Result<_>>()?;

    // φ is evaluated once per distinct dataset, in a deterministic order.
    let distinct: BTreeMap<Vec<u64>, DataTable> = datasets
        .iter()
        .map(|h| (h.words().to_vec(), h.clone()))
        .collect();
    let evaluated: Vec<(Vec<u64>, Mat)> = distinct
        .into_par_iter()
        .map(|(k, h)| phi(&h).map(|r| (k, r.into_matrix())))
        .collect::<Result<_>>()?;
    let cache: HashMap<Vec<u64>, Mat> = evaluated.into_iter().collect();

    let psi = crate::qcore::resource_state(g)?;
    let d = 1usize << n;
    let partials: Vec<(Mat, Vec<f64>)> = elements
        .par_chunks(MC_CHUNK)
        .zip(datasets.par_chunks(MC_CHUNK))
        .map(|(cs, hs)| {
            let mut acc = Mat::zeros(d, d);
            let mut fids = Vec::with_capacity(cs.len());
            for (c, h) in cs.iter().zip(hs) {
                let term = c.conjugate_dagger(&cache[h.words()]);
                fids.push(expectation(&term, &psi));
                acc.add_scaled(&term, C64::new(1.0, 0.0));
            }
            (acc, fids)
        })
        .collect();
    let fids: Vec<f64> = partials.iter().flat_map(|p| p.1.iter().copied()).collect();
    let sum = tree_sum(partials.into_iter().map(|p| p.0).collect());
    let terms = elements.len();
    let state = DensityMatrix::new(sum.scale_real(1.0 / terms as f64).hermitian_part())?;
    Ok(TwirledState {
        state,
        mode,
        terms,
        mean_term_fidelity: fids.iter().sum::<f64>() / terms as f64,
        min_term_fidelity: fids.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Twirl of a device's noisy resource states: `E_C C† φ(g_C) C` with
/// `φ = device.noisy_resource_state`.
pub fn twirled_state(g: &DataTable, device: &NoisyDevice, mode: TwirlMode) -> Result<TwirledState> {
    twirled_state_with(g, mode, |h| device.noisy_resource_state(h))
}

fn expectation(m: &Mat, psi: &StateVector) -> f64 {
    let mv = m.apply(psi.amplitudes());
    crate::qcore::linalg::inner(psi.amplitudes(), &mv).re
}

/// Pairwise sum in a fixed tree shape, independent of thread scheduling.
fn tree_sum(mut parts: Vec<Mat>) -> Mat {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(&a + &b),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().expect("at least one partial sum")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::resource_state;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gl_sizes() {
        assert_eq!(Gf2Matrix::general_linear_group(1).len(), 1);
        assert_eq!(Gf2Matrix::general_linear_group(2).len(), 6);
        assert_eq!(Gf2Matrix::general_linear_group(3).len(), 168);
        assert_eq!(TwirlElement::enumerate(2).unwrap().len(), 192);
        assert!(TwirlElement::enumerate(3).is_err());
    }

    #[test]
    fn inverse_and_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=10 {
            for _ in 0..20 {
                let a = Gf2Matrix::random_invertible(n, &mut rng);
                assert!(a.is_invertible());
                let inv = a.inverse().unwrap();
                assert_eq!(a.matmul(&inv), Gf2Matrix::identity(n));
                assert!(Gf2Matrix::random_strictly_upper(n, &mut rng).is_strictly_upper());
            }
        }
        let singular = Gf2Matrix::from_rows(2, vec![0b11, 0b11]);
        assert!(singular.inverse().is_none());
    }

    #[test]
    fn n1_twirl_has_four_outcomes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..200 {
            let c = sample_twirl(1, &mut rng);
            assert_eq!(c.a, Gf2Matrix::identity(1));
            seen.insert((c.u, c.v));
        }
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn gl2_sampling_is_uniform() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let group = Gf2Matrix::general_linear_group(2);
        let mut counts = vec![0f64; group.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 100_000;
        for _ in 0..trials {
            let a = Gf2Matrix::random_invertible(2, &mut rng);
            counts[group.iter().position(|g| *g == a).unwrap()] += 1.0;
        }
        let e = trials as f64 / 6.0;
        let chi2: f64 = counts.iter().map(|c| (c - e).powi(2) / e).sum();
        let p = 1.0 - ChiSquared::new(5.0).unwrap().cdf(chi2);
        assert!(p > 0.001, "chi2 = {chi2}, p = {p}");
    }

    #[test]
    fn identity_and_simple_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = DataTable::random(3, &mut rng);
        assert_eq!(twirl_dataset(&g, &TwirlElement::identity(3)).unwrap(), g);
        assert_eq!(TwirlElement::identity(3).clifford_matrix().unwrap(), Mat::identity(8));
        let c = TwirlElement::new(Gf2Matrix::identity(3), Gf2Matrix::zero(3), 0, 1).unwrap();
        let gc = twirl_dataset(&g, &c).unwrap();
        for x in 0..8 {
            assert_eq!(gc.get(x), g.get(x) ^ (x & 1 == 1));
        }
        let x1 = TwirlElement::new(Gf2Matrix::identity(1), Gf2Matrix::zero(1), 1, 0).unwrap();
        assert_eq!(x1.clifford_matrix().unwrap(), Gate::X(0).matrix(1));
    }

    #[test]
    fn conjugating_z_by_x_flips_sign() {
        let c = TwirlElement::new(Gf2Matrix::identity(1), Gf2Matrix::zero(1), 1, 0).unwrap();
        let z = PauliString::z(1, 0);
        assert_eq!(c.conjugate_pauli(&z).unwrap(), z.negated());
    }

    #[test]
    fn gate_list_product_equals_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=4 {
            for _ in 0..20 {
                let c = sample_twirl(n, &mut rng);
                let gates = c.clifford_gate_list();
                assert!(gates.len() <= 2 * n + n * (n - 1) / 2 + n * n);
                let mut u = Mat::identity(1 << n);
                for gate in &gates {
                    u = gate.matrix(n).matmul(&u);
                }
                assert!(u.max_abs_diff(&c.clifford_matrix().unwrap()) < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_conjugation_exhaustive_n2() {
        for c in TwirlElement::enumerate(2).unwrap() {
            let cm = c.clifford_matrix().unwrap();
            for p in PauliString::all(2) {
                let dense = p.matrix().conjugate_by(&cm);
                let closed = c.conjugate_pauli(&p).unwrap();
                assert!(closed.matrix().max_abs_diff(&dense) < 1e-12, "{c:?} {p}");
            }
        }
    }

    #[test]
    fn resource_state_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in 1..=3 {
            for _ in 0..20 {
                let g = DataTable::random(n, &mut rng);
                let c = sample_twirl(n, &mut rng);
                let gc = twirl_dataset(&g, &c).unwrap();
                let cm = c.clifford_matrix().unwrap();
                let lhs = cm.apply(resource_state(&g).unwrap().amplitudes());
                let rhs = resource_state(&gc).unwrap();
                for (a, b) in lhs.iter().zip(rhs.amplitudes()) {
                    assert!((a - b).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn monomial_conjugation_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = crate::qcore::random_density(3, &mut rng);
        let c = sample_twirl(3, &mut rng);
        let cm = c.clifford_matrix().unwrap();
        let dense = cm.adjoint().matmul(rho.matrix()).matmul(&cm);
        assert!(c.conjugate_dagger(rho.matrix()).max_abs_diff(&dense) < 1e-14);
        assert!(c.conjugate(rho.matrix()).max_abs_diff(&rho.matrix().conjugate_by(&cm)) < 1e-14);
    }

    #[test]
    fn uniform_spreading_exact_n2() {
        let elements = TwirlElement::enumerate(2).unwrap();
        for p in PauliString::all(2) {
            let mut counts: HashMap<PauliString, usize> = HashMap::new();
            for c in &elements {
                *counts.entry(c.conjugate_pauli(&p).unwrap()).or_default() += 1;
            }
            let subset = p.subset();
            assert_eq!(counts.len() as u64, subset.size(2));
            assert!(counts.keys().all(|q| q.subset() == subset));
            let first = *counts.values().next().unwrap();
            assert!(counts.values().all(|&k| k == first));
        }
    }

    #[test]
    fn noiseless_twirl_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = DataTable::random(2, &mut rng);
        let phi = |h: &DataTable| Ok(resource_state(h)?.to_density());
        let t = twirled_state_with(&g, TwirlMode::ExactEnumeration, phi).unwrap();
        let pure = resource_state(&g).unwrap().to_density();
        assert!(t.state.matrix().max_abs_diff(pure.matrix()) < 1e-12);
        assert_eq!(t.terms, 192);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = DataTable::random(3, &mut rng);
        let noisy = |h: &DataTable| {
            let p = resource_state(h)?.to_density();
            let m = &p.matrix().scale_real(0.9) + &Mat::identity(8).scale_real(0.1 / 8.0);
            DensityMatrix::new(m)
        };
        let mode = TwirlMode::MonteCarlo { samples: 1000, seed: 42 };
        let a = twirled_state_with(&g, mode, noisy).unwrap();
        let b = twirled_state_with(&g, mode, noisy).unwrap();
        assert_eq!(a.state, b.state);
    }

    proptest! {
        #[test]
        fn closed_form_conjugation_n3(seed in any::<u64>(), k in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = sample_twirl(3, &mut rng);
            let p = PauliString::new(3, k & 1 == 1, (k >> 1) & 7, (k >> 4) & 7);
            let dense = p.matrix().conjugate_by(&c.clifford_matrix().unwrap());
            prop_assert!(c.conjugate_pauli(&p).unwrap().matrix().max_abs_diff(&dense) < 1e-12);
        }

        #[test]
        fn conjugation_preserves_subset(seed in any::<u64>(), n in 1usize..=5, k in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = sample_twirl(n, &mut rng);
            let mask = (1u64 << n) - 1;
            let p = PauliString::new(n, k & 1 == 1, (k >> 1) & mask, (k >> 8) & mask);
            prop_assert_eq!(c.conjugate_pauli(&p).unwrap().subset(), p.subset());
        }
    }
}
