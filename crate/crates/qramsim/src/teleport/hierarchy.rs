//! Clifford-hierarchy level of `V(f)` by recursive dense conjugation.

use crate::boolfn::DataTable;
use crate::error::{Error, Result};
use crate::qcore::{qram_unitary, sign_diag, Mat, PauliString, C64};

const TOL: f64 = 1e-9;
/// Largest register for the recursive test.
const MAX_QUBITS: usize = 3;

/// `Some((λ, P))` when `U = λP` for a canonical Pauli `P` and `|λ| = 1`.
pub fn pauli_up_to_phase(u: &Mat) -> Option<(C64, PauliString)> {
    let d = u.rows();
    if !u.is_square() || !d.is_power_of_two() {
        return None;
    }
    let n = d.trailing_zeros() as usize;
    let col0 = u.column(0);
    let (b, &c0) = col0
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))?;
    if c0.norm() < 0.5 {
        return None;
    }
    let b = b as u64;
    // U[x⊕b, x] / U[b, 0] = (−1)^{a·x}.
    let mut a = 0u64;
    for q in 0..n {
        let x = 1u64 << q;
        let ratio = u[((x ^ b) as usize, x as usize)] / c0;
        if ratio.re < 0.0 {
            a |= x;
        }
    }
    let p = PauliString::new(n, false, a, b);
    let pm = p.matrix();
    let lambda = pm.adjoint().matmul(u).trace() / d as f64;
    if (lambda.norm() - 1.0).abs() > TOL || u.max_abs_diff(&pm.scale(lambda)) > TOL {
        return None;
    }
    Some((lambda, p))
}

fn generators(n: usize) -> Vec<Mat> {
    (0..n)
        .flat_map(|q| [PauliString::x(n, q).matrix(), PauliString::z(n, q).matrix()])
        .collect()
}

fn in_level(u: &Mat, k: usize, gens: &[Mat]) -> bool {
    if pauli_up_to_phase(u).is_some() {
        return true;
    }
    if k <= 1 {
        return false;
    }
    gens.iter().all(|g| in_level(&g.conjugate_by(u), k - 1, gens))
}

/// Smallest `k` such that `V(f)` passes the recursive membership test for
/// `𝒞_k`: level 1 is "a Pauli up to phase"; level `k` requires `V P V†` to be
/// in level `k−1` for every generator `P ∈ {X_i, Z_i}`.
pub fn verify_clifford_hierarchy(f: &DataTable) -> Result<usize> {
    let n = f.n();
    if n > MAX_QUBITS {
        return Err(Error::SizeCap(format!("hierarchy test on {n} qubits")));
    }
    let v = Mat::from_diag(&sign_diag(&qram_unitary(f)?));
    let gens = generators(n);
    for k in 1..=n + 1 {
        if in_level(&v, k, &gens) {
            return Ok(k);
        }
    }
    Err(Error::Numerical(format!("V(f) not found below level {}", n + 1)))
}
