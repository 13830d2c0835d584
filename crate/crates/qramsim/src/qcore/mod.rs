//! Dense linear-algebra substrate: states, Pauli strings, channels and the
//! QRAM unitary and resource state.

pub mod channel;
pub mod linalg;
pub mod pauli;
pub mod state;

pub use channel::{choi_distance, QuantumChannel};
pub use linalg::{eigh, eigvalsh, Eigh, Mat, C64};
pub use pauli::{PauliString, PauliSubset};
pub use state::{DensityMatrix, StateVector};

use rand::Rng;

use crate::boolfn::DataTable;
use crate::error::{Error, Result};

/// Largest single dense register.
pub const MAX_REGISTER_QUBITS: usize = 6;
/// Largest joint density matrix.
pub const MAX_JOINT_QUBITS: usize = 12;

pub(crate) fn check_register(n: usize) -> Result<()> {
    if n > MAX_REGISTER_QUBITS {
        return Err(Error::SizeCap(format!(
            "{n} qubits > register cap {MAX_REGISTER_QUBITS}"
        )));
    }
    Ok(())
}

/// Diagonal of `V(g)`: entry `x` is `(−1)^{g(x)}`.
pub fn qram_unitary(g: &DataTable) -> Result<Vec<f64>> {
    check_register(g.n())?;
    Ok(g.signs())
}

/// `|Ψ(g)⟩ = V(g)|+⟩^{⊗n}`.
pub fn resource_state(g: &DataTable) -> Result<StateVector> {
    let signs = qram_unitary(g)?;
    let a = 1.0 / (signs.len() as f64).sqrt();
    StateVector::new(signs.iter().map(|s| C64::new(s * a, 0.0)).collect())
}

/// Diagonal sign vector as complex entries.
pub fn sign_diag(signs: &[f64]) -> Vec<C64> {
    signs.iter().map(|&s| C64::new(s, 0.0)).collect()
}

/// `H^{⊗k}` on the listed qubits of a `q`-qubit register, identity elsewhere.
pub fn hadamard_on(q: usize, qubits: &[usize]) -> Mat {
    let d = 1usize << q;
    let mask: usize = qubits.iter().map(|&k| 1 << k).sum();
    let scale = (0.5f64).powf(qubits.len() as f64 / 2.0);
    Mat::from_fn(d, d, |r, c| {
        if (r ^ c) & !mask != 0 {
            C64::new(0.0, 0.0)
        } else if (r & c & mask).count_ones() & 1 == 1 {
            C64::new(-scale, 0.0)
        } else {
            C64::new(scale, 0.0)
        }
    })
}

/// Random full-rank density matrix from a Ginibre matrix.
pub fn random_density<R: Rng + ?Sized>(q: usize, rng: &mut R) -> DensityMatrix {
    let d = 1usize << q;
    let g = Mat::from_fn(d, d, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    DensityMatrix::from_unnormalized(g.matmul(&g.adjoint())).expect("Ginibre product is PSD")
}

/// Random channel whose Kraus operators are the blocks of a random isometry.
pub fn random_channel<R: Rng + ?Sized>(q: usize, kraus_count: usize, rng: &mut R) -> QuantumChannel {
    let d = 1usize << q;
    let rows = d * kraus_count;
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v: Vec<C64> = (0..rows)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        for u in &cols {
            let p = linalg::inner(u, &v);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= p * ui;
            }
        }
        let nrm = linalg::norm(&v);
        if nrm < 1e-6 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nrm);
        cols.push(v);
    }
    let kraus = (0..kraus_count)
        .map(|k| Mat::from_fn(d, d, |r, c| cols[c][k * d + r]))
        .collect();
    QuantumChannel::new(q, q, kraus).expect("isometry blocks are trace preserving")
}

/// Haar-ish random unitary (Gram–Schmidt of a complex Gaussian-like matrix).
pub fn random_unitary<R: Rng + ?Sized>(q: usize, rng: &mut R) -> Mat {
    random_channel(q, 1, rng).kraus()[0].clone()
}
