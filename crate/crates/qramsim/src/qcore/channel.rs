//! Quantum channels as Kraus lists, with Choi-matrix conversion.

use crate::error::{Error, Result};

use super::linalg::{Mat, C64, ONE};
use super::state::DensityMatrix;
use super::MAX_JOINT_QUBITS;

pub const TP_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct QuantumChannel {
    in_qubits: usize,
    out_qubits: usize,
    kraus: Vec<Mat>,
}

impl QuantumChannel {
    /// Build from Kraus operators `K_k : 2^in → 2^out`; `Σ K†K = I` is checked.
    pub fn new(in_qubits: usize, out_qubits: usize, kraus: Vec<Mat>) -> Result<Self> {
        if in_qubits.max(out_qubits) > MAX_JOINT_QUBITS {
            return Err(Error::SizeCap(format!("{} qubits", in_qubits.max(out_qubits))));
        }
        let (di, d_o) = (1usize << in_qubits, 1usize << out_qubits);
        if kraus.is_empty() {
            return Err(Error::Dimension("empty Kraus list".into()));
        }
        let mut sum = Mat::zeros(di, di);
        for k in &kraus {
            if k.rows() != d_o || k.cols() != di {
                return Err(Error::Dimension(format!(
                    "Kraus operator {}x{}, expected {d_o}x{di}",
                    k.rows(),
                    k.cols()
                )));
            }
            sum.add_scaled(&k.adjoint().matmul(k), ONE);
        }
        let err = sum.max_abs_diff(&Mat::identity(di));
        if err > TP_TOL {
            return Err(Error::Numerical(format!("not trace preserving ({err:e})")));
        }
        Ok(QuantumChannel {
            in_qubits,
            out_qubits,
            kraus,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::unitary(Mat::identity(1 << n))
    }

    pub fn unitary(u: Mat) -> Self {
        let q = u.rows().trailing_zeros() as usize;
        QuantumChannel {
            in_qubits: q,
            out_qubits: q,
            kraus: vec![u],
        }
    }

    pub fn in_qubits(&self) -> usize {
        self.in_qubits
    }

    pub fn out_qubits(&self) -> usize {
        self.out_qubits
    }

    pub fn kraus(&self) -> &[Mat] {
        &self.kraus
    }

    /// `Σ_k K ρ K†` on a raw matrix (no normalization or validation).
    pub fn apply_mat(&self, rho: &Mat) -> Mat {
        let d = 1usize << self.out_qubits;
        let mut out = Mat::zeros(d, d);
        for k in &self.kraus {
            out.add_scaled(&rho.conjugate_by(k), ONE);
        }
        out
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.num_qubits() != self.in_qubits {
            return Err(Error::Dimension(format!(
                "channel on {} qubits applied to {}",
                self.in_qubits,
                rho.num_qubits()
            )));
        }
        Ok(DensityMatrix::from_mat_unchecked(
            self.apply_mat(rho.matrix()).hermitian_part(),
        ))
    }

    /// `self ∘ first` (apply `first`, then `self`).
    pub fn compose(&self, first: &QuantumChannel) -> Result<QuantumChannel> {
        if first.out_qubits != self.in_qubits {
            return Err(Error::Dimension("composition mismatch".into()));
        }
        let kraus = self
            .kraus
            .iter()
            .flat_map(|k2| first.kraus.iter().map(move |k1| k2.matmul(k1)))
            .collect();
        Ok(QuantumChannel {
            in_qubits: first.in_qubits,
            out_qubits: self.out_qubits,
            kraus,
        })
    }

    /// `self ⊗ high` on disjoint registers, `self` on the low qubits.
    pub fn tensor(&self, high: &QuantumChannel) -> Result<QuantumChannel> {
        if self.in_qubits + high.in_qubits > MAX_JOINT_QUBITS {
            return Err(Error::SizeCap("tensor of channels".into()));
        }
        let kraus = high
            .kraus
            .iter()
            .flat_map(|kh| self.kraus.iter().map(move |kl| kl.tensor(kh)))
            .collect();
        Ok(QuantumChannel {
            in_qubits: self.in_qubits + high.in_qubits,
            out_qubits: self.out_qubits + high.out_qubits,
            kraus,
        })
    }

    /// Normalized Choi state `(id ⊗ Φ)(|Ω⟩⟨Ω|)`, reference register on the
    /// low qubits.
    pub fn choi(&self) -> Result<Mat> {
        let q = self.in_qubits + self.out_qubits;
        if q > MAX_JOINT_QUBITS {
            return Err(Error::SizeCap(format!("Choi matrix on {q} qubits")));
        }
        let di = 1usize << self.in_qubits;
        let d_o = 1usize << self.out_qubits;
        let mut out = Mat::zeros(di * d_o, di * d_o);
        let scale = C64::new(1.0 / di as f64, 0.0);
        for k in &self.kraus {
            for i in 0..di {
                for j in 0..di {
                    for r in 0..d_o {
                        let kri = k[(r, i)];
                        if kri == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for c in 0..d_o {
                            out[(i + di * r, j + di * c)] += kri * k[(c, j)].conj() * scale;
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `½‖J(Φ) − J(Ψ)‖₁` between normalized Choi matrices.
pub fn choi_distance(a: &Mat, b: &Mat) -> f64 {
    0.5 * (a - b).trace_norm_hermitian()
}
