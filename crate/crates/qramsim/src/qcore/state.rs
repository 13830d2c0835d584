//! Pure states and density matrices.

use crate::error::{Error, Result};

use super::linalg::{self, eigh, eigvalsh, Eigh, Mat, C64, ZERO};
use super::MAX_JOINT_QUBITS;

pub const NORM_TOL: f64 = 1e-9;
pub const HERMITIAN_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = -1e-8;
/// Largest dimension for which the PSD invariant is checked on construction.
const PSD_CHECK_DIM: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::Dimension(format!("length {} is not 2^q", amps.len())));
        }
        let nrm = linalg::norm(&amps);
        if (nrm * nrm - 1.0).abs() > NORM_TOL {
            return Err(Error::Numerical(format!("state norm² = {}", nrm * nrm)));
        }
        Ok(StateVector {
            num_qubits: amps.len().trailing_zeros() as usize,
            amps,
        })
    }

    /// Normalize an arbitrary nonzero vector.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        let nrm = linalg::norm(&amps);
        if nrm == 0.0 {
            return Err(Error::Numerical("zero vector".into()));
        }
        amps.iter_mut().for_each(|a| *a /= nrm);
        Self::new(amps)
    }

    pub fn basis(num_qubits: usize, x: u64) -> Self {
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[x as usize] = C64::new(1.0, 0.0);
        StateVector { num_qubits, amps }
    }

    pub fn plus(num_qubits: usize) -> Self {
        let d = 1usize << num_qubits;
        let a = C64::new(1.0 / (d as f64).sqrt(), 0.0);
        StateVector {
            num_qubits,
            amps: vec![a; d],
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        linalg::inner(&self.amps, &other.amps)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_mat_unchecked(Mat::outer(&self.amps, &self.amps))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    mat: Mat,
}

impl DensityMatrix {
    /// Validate Hermiticity, unit trace and (for small dimensions) positivity.
    pub fn new(mat: Mat) -> Result<Self> {
        let d = mat.rows();
        if !mat.is_square() || !d.is_power_of_two() {
            return Err(Error::Dimension(format!("{}x{}", mat.rows(), mat.cols())));
        }
        let q = d.trailing_zeros() as usize;
        if q > MAX_JOINT_QUBITS {
            return Err(Error::SizeCap(format!("{q} qubits > {MAX_JOINT_QUBITS}")));
        }
        let herm = mat.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::Numerical(format!("not Hermitian ({herm:e})")));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Numerical(format!("trace = {tr}")));
        }
        if d <= PSD_CHECK_DIM {
            let min = eigvalsh(&mat).last().copied().unwrap_or(0.0);
            if min < PSD_TOL {
                return Err(Error::Numerical(format!("min eigenvalue {min:e}")));
            }
        }
        Ok(DensityMatrix { num_qubits: q, mat })
    }

    /// Construct without checks; invariants are asserted in debug builds.
    pub(crate) fn from_mat_unchecked(mat: Mat) -> Self {
        let q = mat.rows().trailing_zeros() as usize;
        debug_assert!(mat.hermiticity_error() <= HERMITIAN_TOL);
        debug_assert!((mat.trace().re - 1.0).abs() <= 1e-8);
        DensityMatrix { num_qubits: q, mat }
    }

    /// Normalize a nonzero PSD operator to unit trace.
    pub fn from_unnormalized(mat: Mat) -> Result<Self> {
        let tr = mat.trace().re;
        if tr <= 0.0 {
            return Err(Error::Numerical(format!("nonpositive trace {tr}")));
        }
        Self::new(mat.scale_real(1.0 / tr).hermitian_part())
    }

    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let d = 1usize << num_qubits;
        Self::from_mat_unchecked(Mat::identity(d).scale_real(1.0 / d as f64))
    }

    /// `Σ_k w_k |v_k⟩⟨v_k|` for orthonormal `v_k` and weights summing to one.
    pub fn from_spectrum(weights: &[f64], vectors: &Mat) -> Result<Self> {
        let d = vectors.rows();
        let mut m = Mat::zeros(d, d);
        for (k, &w) in weights.iter().enumerate() {
            let v = vectors.column(k);
            m.add_scaled(&Mat::outer(&v, &v), C64::new(w, 0.0));
        }
        Self::new(m.hermitian_part())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &Mat {
        &self.mat
    }

    pub fn into_matrix(self) -> Mat {
        self.mat
    }

    pub fn purity(&self) -> f64 {
        self.mat.data().iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigh(&self) -> Eigh {
        eigh(&self.mat)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvalsh(&self.mat)
    }

    /// `(λ_1, v_1)`.
    pub fn principal_eig(&self) -> (f64, Vec<C64>) {
        let e = self.eigh();
        (e.values[0], e.vector(0))
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_pure(&self, psi: &StateVector) -> Result<f64> {
        if psi.dim() != self.dim() {
            return Err(Error::Dimension(format!("{} vs {}", psi.dim(), self.dim())));
        }
        let rv = self.mat.apply(psi.amplitudes());
        Ok(linalg::inner(psi.amplitudes(), &rv).re)
    }

    /// `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!("{} vs {}", self.dim(), other.dim())));
        }
        Ok(0.5 * (&self.mat - &other.mat).trace_norm_hermitian())
    }

    /// `self ⊗ high`, with `self` on the low qubits.
    pub fn tensor(&self, high: &DensityMatrix) -> Result<DensityMatrix> {
        let q = self.num_qubits + high.num_qubits;
        if q > MAX_JOINT_QUBITS {
            return Err(Error::SizeCap(format!("{q} qubits > {MAX_JOINT_QUBITS}")));
        }
        Ok(DensityMatrix::from_mat_unchecked(self.mat.tensor(&high.mat)))
    }

    /// Trace out everything except `kept`; bit `k` of the output index is
    /// qubit `kept[k]`.
    pub fn partial_trace(&self, kept: &[usize]) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_mat_unchecked(partial_trace_mat(
            &self.mat,
            self.num_qubits,
            kept,
        )?))
    }

    /// Projective measurement of `qubits` in the computational basis. Each
    /// entry is (outcome, probability, normalized post-measurement state on
    /// the full register); zero-probability outcomes are omitted.
    pub fn measure_computational(&self, qubits: &[usize]) -> Result<Vec<(u64, f64, DensityMatrix)>> {
        check_qubits(self.num_qubits, qubits)?;
        let d = self.dim();
        let outcome_of = |x: usize| -> u64 {
            qubits
                .iter()
                .enumerate()
                .fold(0u64, |acc, (k, &q)| acc | ((x >> q & 1) as u64) << k)
        };
        let mut out = Vec::new();
        for o in 0..1u64 << qubits.len() {
            let mut m = Mat::zeros(d, d);
            let mut p = 0.0;
            for x in 0..d {
                if outcome_of(x) != o {
                    continue;
                }
                p += self.mat[(x, x)].re;
                for y in 0..d {
                    if outcome_of(y) == o {
                        m[(x, y)] = self.mat[(x, y)];
                    }
                }
            }
            if p > 1e-15 {
                out.push((o, p, DensityMatrix::from_mat_unchecked(m.scale_real(1.0 / p))));
            }
        }
        Ok(out)
    }

    /// Diagonal conjugation `D ρ D†`.
    pub fn conjugate_diagonal(&self, diag: &[C64]) -> DensityMatrix {
        DensityMatrix::from_mat_unchecked(conjugate_diagonal_mat(&self.mat, diag))
    }

    pub fn conjugate_unitary(&self, u: &Mat) -> DensityMatrix {
        DensityMatrix::from_mat_unchecked(self.mat.conjugate_by(u))
    }

    /// `‖[ρ, σ]‖_max`.
    pub fn commutator_norm(&self, other: &DensityMatrix) -> f64 {
        let ab = self.mat.matmul(&other.mat);
        let ba = other.mat.matmul(&self.mat);
        ab.max_abs_diff(&ba)
    }
}

fn check_qubits(num_qubits: usize, qubits: &[usize]) -> Result<()> {
    let mut seen = 0u64;
    for &q in qubits {
        if q >= num_qubits || seen >> q & 1 == 1 {
            return Err(Error::Dimension(format!("bad qubit list {qubits:?}")));
        }
        seen |= 1 << q;
    }
    Ok(())
}

pub(crate) fn partial_trace_mat(m: &Mat, num_qubits: usize, kept: &[usize]) -> Result<Mat> {
    check_qubits(num_qubits, kept)?;
    let traced: Vec<usize> = (0..num_qubits).filter(|q| !kept.contains(q)).collect();
    let embed = |i: usize, t: usize| -> usize {
        let mut x = 0;
        for (k, &q) in kept.iter().enumerate() {
            x |= (i >> k & 1) << q;
        }
        for (k, &q) in traced.iter().enumerate() {
            x |= (t >> k & 1) << q;
        }
        x
    };
    let dk = 1usize << kept.len();
    let dt = 1usize << traced.len();
    Ok(Mat::from_fn(dk, dk, |i, j| {
        (0..dt).map(|t| m[(embed(i, t), embed(j, t))]).sum()
    }))
}

pub(crate) fn conjugate_diagonal_mat(m: &Mat, diag: &[C64]) -> Mat {
    Mat::from_fn(m.rows(), m.cols(), |r, c| diag[r] * m[(r, c)] * diag[c].conj())
}
