//! State-agnostic purity amplification: the streaming swap test, LMR density
//! matrix exponentiation and the two QPCA-style filters built on it.
//!
//! Every distiller consumes copies of `ρ_in` from a [`CopySource`] and returns
//! a [`DistillReport`]. Because all of them act only through operations that
//! commute with `ρ_in`, outputs stay diagonal in its eigenbasis; a source can
//! therefore be given either densely or by its spectrum alone.

mod lmr;
mod qpca;
mod swap;

pub use lmr::{
    block_encoding_sequence, block_encoding_unitary, fractional_swap_unitary, lmr_step,
    lmr_step_circuit, theta_angles, BlockGate,
};
pub use qpca::{
    qpca_recursive, qpca_simple, qpca_simple_repeated, simple_qpca_parameters, QpcaSchedule,
};
pub use swap::{iterated_swap_test, swap_test_step, swap_test_weights};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qcore::{linalg, DensityMatrix, Mat, C64};

/// Default copy budget per distillation call.
pub const DEFAULT_COPY_BUDGET: u64 = 1_000_000;

/// A copy of `ρ_in` (or a state derived from it), either as a dense matrix or
/// as weights on the eigenbasis of `ρ_in`.
#[derive(Clone, Debug)]
pub enum SourceState {
    Dense(DensityMatrix),
    Spectral(Vec<f64>),
}

impl SourceState {
    pub fn dim(&self) -> usize {
        match self {
            SourceState::Dense(r) => r.dim(),
            SourceState::Spectral(w) => w.len(),
        }
    }

    pub fn purity(&self) -> f64 {
        match self {
            SourceState::Dense(r) => r.purity(),
            SourceState::Spectral(w) => w.iter().map(|x| x * x).sum(),
        }
    }
}

#[derive(Clone, Debug)]
enum Principal {
    Vector(Vec<C64>),
    Index(usize),
}

/// Stream of identical copies of `ρ_in` with a copy counter and budget.
#[derive(Clone, Debug)]
pub struct CopySource {
    state: SourceState,
    principal: Principal,
    /// Eigenvalues in descending order.
    spectrum: Vec<f64>,
    /// Eigenvectors (columns, same order) for dense sources.
    basis: Option<Mat>,
    copies: u64,
    budget: u64,
}

impl CopySource {
    pub fn dense(rho: DensityMatrix) -> Self {
        let e = rho.eigh();
        CopySource {
            principal: Principal::Vector(e.vector(0)),
            spectrum: e.values.clone(),
            basis: Some(e.vectors),
            state: SourceState::Dense(rho),
            copies: 0,
            budget: DEFAULT_COPY_BUDGET,
        }
    }

    /// `ρ_in = Σ_j w_j |ψ_j⟩⟨ψ_j|` given only through its weights.
    pub fn spectral(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Precondition("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!("weights sum to {total}")));
        }
        let top = (0..weights.len())
            .max_by(|&a, &b| weights[a].total_cmp(&weights[b]))
            .unwrap();
        let mut spectrum = weights.clone();
        spectrum.sort_by(|a, b| b.total_cmp(a));
        Ok(CopySource {
            state: SourceState::Spectral(weights),
            principal: Principal::Index(top),
            spectrum,
            basis: None,
            copies: 0,
            budget: DEFAULT_COPY_BUDGET,
        })
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn copies(&self) -> u64 {
        self.copies
    }

    pub fn reset_counter(&mut self) {
        self.copies = 0;
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    /// Eigenvalues of `ρ_in`, largest first.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// `ρ_in` itself, without drawing a copy.
    pub fn state(&self) -> &SourceState {
        &self.state
    }

    /// Yield one fresh copy.
    pub fn draw(&mut self) -> Result<&SourceState> {
        self.draw_many(1)?;
        Ok(&self.state)
    }

    /// Account for `k` copies consumed in bulk.
    pub fn draw_many(&mut self, k: u64) -> Result<()> {
        if self.copies.saturating_add(k) > self.budget {
            self.copies = self.budget;
            return Err(Error::Budget {
                budget: self.budget,
            });
        }
        self.copies += k;
        Ok(())
    }

    /// `⟨Ξ|σ|Ξ⟩` for the principal eigenvector `Ξ` of `ρ_in`.
    pub fn overlap(&self, out: &SourceState) -> f64 {
        match (out, &self.principal) {
            (SourceState::Dense(r), Principal::Vector(v)) => {
                linalg::inner(v, &r.matrix().apply(v)).re
            }
            (SourceState::Spectral(w), Principal::Index(i)) => w[*i],
            (SourceState::Spectral(w), Principal::Vector(_)) => w[0],
            (SourceState::Dense(r), Principal::Index(i)) => r.matrix()[(*i, *i)].re,
        }
    }

    /// `‖[ρ_in, σ]‖_max`; zero for spectral states by construction.
    pub fn commutator_norm(&self, out: &SourceState) -> f64 {
        match (&self.state, out) {
            (SourceState::Dense(a), SourceState::Dense(b)) => a.commutator_norm(b),
            _ => 0.0,
        }
    }

    /// Build an output state from weights on the eigenbasis of `ρ_in` (sorted
    /// as [`spectrum`](Self::spectrum) for dense sources, in the given order
    /// for spectral ones).
    pub(crate) fn state_from_weights(&self, weights: Vec<f64>) -> Result<SourceState> {
        match &self.basis {
            Some(v) => Ok(SourceState::Dense(DensityMatrix::from_spectrum(&weights, v)?)),
            None => Ok(SourceState::Spectral(weights)),
        }
    }

    /// Weights of `ρ_in` in the order used by `state_from_weights`.
    pub(crate) fn eigen_weights(&self) -> Vec<f64> {
        match &self.state {
            SourceState::Spectral(w) => w.clone(),
            SourceState::Dense(_) => self.spectrum.clone(),
        }
    }

    /// Index of the principal component within `eigen_weights`.
    pub(crate) fn principal_index(&self) -> usize {
        match self.principal {
            Principal::Index(i) => i,
            Principal::Vector(_) => 0,
        }
    }
}

/// Outcome of one distillation call.
#[derive(Clone, Debug, Serialize)]
pub struct DistillReport {
    pub distiller: String,
    pub params: BTreeMap<String, f64>,
    pub copies: u64,
    /// Swap tests or LMR steps performed.
    pub steps: u64,
    pub success: bool,
    /// `⟨Ξ|ρ_out|Ξ⟩`.
    pub overlap: f64,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_probability: Option<f64>,
    /// Set when the copy budget ran out before the distiller finished.
    pub exhausted: bool,
    #[serde(skip)]
    pub output: Option<SourceState>,
}

impl DistillReport {
    pub(crate) fn new(distiller: &str, params: &[(&str, f64)]) -> Self {
        DistillReport {
            distiller: distiller.to_string(),
            params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            copies: 0,
            steps: 0,
            success: false,
            overlap: 0.0,
            seed: None,
            success_probability: None,
            exhausted: false,
            output: None,
        }
    }

    /// `1 − overlap`.
    pub fn infidelity(&self) -> f64 {
        1.0 - self.overlap
    }

    pub fn output_density(&self) -> Option<&DensityMatrix> {
        match &self.output {
            Some(SourceState::Dense(r)) => Some(r),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_source_validates_and_counts() {
        assert!(CopySource::spectral(vec![0.5, 0.6]).is_err());
        assert!(CopySource::spectral(vec![1.5, -0.5]).is_err());
        let mut src = CopySource::spectral(vec![0.2, 0.7, 0.1]).unwrap().with_budget(2);
        assert_eq!(src.spectrum(), &[0.7, 0.2, 0.1]);
        assert_eq!(src.overlap(src.state()), 0.7);
        src.draw().unwrap();
        src.draw().unwrap();
        assert_eq!(src.copies(), 2);
        assert_eq!(src.draw().unwrap_err(), Error::Budget { budget: 2 });
    }

    #[test]
    fn dense_source_overlap_is_top_eigenvalue() {
        use crate::qcore::random_density;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(2, &mut rng);
        let src = CopySource::dense(rho.clone());
        let top = rho.eigenvalues()[0];
        assert!((src.overlap(src.state()) - top).abs() < 1e-12);
        let back = src.state_from_weights(src.eigen_weights()).unwrap();
        match back {
            SourceState::Dense(r) => assert!(r.matrix().max_abs_diff(rho.matrix()) < 1e-10),
            _ => unreachable!(),
        }
    }

    #[test]
    fn report_serializes_expected_fields() {
        let mut r = DistillReport::new("swap_test", &[("levels", 3.0)]);
        r.seed = Some(7);
        let v = serde_json::to_value(&r).unwrap();
        for key in ["distiller", "params", "copies", "steps", "success", "overlap", "seed"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v.get("output").is_none());
    }
}
