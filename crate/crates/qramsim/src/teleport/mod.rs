//! Gate teleportation of QRAM resource states, the adaptive protocol built
//! on it, Clifford-hierarchy membership and the cost formulas.
//!
//! Teleporting through a resource `φ` on the address register `ρ` with
//! transversal CNOTs (address → resource) and measuring the resource gives
//! outcome `m` with the unnormalized post-state `ρ ∘ Φ_m`, where
//! `Φ_m[x, y] = φ[x⊕m, y⊕m]`. For `φ = |Ψ(g)⟩⟨Ψ(g)|` this is
//! `V(g^{⊕m}) ρ V(g^{⊕m})† / 2^n`.

mod costs;
mod hierarchy;
mod protocol;

pub use costs::{estimate_costs, CostEstimate};
pub use hierarchy::{pauli_up_to_phase, verify_clifford_hierarchy};
pub use protocol::{
    run_protocol, run_trajectories, BranchMode, DeviceSpec, DistillerSpec, EffectiveAction,
    EncodingSpec, EnumeratedAction, ProtocolConfig, ProtocolOutcome, ProtocolTrace, RoundRecord,
    Target, TraceStatus, TrajectoryAction,
};

use rand::Rng;

use crate::boolfn::{shift, DataTable};
use crate::error::{Error, Result};
use crate::qcore::{
    check_register, qram_unitary, resource_state, sign_diag, DensityMatrix, Mat, QuantumChannel,
    C64,
};

/// `Φ_m[x, y] = φ[x⊕m, y⊕m]`.
pub fn shifted_resource(phi: &Mat, m: usize) -> Mat {
    Mat::from_fn(phi.rows(), phi.cols(), |x, y| phi[(x ^ m, y ^ m)])
}

/// Probability of each outcome `m` when teleporting `ρ` through `φ`.
pub fn teleport_outcome_probabilities(rho: &DensityMatrix, phi: &DensityMatrix) -> Result<Vec<f64>> {
    check_pair(rho, phi)?;
    let d = rho.dim();
    let (r, p) = (rho.matrix(), phi.matrix());
    Ok((0..d)
        .map(|m| (0..d).map(|x| r[(x, x)].re * p[(x ^ m, x ^ m)].re).sum())
        .collect())
}

fn check_pair(rho: &DensityMatrix, phi: &DensityMatrix) -> Result<()> {
    if rho.dim() != phi.dim() {
        return Err(Error::Dimension(format!(
            "address register on {} qubits, resource on {}",
            rho.num_qubits(),
            phi.num_qubits()
        )));
    }
    check_register(rho.num_qubits())
}

/// One teleportation: sample `m`, return it with the normalized post-state.
pub fn teleport_once<R: Rng + ?Sized>(
    rho_addr: &DensityMatrix,
    resource: &DensityMatrix,
    rng: &mut R,
) -> Result<(u64, DensityMatrix)> {
    let probs = teleport_outcome_probabilities(rho_addr, resource)?;
    let u = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut m = probs.len() - 1;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            m = k;
            break;
        }
    }
    let out = rho_addr
        .matrix()
        .schur(&shifted_resource(resource.matrix(), m))
        .scale_real(1.0 / probs[m]);
    Ok((m as u64, DensityMatrix::new(out.hermitian_part())?))
}

/// The ideal channel `ρ ↦ 2^{−n} Σ_m V(g^{⊕m}) ρ V(g^{⊕m})† ⊗ |m⟩⟨m|`, with
/// the data register on the low `n` output qubits and `m` above it.
pub fn ideal_teleport_channel(g: &DataTable) -> Result<QuantumChannel> {
    let n = g.n();
    check_register(n)?;
    let d = 1usize << n;
    let scale = 1.0 / (d as f64).sqrt();
    let kraus = (0..d)
        .map(|m| {
            let v = qram_unitary(&shift(g, m as u64)?)?;
            Ok(Mat::from_fn(d * d, d, |r, c| {
                if r == c + d * m {
                    C64::new(v[c] * scale, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    QuantumChannel::new(n, 2 * n, kraus)
}

/// Teleportation through an arbitrary resource `φ`, outcome register kept:
/// `ρ ↦ Σ_m (ρ ∘ Φ_m) ⊗ |m⟩⟨m|`. Kraus operators come from the spectral
/// decomposition of `φ`, since `ρ ∘ vv† = D_v ρ D_v†`.
pub fn teleport_channel_from_resource(phi: &DensityMatrix) -> Result<QuantumChannel> {
    let n = phi.num_qubits();
    check_register(n)?;
    let d = phi.dim();
    let e = phi.eigh();
    let mut kraus = Vec::new();
    for (k, &mu) in e.values.iter().enumerate() {
        if mu <= 0.0 {
            continue;
        }
        let v = e.vector(k);
        let s = mu.sqrt();
        for m in 0..d {
            kraus.push(Mat::from_fn(d * d, d, |r, c| {
                if r == c + d * m {
                    v[c ^ m] * s
                } else {
                    C64::new(0.0, 0.0)
                }
            }));
        }
    }
    // Clipping tiny negative eigenvalues can leave a residual far below TP_TOL.
    QuantumChannel::new(n, 2 * n, kraus)
}

/// `½‖J(𝒯(g)) − J(𝒯_φ)‖₁` for the normalized Choi states of the ideal and the
/// approximate teleportation channels. Both Choi states are block diagonal in
/// `m`, each block being `Φ_m / 2^n` on the span of `|x⟩|x⟩`, so the gap is
/// evaluated block by block.
pub fn choi_gap(phi: &DensityMatrix, g: &DataTable) -> Result<f64> {
    if phi.num_qubits() != g.n() {
        return Err(Error::Length {
            expected: g.n(),
            got: phi.num_qubits(),
        });
    }
    let ideal = resource_state(g)?.to_density();
    let d = phi.dim();
    let mut total = 0.0;
    for m in 0..d {
        let diff = &shifted_resource(phi.matrix(), m) - &shifted_resource(ideal.matrix(), m);
        total += diff.trace_norm_hermitian();
    }
    Ok(0.5 * total / d as f64)
}

/// Data-register channel of teleporting through the ideal resource for `g`,
/// outcomes discarded.
pub fn ideal_data_channel(g: &DataTable) -> Result<QuantumChannel> {
    let d = 1usize << g.n();
    let kraus = (0..d)
        .map(|m| {
            let v = sign_diag(&qram_unitary(&shift(g, m as u64)?)?);
            Ok(Mat::from_diag(&v).scale_real(1.0 / (d as f64).sqrt()))
        })
        .collect::<Result<Vec<_>>>()?;
    QuantumChannel::new(g.n(), g.n(), kraus)
}
