//! Noisy physical QRAM devices with dataset-independent noise
//! `Ṽ(g) = N₂ ∘ V(g) ∘ N₁`, plus the logical encoding-noise model and Pauli
//! twirling of channels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boolfn::DataTable;
use crate::error::{Error, Result};
use crate::qcore::{
    check_register, qram_unitary, sign_diag, DensityMatrix, Mat, PauliString, QuantumChannel,
    StateVector, C64,
};

/// A device whose noise channels are fixed fields, never functions of `g`.
#[derive(Clone, Debug)]
pub struct NoisyDevice {
    pub n: usize,
    pub pre_noise: QuantumChannel,
    pub post_noise: QuantumChannel,
    pub label: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl NoisyDevice {
    pub fn new(pre_noise: QuantumChannel, post_noise: QuantumChannel, label: impl Into<String>) -> Result<Self> {
        let n = pre_noise.in_qubits();
        check_register(n)?;
        for ch in [&pre_noise, &post_noise] {
            if ch.in_qubits() != n || ch.out_qubits() != n {
                return Err(Error::Dimension(format!(
                    "device channels must act on {n} qubits"
                )));
            }
        }
        Ok(NoisyDevice {
            n,
            pre_noise,
            post_noise,
            label: label.into(),
        })
    }

    pub fn noiseless(n: usize) -> Result<Self> {
        Self::new(QuantumChannel::identity(n), QuantumChannel::identity(n), "noiseless")
    }

    /// Post-noise `ρ ↦ (1−p)ρ + p·I/2^n`.
    pub fn global_depolarizing(n: usize, p: f64) -> Result<Self> {
        check_probability(p)?;
        let post = pauli_channel(n, &depolarizing_weights(n, p))?;
        Self::new(QuantumChannel::identity(n), post, format!("global-depolarizing({p})"))
    }

    /// Independent `Z` errors with probability `p` on each qubit after the query.
    pub fn per_qubit_dephasing(n: usize, p: f64) -> Result<Self> {
        check_probability(p)?;
        let weights: Vec<(PauliString, f64)> = (0..1u64 << n)
            .map(|a| {
                let k = a.count_ones() as i32;
                (
                    PauliString::new(n, false, a, 0),
                    p.powi(k) * (1.0 - p).powi(n as i32 - k),
                )
            })
            .collect();
        let post = pauli_channel(n, &weights)?;
        Self::new(QuantumChannel::identity(n), post, format!("per-qubit-dephasing({p})"))
    }

    /// A router on the path to every address in `dead` fails: the branch on
    /// those addresses is replaced by the maximally mixed state.
    pub fn dead_router(n: usize, dead: &[u64]) -> Result<Self> {
        check_register(n)?;
        let d = 1usize << n;
        let mut in_x = vec![false; d];
        for &x in dead {
            if x as usize >= d {
                return Err(Error::Precondition(format!("address {x} out of range")));
            }
            in_x[x as usize] = true;
        }
        let k0 = Mat::from_real_diag(&in_x.iter().map(|&b| if b { 0.0 } else { 1.0 }).collect::<Vec<_>>());
        let mut kraus = vec![k0];
        let amp = C64::new(1.0 / (d as f64).sqrt(), 0.0);
        for x in (0..d).filter(|&x| in_x[x]) {
            for y in 0..d {
                let mut k = Mat::zeros(d, d);
                k[(y, x)] = amp;
                kraus.push(k);
            }
        }
        let post = QuantumChannel::new(n, n, kraus)?;
        Self::new(QuantumChannel::identity(n), post, format!("dead-router({} addresses)", dead.len()))
    }

    /// A coherent over-rotation `exp(−iθσ/2)` on every qubit after the query.
    pub fn coherent_rotation(n: usize, theta: f64, axis: Axis) -> Result<Self> {
        check_register(n)?;
        let one = rotation(theta, axis);
        let mut u = Mat::identity(1);
        for _ in 0..n {
            u = u.tensor(&one);
        }
        Self::new(
            QuantumChannel::identity(n),
            QuantumChannel::unitary(u),
            format!("coherent-rotation({axis:?}, {theta})"),
        )
    }

    pub fn custom_kraus(pre: QuantumChannel, post: QuantumChannel) -> Result<Self> {
        Self::new(pre, post, "custom-kraus")
    }

    /// `N₂[V(g) N₁[|+⟩⟨+|^{⊗n}] V(g)†]`.
    pub fn noisy_resource_state(&self, g: &DataTable) -> Result<DensityMatrix> {
        if g.n() != self.n {
            return Err(Error::Length {
                expected: self.n,
                got: g.n(),
            });
        }
        let plus = StateVector::plus(self.n).to_density();
        let after_pre = self.pre_noise.apply(&plus)?;
        let v = sign_diag(&qram_unitary(g)?);
        let queried = after_pre.conjugate_diagonal(&v);
        self.post_noise.apply(&queried)
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Precondition(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

fn rotation(theta: f64, axis: Axis) -> Mat {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mis = C64::new(0.0, -s);
    match axis {
        Axis::X => Mat::from_vec(2, 2, vec![C64::new(c, 0.0), mis, mis, C64::new(c, 0.0)]),
        Axis::Y => Mat::from_vec(
            2,
            2,
            vec![C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)],
        ),
        Axis::Z => Mat::from_diag(&[C64::new(c, -s), C64::new(c, s)]),
    }
}

/// Closed-form fidelity of the dead-router device on `|Ψ(g)⟩`:
/// `(2^n − |X|)(2^n − 1 − |X|)/2^{2n} + 1/2^n`.
pub fn dead_router_fidelity(n: usize, dead_count: usize) -> f64 {
    let d = (1u64 << n) as f64;
    let k = dead_count as f64;
    (d - k) * (d - 1.0 - k) / (d * d) + 1.0 / d
}

/// Weights of the global depolarizing channel over unsigned Paulis.
pub fn depolarizing_weights(n: usize, p: f64) -> Vec<(PauliString, f64)> {
    let d2 = (1u64 << (2 * n)) as f64;
    PauliString::unsigned(n)
        .map(|q| {
            let w = if q.is_identity_up_to_sign() { 1.0 - p + p / d2 } else { p / d2 };
            (q, w)
        })
        .collect()
}

/// Stochastic Pauli channel `ρ ↦ Σ w_P PρP` as a Kraus list.
pub fn pauli_channel(n: usize, weights: &[(PauliString, f64)]) -> Result<QuantumChannel> {
    check_register(n)?;
    let kraus = weights
        .iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(p, w)| p.matrix().scale_real(w.sqrt()))
        .collect();
    QuantumChannel::new(n, n, kraus)
}

/// Logical-level encoding noise: a stochastic Pauli channel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EncodingNoise {
    pub eps_enc: f64,
    pub pauli_weights: Vec<(PauliString, f64)>,
}

impl EncodingNoise {
    pub fn new(eps_enc: f64, pauli_weights: Vec<(PauliString, f64)>) -> Result<Self> {
        let total: f64 = pauli_weights.iter().map(|w| w.1).sum();
        if (total - 1.0).abs() > 1e-9 || pauli_weights.iter().any(|w| w.1 < 0.0) {
            return Err(Error::Precondition(format!("Pauli weights sum to {total}")));
        }
        let e = EncodingNoise {
            eps_enc,
            pauli_weights,
        };
        if e.identity_weight() < 1.0 - eps_enc - 1e-12 {
            return Err(Error::Precondition(format!(
                "identity weight {} below 1 - eps_enc = {}",
                e.identity_weight(),
                1.0 - eps_enc
            )));
        }
        Ok(e)
    }

    pub fn none(n: usize) -> Self {
        EncodingNoise {
            eps_enc: 0.0,
            pauli_weights: vec![(PauliString::identity(n), 1.0)],
        }
    }

    pub fn depolarizing(n: usize, q: f64) -> Result<Self> {
        check_probability(q)?;
        Self::new(q, depolarizing_weights(n, q))
    }

    /// Identity weight `w` with the remaining `1 − w` spread over the other
    /// Paulis in proportion to `tail`.
    pub fn with_identity_weight(n: usize, w: f64, tail: &[f64]) -> Result<Self> {
        check_probability(w)?;
        let others: Vec<PauliString> = PauliString::unsigned(n).skip(1).collect();
        if tail.len() != others.len() {
            return Err(Error::Length {
                expected: others.len(),
                got: tail.len(),
            });
        }
        let total: f64 = tail.iter().sum();
        let mut weights = vec![(PauliString::identity(n), w)];
        for (p, t) in others.into_iter().zip(tail) {
            let share = if total > 0.0 { (1.0 - w) * t / total } else { 0.0 };
            weights.push((p, share));
        }
        if total <= 0.0 {
            weights[0].1 = 1.0;
        }
        Self::new(1.0 - w, weights)
    }

    pub fn identity_weight(&self) -> f64 {
        self.pauli_weights
            .iter()
            .filter(|(p, _)| p.is_identity_up_to_sign())
            .map(|w| w.1)
            .sum()
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let d = rho.dim();
        let mut out = Mat::zeros(d, d);
        for (p, w) in &self.pauli_weights {
            if p.n != rho.num_qubits() {
                return Err(Error::Length {
                    expected: rho.num_qubits(),
                    got: p.n,
                });
            }
            out.add_scaled(&p.conjugate_mat(rho.matrix()), C64::new(*w, 0.0));
        }
        DensityMatrix::new(out.hermitian_part())
    }
}

pub fn apply_encoding_noise(enc: &EncodingNoise, rho: &DensityMatrix) -> Result<DensityMatrix> {
    enc.apply(rho)
}

/// How to average over the Pauli group when twirling a channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PauliTwirlMode {
    Exact,
    Sampled { samples: usize, seed: u64 },
}

/// Maximum register size for exact Pauli twirling (`4^n` Paulis).
pub const MAX_EXACT_PAULI_TWIRL: usize = 3;

/// `E_G G† Φ(G ρ G†) G` over unsigned Paulis `G`.
pub fn pauli_twirl_channel(ch: &QuantumChannel, mode: PauliTwirlMode) -> Result<QuantumChannel> {
    let n = ch.in_qubits();
    if ch.out_qubits() != n {
        return Err(Error::Dimension("Pauli twirl needs a square channel".into()));
    }
    let paulis: Vec<PauliString> = match mode {
        PauliTwirlMode::Exact => {
            if n > MAX_EXACT_PAULI_TWIRL {
                return Err(Error::SizeCap(format!(
                    "exact Pauli twirl limited to n <= {MAX_EXACT_PAULI_TWIRL}"
                )));
            }
            PauliString::unsigned(n).collect()
        }
        PauliTwirlMode::Sampled { samples, seed } => {
            check_register(n)?;
            let mut rng = crate::rng::stream(seed, 0);
            let mask = (1u64 << n) - 1;
            (0..samples)
                .map(|_| PauliString::new(n, false, rng.random::<u64>() & mask, rng.random::<u64>() & mask))
                .collect()
        }
    };
    if paulis.is_empty() {
        return Err(Error::Precondition("no Pauli samples".into()));
    }
    let w = 1.0 / (paulis.len() as f64).sqrt();
    let mut kraus = Vec::with_capacity(paulis.len() * ch.kraus().len());
    for g in &paulis {
        let gm = g.matrix();
        for k in ch.kraus() {
            kraus.push(gm.matmul(k).matmul(&gm).scale_real(w));
        }
    }
    QuantumChannel::new(n, n, kraus)
}

/// Process matrix in the unsigned Pauli basis:
/// `χ_{PQ} = Σ_k tr(P K_k) tr(Q K_k)* / d²`.
pub fn chi_matrix(ch: &QuantumChannel) -> Result<Mat> {
    let n = ch.in_qubits();
    if n > MAX_EXACT_PAULI_TWIRL {
        return Err(Error::SizeCap("chi matrix limited to n <= 3".into()));
    }
    let paulis: Vec<PauliString> = PauliString::unsigned(n).collect();
    let d2 = (1u64 << (2 * n)) as f64;
    let coeffs: Vec<Vec<C64>> = ch
        .kraus()
        .iter()
        .map(|k| paulis.iter().map(|p| p.matrix().matmul(k).trace()).collect())
        .collect();
    let m = paulis.len();
    Ok(Mat::from_fn(m, m, |i, j| {
        coeffs.iter().map(|c| c[i] * c[j].conj()).sum::<C64>() / d2
    }))
}

/// Diagonal of the process matrix, `χ_P = Σ_k |tr(P K_k)|²/d²`.
pub fn pauli_weights(ch: &QuantumChannel) -> Result<Vec<(PauliString, f64)>> {
    let chi = chi_matrix(ch)?;
    Ok(PauliString::unsigned(ch.in_qubits())
        .enumerate()
        .map(|(i, p)| (p, chi[(i, i)].re))
        .collect())
}

/// Identity weight `χ_II`.
pub fn identity_weight(ch: &QuantumChannel) -> f64 {
    let d = (1u64 << ch.in_qubits()) as f64;
    ch.kraus().iter().map(|k| k.trace().norm_sqr()).sum::<f64>() / (d * d)
}

/// Largest off-diagonal magnitude of the process matrix.
pub fn chi_off_diagonal(ch: &QuantumChannel) -> Result<f64> {
    let chi = chi_matrix(ch)?;
    let m = chi.rows();
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                worst = worst.max(chi[(i, j)].norm());
            }
        }
    }
    Ok(worst)
}
