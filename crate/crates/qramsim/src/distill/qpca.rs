//! Principal-component filters built from controlled density matrix
//! exponentiation: the one-shot phase test and the iterated, restarting
//! phase-estimation filter.

use std::f64::consts::PI;

use rand::Rng;

use super::lmr::lmr_step_mat;
use super::{CopySource, DistillReport, SourceState};
use crate::error::{Error, Result};
use crate::qcore::{DensityMatrix, Mat, C64};

/// Largest dense work register for the one-shot filter (control qubit plus
/// a `d`-level work system).
const MAX_DENSE_DIM: usize = 64;

/// `(r, t)` with `r = ⌈3π²(1−γ)/(2γ³ε)⌉` and `t = π/(2rγ)`.
pub fn simple_qpca_parameters(gamma: f64, eps: f64) -> Result<(u64, f64)> {
    if !(gamma > 0.0 && gamma < 1.0 && eps > 0.0 && eps < 1.0) {
        return Err(Error::Precondition(format!("γ = {gamma}, ε = {eps} must lie in (0, 1)")));
    }
    let r = (3.0 * PI * PI * (1.0 - gamma) / (2.0 * gamma.powi(3) * eps)).ceil() as u64;
    Ok((r, PI / (2.0 * r as f64 * gamma)))
}

/// Blocks `(σ₀₀, σ₀₁, σ₁₁)` of the control qubit for each eigencomponent
/// after `k` LMR steps of size `t`, starting from `|+⟩⟨+| ⊗ Σ_j w_j|ψ_j⟩⟨ψ_j|`
/// with fresh copies `|1⟩⟨1| ⊗ ρ_in`. Per step
/// `σ₀₀ ← c²σ₀₀`, `σ₀₁ ← (c² + i c s λ_j)σ₀₁`, `σ₁₁ ← c²σ₁₁ + s²λ_j`,
/// which is summed here in closed form.
fn evolve_components(w: &[f64], lambda: &[f64], t: f64, k: u64) -> Vec<(f64, C64, f64)> {
    let (s, c) = t.sin_cos();
    let c2k = (c * c).powf(k as f64);
    w.iter()
        .zip(lambda)
        .map(|(&wj, &lj)| {
            let z = C64::new(c * c, c * s * lj);
            let zk = z.powf(k as f64);
            (c2k * wj / 2.0, zk * (wj / 2.0), c2k * wj / 2.0 + lj * (1.0 - c2k))
        })
        .collect()
}

/// `⟨−|σ_j|−⟩` per component.
fn minus_weights(blocks: &[(f64, C64, f64)]) -> Vec<f64> {
    blocks.iter().map(|(a, b, d)| ((a + d) / 2.0 - b.re).max(0.0)).collect()
}

fn check_simple_preconditions(src: &CopySource, gamma: f64, eps: f64) -> Result<()> {
    let spec = src.spectrum();
    let l1 = spec[0];
    let l2 = spec.get(1).copied().unwrap_or(0.0);
    let tol = 1e-12;
    if l1 < gamma - tol || l1 > 3.0 * gamma + tol {
        return Err(Error::Precondition(format!("λ₁ = {l1} outside [γ, 3γ] for γ = {gamma}")));
    }
    if eps > 1.0 - gamma {
        return Err(Error::Precondition(format!("ε = {eps} exceeds 1 − γ")));
    }
    let bound = gamma * (8.0 * gamma * eps / (3.0 * PI * PI * (1.0 - gamma))).sqrt();
    if l2 > bound + tol {
        return Err(Error::Precondition(format!("λ₂ = {l2} exceeds {bound}")));
    }
    Ok(())
}

/// One-shot filter: `r` controlled-exponentiation steps on `|+⟩ ⊗ ρ_in`,
/// then the control is measured in the `±` basis and `−` is kept. The success
/// probability is exact (no sampling) and the report carries the
/// post-selected state. Dense sources are propagated densely; spectral ones
/// component by component.
pub fn qpca_simple(src: &mut CopySource, gamma: f64, eps: f64) -> Result<DistillReport> {
    let (r, t) = simple_qpca_parameters(gamma, eps)?;
    check_simple_preconditions(src, gamma, eps)?;
    let mut report = DistillReport::new(
        "qpca_simple",
        &[("gamma", gamma), ("eps_dist", eps), ("r", r as f64), ("t", t)],
    );
    let start = src.copies();
    if src.draw_many(r + 1).is_err() {
        report.exhausted = true;
        report.copies = src.copies() - start;
        return Ok(report);
    }
    report.copies = r + 1;
    report.steps = r;

    let (p, out) = match src.state().clone() {
        SourceState::Dense(rho) => {
            let d = rho.dim();
            if 2 * d > MAX_DENSE_DIM {
                return Err(Error::SizeCap(format!(
                    "dense filter on dimension {d}; use a spectral source"
                )));
            }
            let one = Mat::from_real_diag(&[0.0, 1.0]);
            let plus = Mat::from_fn(2, 2, |_, _| C64::new(0.5, 0.0));
            // Control on the low index, work register above it.
            let copy = one.tensor(rho.matrix());
            let mut sigma = plus.tensor(rho.matrix());
            for _ in 0..r {
                sigma = lmr_step_mat(&sigma, &copy, t);
            }
            let work = Mat::from_fn(d, d, |i, j| {
                let e = |a: usize, b: usize| sigma[(a + 2 * i, b + 2 * j)];
                (e(0, 0) - e(0, 1) - e(1, 0) + e(1, 1)) * 0.5
            });
            let p = work.trace().re;
            if p <= 0.0 {
                return Err(Error::Numerical("zero success probability".into()));
            }
            (p, SourceState::Dense(DensityMatrix::new(work.scale_real(1.0 / p).hermitian_part())?))
        }
        SourceState::Spectral(w) => {
            let weights = minus_weights(&evolve_components(&w, &w, t, r));
            let p: f64 = weights.iter().sum();
            if p <= 0.0 {
                return Err(Error::Numerical("zero success probability".into()));
            }
            (p, SourceState::Spectral(weights.iter().map(|x| x / p).collect()))
        }
    };
    report.success = true;
    report.success_probability = Some(p);
    report.overlap = src.overlap(&out);
    report.output = Some(out);
    Ok(report)
}

/// Repeat [`qpca_simple`] until the control is measured in `−`, sampling each
/// attempt's outcome from its exact probability.
pub fn qpca_simple_repeated<R: Rng + ?Sized>(
    src: &mut CopySource,
    gamma: f64,
    eps: f64,
    rng: &mut R,
) -> Result<DistillReport> {
    let start = src.copies();
    let mut report = qpca_simple(src, gamma, eps)?;
    if report.exhausted {
        return Ok(report);
    }
    let p = report.success_probability.unwrap_or(0.0);
    let per_attempt = report.copies;
    let mut attempts = 1u64;
    while rng.random::<f64>() >= p {
        if src.draw_many(per_attempt).is_err() {
            report.exhausted = true;
            report.success = false;
            report.output = None;
            report.overlap = 0.0;
            break;
        }
        attempts += 1;
    }
    report.distiller = "qpca_simple_repeated".into();
    report.copies = src.copies() - start;
    report.steps *= attempts;
    report.params.insert("attempts".into(), attempts as f64);
    Ok(report)
}

/// Parameters of the iterated phase-estimation filter.
#[derive(Clone, Debug, PartialEq)]
pub struct QpcaSchedule {
    pub gamma: f64,
    pub alpha: f64,
    /// Phase-estimation precision `(1−α)γ/2`.
    pub delta: f64,
    /// Accept when the eigenvalue estimate exceeds `(1+α)γ/2`.
    pub threshold: f64,
    /// Evolution time per Hadamard test, `π/(3γ+δ)`.
    pub tau: f64,
    /// Chernoff constant in `R = ⌈c ln(2/ε_i)/δ²⌉`.
    pub chernoff: f64,
    /// `(ζ_i, ε_i)` per iteration, coarse phase first.
    pub iterations: Vec<(f64, f64)>,
    pub coarse: usize,
}

impl QpcaSchedule {
    pub fn new(gamma: f64, alpha: f64, eps: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0 && alpha > 0.0 && alpha < 1.0 && eps > 0.0) {
            return Err(Error::Precondition("γ, α, ε must lie in (0, 1)".into()));
        }
        if eps >= 1.0 - gamma {
            return Err(Error::Precondition(format!("ε = {eps} must be below 1 − γ")));
        }
        let delta = (1.0 - alpha) * gamma / 2.0;
        let mut iterations = Vec::new();
        let mut coarse = 0;
        if gamma < 2.0 / 3.0 {
            coarse = (1.0 / (3.0 * gamma)).log2().ceil().max(0.0) as usize + 1;
            for i in 1..=coarse {
                let z = 2f64.powf((1.0 - i as f64) / 2.0) / 16.0;
                iterations.push((z, z));
            }
        }
        if eps <= 1.0 / 3.0 {
            let l = ((1.0 - gamma) / eps).log2().ceil() as i32;
            for i in 1..=l {
                iterations.push((2f64.powi(-3 - i), 2f64.powi(-4 - l + i)));
            }
        }
        Ok(QpcaSchedule {
            gamma,
            alpha,
            delta,
            threshold: (1.0 + alpha) * gamma / 2.0,
            tau: PI / (3.0 * gamma + delta),
            chernoff: 32.0,
            iterations,
            coarse,
        })
    }

    /// Hadamard tests per basis in an iteration with failure probability `ε_i`.
    pub fn repetitions(&self, eps_i: f64) -> u64 {
        (self.chernoff * (2.0 / eps_i).ln() / (self.delta * self.delta)).ceil() as u64
    }

    /// `(k, t)`: LMR steps per Hadamard test and their size, with
    /// `t ≤ ζ_i/(3T)` and `T = 2Rτ` the iteration's total evolution time.
    pub fn steps(&self, zeta: f64, eps_i: f64) -> (u64, f64) {
        let total = 2.0 * self.repetitions(eps_i) as f64 * self.tau;
        let t_max = zeta / (3.0 * total);
        let k = (self.tau / t_max).ceil() as u64;
        (k, self.tau / k as f64)
    }

    /// Copies consumed by one full pass without restarts.
    pub fn copies_per_pass(&self) -> u64 {
        1 + self
            .iterations
            .iter()
            .map(|&(z, e)| 2 * self.repetitions(e) * self.steps(z, e).0)
            .sum::<u64>()
    }
}

#[derive(Clone, Copy)]
enum Basis {
    X,
    Y,
}

/// One Hadamard test on the work weights `w`: returns the ±1 outcome and
/// updates `w` to the post-measurement weights.
fn hadamard_test<R: Rng + ?Sized>(
    w: &mut [f64],
    lambda: &[f64],
    t: f64,
    k: u64,
    basis: Basis,
    rng: &mut R,
) -> f64 {
    let blocks = evolve_components(w, lambda, t, k);
    let plus: Vec<f64> = blocks
        .iter()
        .map(|(a, b, d)| {
            let off = match basis {
                Basis::X => b.re,
                Basis::Y => -b.im,
            };
            ((a + d) / 2.0 + off).max(0.0)
        })
        .collect();
    let p_plus: f64 = plus.iter().sum();
    let outcome_plus = rng.random::<f64>() < p_plus;
    let norm = if outcome_plus { p_plus } else { 1.0 - p_plus };
    for (j, wj) in w.iter_mut().enumerate() {
        let (a, _, d) = blocks[j];
        let v = if outcome_plus { plus[j] } else { (a + d - plus[j]).max(0.0) };
        *wj = v / norm;
    }
    if outcome_plus {
        1.0
    } else {
        -1.0
    }
}

/// Iterated filter: each iteration estimates the work register's eigenvalue
/// from `R` Hadamard tests in each of the `X` and `Y` bases at time `τ`
/// (`⟨X⟩ = cos λτ`, `⟨Y⟩ = −sin λτ`) and keeps the state only if the estimate
/// clears the threshold; any rejection restarts from a fresh copy.
///
/// The work register stays diagonal in the eigenbasis of `ρ_in`, so the run is
/// carried out on eigenvalue weights even for dense sources; the output is
/// mapped back to a dense state in that case.
pub fn qpca_recursive<R: Rng + ?Sized>(
    src: &mut CopySource,
    gamma: f64,
    alpha: f64,
    eps: f64,
    rng: &mut R,
) -> Result<DistillReport> {
    let sched = QpcaSchedule::new(gamma, alpha, eps)?;
    let spec = src.spectrum();
    if spec[0] < gamma - 1e-12 {
        return Err(Error::Precondition(format!("λ₁ = {} below γ = {gamma}", spec[0])));
    }
    if spec.get(1).copied().unwrap_or(0.0) > alpha * gamma + 1e-12 {
        return Err(Error::Precondition(format!("λ₂ = {} above αγ", spec[1])));
    }
    let lambda = src.eigen_weights();
    let top = src.principal_index();
    let mut report = DistillReport::new(
        "qpca_recursive",
        &[
            ("gamma", gamma),
            ("alpha", alpha),
            ("eps_dist", eps),
            ("delta", sched.delta),
            ("tau", sched.tau),
            ("iterations", sched.iterations.len() as f64),
        ],
    );
    let start = src.copies();
    let mut restarts = 0u64;
    let w = 'attempt: loop {
        if src.draw_many(1).is_err() {
            report.exhausted = true;
            break None;
        }
        let mut w = lambda.clone();
        for &(zeta, eps_i) in &sched.iterations {
            let reps = sched.repetitions(eps_i);
            let (k, t) = sched.steps(zeta, eps_i);
            let (mut sx, mut sy) = (0.0, 0.0);
            for _ in 0..reps {
                for basis in [Basis::X, Basis::Y] {
                    if src.draw_many(k).is_err() {
                        report.exhausted = true;
                        break 'attempt None;
                    }
                    report.steps += k;
                    let o = hadamard_test(&mut w, &lambda, t, k, basis, rng);
                    match basis {
                        Basis::X => sx += o,
                        Basis::Y => sy += o,
                    }
                }
            }
            let mut phase = (-sy / reps as f64).atan2(sx / reps as f64);
            if phase < -PI / 2.0 {
                phase += 2.0 * PI;
            }
            if phase / sched.tau <= sched.threshold {
                restarts += 1;
                continue 'attempt;
            }
        }
        break Some(w);
    };
    report.copies = src.copies() - start;
    report.params.insert("restarts".into(), restarts as f64);
    if let Some(w) = w {
        let out = src.state_from_weights(w.clone())?;
        report.overlap = w[top];
        report.success = true;
        report.output = Some(out);
    }
    Ok(report)
}
