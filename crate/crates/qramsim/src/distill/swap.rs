//! The swap test and its streaming iteration.

use rand::Rng;

use super::{CopySource, DistillReport, SourceState};
use crate::error::Result;
use crate::qcore::{DensityMatrix, C64};

/// One swap test on `ρ ⊗ ρ`: pass probability `(1 + Tr ρ²)/2` and the
/// post-selected state `(ρ + ρ²)/(1 + Tr ρ²)`.
pub fn swap_test_step(rho: &DensityMatrix) -> (f64, DensityMatrix) {
    let pur = rho.purity();
    let m = rho.matrix();
    let mut out = m.matmul(m);
    out.add_scaled(m, C64::new(1.0, 0.0));
    let out = out.scale_real(1.0 / (1.0 + pur)).hermitian_part();
    ((1.0 + pur) / 2.0, DensityMatrix::from_mat_unchecked(out))
}

/// [`swap_test_step`] on eigenvalue weights.
pub fn swap_test_weights(w: &[f64]) -> (f64, Vec<f64>) {
    let pur: f64 = w.iter().map(|x| x * x).sum();
    let out = w.iter().map(|x| (x + x * x) / (1.0 + pur)).collect();
    ((1.0 + pur) / 2.0, out)
}

fn step(state: &SourceState) -> (f64, SourceState) {
    match state {
        SourceState::Dense(r) => {
            let (p, out) = swap_test_step(r);
            (p, SourceState::Dense(out))
        }
        SourceState::Spectral(w) => {
            let (p, out) = swap_test_weights(w);
            (p, SourceState::Spectral(out))
        }
    }
}

/// Streaming `k`-level swap test.
///
/// Level-`l` states `ρ_l` are all identical, so a register slot per level
/// holds at most one of them; a fresh copy enters at level 0 and climbs while
/// it finds a partner, and a failed test discards both inputs. Storage never
/// exceeds `k + 1` registers (the slots plus the climbing state).
pub fn iterated_swap_test<R: Rng + ?Sized>(
    src: &mut CopySource,
    k: usize,
    rng: &mut R,
) -> Result<DistillReport> {
    let mut levels = vec![src.state().clone()];
    let mut pass = Vec::with_capacity(k);
    for l in 0..k {
        let (p, next) = step(&levels[l]);
        pass.push(p);
        levels.push(next);
    }

    let mut report = DistillReport::new("swap_test", &[("levels", k as f64)]);
    let start = src.copies();
    let mut slots = vec![false; k];
    let mut peak = 0usize;
    'outer: loop {
        if src.draw().is_err() {
            report.exhausted = true;
            break;
        }
        let mut level = 0;
        loop {
            let stored = slots.iter().filter(|&&s| s).count();
            peak = peak.max(stored + 1);
            if level == k {
                report.success = true;
                break 'outer;
            }
            if !slots[level] {
                slots[level] = true;
                break;
            }
            slots[level] = false;
            report.steps += 1;
            if rng.random::<f64>() < pass[level] {
                level += 1;
            } else {
                break;
            }
        }
    }
    report.copies = src.copies() - start;
    report.params.insert("peak_registers".into(), peak as f64);
    if report.success {
        let out = levels.pop().unwrap();
        report.overlap = src.overlap(&out);
        report.output = Some(out);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{hadamard_on, random_density, Mat};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Control qubit (high) and two copies: H, controlled swap, H, keep |0⟩.
    fn swap_test_circuit(rho: &DensityMatrix) -> (f64, Mat) {
        let d = rho.dim();
        let q = rho.num_qubits();
        let joint = rho.tensor(rho).unwrap();
        let zero = DensityMatrix::from_mat_unchecked(Mat::from_real_diag(&[1.0, 0.0]));
        let full = joint.tensor(&zero).unwrap();
        let h = hadamard_on(2 * q + 1, &[2 * q]);
        let cswap = Mat::from_fn(2 * d * d, 2 * d * d, |r, c| {
            let (a, b, ctl) = (c % d, (c / d) % d, c / (d * d));
            let target = if ctl == 1 { b + d * a + d * d } else { c };
            C64::new((r == target) as u8 as f64, 0.0)
        });
        let u = h.matmul(&cswap).matmul(&h);
        let out = full.matrix().conjugate_by(&u);
        let dd = d * d;
        let block = Mat::from_fn(dd, dd, |r, c| out[(r, c)]);
        let p = block.trace().re;
        let reduced = Mat::from_fn(d, d, |i, j| (0..d).map(|k| block[(i + d * k, j + d * k)]).sum());
        (p, reduced.scale_real(1.0 / p))
    }

    #[test]
    fn closed_forms_on_examples() {
        let pure = DensityMatrix::from_mat_unchecked(Mat::from_real_diag(&[1.0, 0.0]));
        let (p, out) = swap_test_step(&pure);
        assert_eq!(p, 1.0);
        assert!(out.matrix().max_abs_diff(pure.matrix()) < 1e-15);

        let mixed = DensityMatrix::maximally_mixed(1);
        let (p, out) = swap_test_step(&mixed);
        assert!((p - 0.75).abs() < 1e-15);
        assert!(out.matrix().max_abs_diff(mixed.matrix()) < 1e-15);

        let rho = DensityMatrix::from_mat_unchecked(Mat::from_real_diag(&[0.9, 0.1]));
        let (p, out) = swap_test_step(&rho);
        assert!((p - 0.91).abs() < 1e-15);
        let expect = Mat::from_real_diag(&[0.9 * 1.9 / 1.82, 0.1 * 1.1 / 1.82]);
        assert!(out.matrix().max_abs_diff(&expect) < 1e-15);
        let (pc, oc) = swap_test_circuit(&rho);
        assert!((pc - 0.91).abs() < 1e-12 && oc.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn closed_form_matches_circuit_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for q in 1..=2 {
            let rho = random_density(q, &mut rng);
            let (p, out) = swap_test_step(&rho);
            let (pc, oc) = swap_test_circuit(&rho);
            assert!((p - pc).abs() < 1e-12);
            assert!(out.matrix().max_abs_diff(&oc) < 1e-12);
            assert!(out.commutator_norm(&rho) < 1e-12);
            assert!(out.principal_eig().0 > rho.principal_eig().0);
        }
    }

    #[test]
    fn zero_levels_returns_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut src = CopySource::spectral(vec![0.6, 0.4]).unwrap();
        let r = iterated_swap_test(&mut src, 0, &mut rng).unwrap();
        assert!(r.success);
        assert_eq!(r.copies, 1);
        assert_eq!(r.steps, 0);
        assert_eq!(r.overlap, 0.6);
    }

    #[test]
    fn storage_and_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 1..6 {
            let mut src = CopySource::spectral(vec![0.7, 0.2, 0.1]).unwrap();
            let r = iterated_swap_test(&mut src, k, &mut rng).unwrap();
            assert!(r.success);
            assert!(r.params["peak_registers"] <= (k + 1) as f64);
            assert!(r.copies >= 1 << k);
        }
        let mut src = CopySource::spectral(vec![0.7, 0.3]).unwrap().with_budget(10);
        let r = iterated_swap_test(&mut src, 6, &mut rng).unwrap();
        assert!(!r.success && r.exhausted);
        assert_eq!(r.copies, 10);
    }

    #[test]
    fn dense_and_spectral_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(2, &mut rng);
        let mut dense = CopySource::dense(rho.clone());
        let mut spec = CopySource::spectral(dense.spectrum().to_vec()).unwrap();
        let a = iterated_swap_test(&mut dense, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = iterated_swap_test(&mut spec, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.copies, b.copies);
        assert!((a.overlap - b.overlap).abs() < 1e-10);
        assert!(a.output_density().unwrap().commutator_norm(&rho) < 1e-10);
    }
}
