//! Fractional swap and one step of LMR density matrix exponentiation.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::qcore::{DensityMatrix, Mat, C64};

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=FRAC_PI_2).contains(&t) {
        return Err(Error::Precondition(format!("t = {t} outside [0, π/2]")));
    }
    Ok(())
}

/// `exp(−i𝕊t) = cos(t) I − i sin(t) 𝕊` on two `d`-level systems
/// (first system on the low index).
pub fn fractional_swap_unitary(t: f64, d: usize) -> Result<Mat> {
    check_t(t)?;
    let (s, c) = t.sin_cos();
    Ok(Mat::from_fn(d * d, d * d, |r, col| {
        let swapped = col / d + d * (col % d);
        let mut v = C64::new(0.0, 0.0);
        if r == col {
            v += c;
        }
        if r == swapped {
            v += C64::new(0.0, -s);
        }
        v
    }))
}

/// `(θ₊, θ₋)` of the three-controlled-swap construction.
pub fn theta_angles(t: f64) -> Result<(f64, f64)> {
    check_t(t)?;
    let (s, c) = t.sin_cos();
    let a = ((c - s) / 2.0).acos();
    let b = ((c + s) / 2.0).acos();
    Ok(((a + b) / 2.0, (a - b) / 2.0))
}

/// A gate of the block-encoding circuit: a single-qubit gate on the ancilla,
/// or a swap of the two systems controlled by it.
#[derive(Clone, Debug)]
pub enum BlockGate {
    Ancilla(Mat),
    ControlledSwap,
}

fn pauli(k: char) -> Mat {
    let (z, o, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0));
    match k {
        'X' => Mat::from_vec(2, 2, vec![z, o, o, z]),
        'Y' => Mat::from_vec(2, 2, vec![z, -i, i, z]),
        _ => Mat::from_vec(2, 2, vec![o, z, z, -o]),
    }
}

/// `exp(−iθP)`.
fn rot(p: char, theta: f64) -> Mat {
    let mut m = Mat::identity(2).scale_real(theta.cos());
    m.add_scaled(&pauli(p), C64::new(0.0, -theta.sin()));
    m
}

/// The seven gates in time order. The product `U` satisfies
/// `−U = |0⟩⟨0| ⊗ exp(−i𝕊t) + |1⟩⟨1| ⊗ (i sin(t) I + cos(t) 𝕊)`.
pub fn block_encoding_sequence(t: f64) -> Result<Vec<BlockGate>> {
    let (tp, tm) = theta_angles(t)?;
    let z = pauli('Z');
    let conj = |p: char, th: f64| rot(p, th).matmul(&z).matmul(&rot(p, -th));
    Ok(vec![
        BlockGate::Ancilla(rot('X', tm)),
        BlockGate::ControlledSwap,
        BlockGate::Ancilla(conj('Y', tp)),
        BlockGate::ControlledSwap,
        BlockGate::Ancilla(conj('X', tm)),
        BlockGate::ControlledSwap,
        BlockGate::Ancilla(rot('Y', -tp)),
    ])
}

/// Dense product of [`block_encoding_sequence`] with the ancilla as the most
/// significant qubit above two `d`-level systems.
pub fn block_encoding_unitary(t: f64, d: usize) -> Result<Mat> {
    let dd = d * d;
    let cswap = Mat::from_fn(2 * dd, 2 * dd, |r, c| {
        let target = if c >= dd {
            let x = c - dd;
            dd + x / d + d * (x % d)
        } else {
            c
        };
        C64::new((r == target) as u8 as f64, 0.0)
    });
    let mut u = Mat::identity(2 * dd);
    for g in block_encoding_sequence(t)? {
        let m = match g {
            BlockGate::Ancilla(a) => Mat::identity(dd).tensor(&a),
            BlockGate::ControlledSwap => cswap.clone(),
        };
        u = m.matmul(&u);
    }
    Ok(u)
}

/// `Tr_{S₁} ς` for `ς` on `A ⊗ S₁` (S₁ on the low index).
fn trace_low(sigma: &Mat, ds: usize) -> Mat {
    let da = sigma.rows() / ds;
    Mat::from_fn(da, da, |a, b| {
        (0..ds).map(|s| sigma[(s + ds * a, s + ds * b)]).sum()
    })
}

fn check_dims(sigma: &Mat, rho: &Mat) -> Result<usize> {
    let ds = rho.rows();
    if ds == 0 || !sigma.rows().is_multiple_of(ds) {
        return Err(Error::Dimension(format!(
            "state of dimension {} does not contain a {ds}-level system",
            sigma.rows()
        )));
    }
    Ok(sigma.rows() / ds)
}

pub(crate) fn lmr_step_mat(sigma: &Mat, rho: &Mat, t: f64) -> Mat {
    let ds = rho.rows();
    let da = sigma.rows() / ds;
    let (s, c) = t.sin_cos();
    let lifted = rho.tensor(&Mat::identity(da));
    let left = sigma.matmul(&lifted);
    let right = lifted.matmul(sigma);
    let mut out = sigma.scale_real(c * c);
    out.add_scaled(&left, C64::new(0.0, c * s));
    out.add_scaled(&right, C64::new(0.0, -c * s));
    out.add_scaled(&rho.tensor(&trace_low(sigma, ds)), C64::new(s * s, 0.0));
    out
}

/// One LMR step: fractional swap of `S₁` (the low part of `ς`'s register,
/// same dimension as `ϱ`) with a fresh `ϱ` on `S₂`, then discard `S₂`.
/// Evaluated as the four-term closed form
/// `cos²t ς + i cos t sin t ς(I⊗ϱ) − i cos t sin t (I⊗ϱ)ς + sin²t Tr_{S₁}[ς]⊗ϱ`.
pub fn lmr_step(sigma: &DensityMatrix, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    check_t(t)?;
    check_dims(sigma.matrix(), rho.matrix())?;
    DensityMatrix::new(lmr_step_mat(sigma.matrix(), rho.matrix(), t).hermitian_part())
}

/// [`lmr_step`] by explicit simulation: `ς ⊗ ϱ`, the fractional swap on
/// `S₁S₂`, then the partial trace over `S₂`. Only for small dimensions.
pub fn lmr_step_circuit(sigma: &DensityMatrix, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    check_t(t)?;
    let da = check_dims(sigma.matrix(), rho.matrix())?;
    let ds = rho.dim();
    let (s, c) = t.sin_cos();
    let n = ds * da * ds;
    // Index s1 + ds·a + ds·da·s2.
    let u = Mat::from_fn(n, n, |r, col| {
        let (s1, a, s2) = (col % ds, (col / ds) % da, col / (ds * da));
        let swapped = s2 + ds * a + ds * da * s1;
        let mut v = C64::new(0.0, 0.0);
        if r == col {
            v += c;
        }
        if r == swapped {
            v += C64::new(0.0, -s);
        }
        v
    });
    let joint = sigma.matrix().tensor(rho.matrix()).conjugate_by(&u);
    let m = ds * da;
    let out = Mat::from_fn(m, m, |i, j| (0..ds).map(|k| joint[(i + m * k, j + m * k)]).sum());
    DensityMatrix::new(out.hermitian_part())
}
