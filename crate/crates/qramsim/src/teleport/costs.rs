//! Unit-constant cost estimates. The underlying statements are asymptotic,
//! so these are order-of-magnitude figures, not guarantees.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostEstimate {
    pub n: usize,
    pub b: usize,
    pub fidelity: f64,
    pub eps: f64,
    /// Resource-state copies, `n(1−F)/F² · (n/ε + 1/F)`.
    pub q: f64,
    /// The `b`-bit version, `(n+b)² Q`.
    pub q_prime: f64,
    /// Non-Clifford gate count, `n²(n+b)/(2ε)`.
    pub nonclifford: f64,
}

pub fn estimate_costs(n: usize, b: usize, fidelity: f64, eps: f64) -> Result<CostEstimate> {
    if !(fidelity > 0.0 && fidelity <= 1.0) {
        return Err(Error::Precondition(format!("F = {fidelity} outside (0, 1]")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Precondition(format!("ε = {eps} outside (0, 1)")));
    }
    let nf = n as f64;
    let q = nf * (1.0 - fidelity) / (fidelity * fidelity) * (nf / eps + 1.0 / fidelity);
    let nb = (n + b) as f64;
    Ok(CostEstimate {
        n,
        b,
        fidelity,
        eps,
        q,
        q_prime: nb * nb * q,
        nonclifford: nf * nf * nb / (2.0 * eps),
    })
}
