//! Classical update-rule engines and the constructions relating the update
//! rule to shallow circuits and the Walsh–Hadamard transform.

mod circuit;
mod fwht;

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

pub use circuit::{
    build_shallow_ur_circuit, circuit_metrics, simulate_circuit, CircuitMetrics, ClassicalCircuit,
    Gate, MAX_CIRCUIT_BITS,
};
pub use fwht::{apply_factor, fwht, fwht_via_ur, ur_via_fwht, FwhtViaUr, IntVector, DEFAULT_WIDTH};

use crate::boolfn::{update_rule, DataTable};
use crate::error::{Error, Result};
use crate::rng::stream;

/// Reference update rule: one lookup of `g(x)` and `g(x ⊕ m)` per address.
pub fn ur_naive(g: &DataTable, m: u64) -> Result<DataTable> {
    let n = g.n();
    if m >> n != 0 {
        return Err(Error::Precondition(format!("m = {m} outside {n} bits")));
    }
    let len = 1u64 << n;
    let words = (0..len.div_ceil(64))
        .map(|w| {
            (0..64.min(len))
                .map(|b| w * 64 + b)
                .fold(0u64, |acc, x| acc | ((g.get(x) ^ g.get(x ^ m)) as u64) << (x % 64))
        })
        .collect();
    DataTable::from_words(n, words)
}

/// Anything that can apply `UR(g, m)`.
pub trait UrEngine: Sync {
    fn name(&self) -> &'static str;
    fn update(&self, g: &DataTable, m: u64) -> Result<DataTable>;
}

pub struct NaiveEngine;
/// Word-shifting implementation from [`crate::boolfn`].
pub struct PackedEngine;
pub struct FwhtEngine;
pub struct CircuitEngine(pub ClassicalCircuit);

impl UrEngine for NaiveEngine {
    fn name(&self) -> &'static str {
        "naive"
    }
    fn update(&self, g: &DataTable, m: u64) -> Result<DataTable> {
        ur_naive(g, m)
    }
}

impl UrEngine for PackedEngine {
    fn name(&self) -> &'static str {
        "packed"
    }
    fn update(&self, g: &DataTable, m: u64) -> Result<DataTable> {
        update_rule(g, m)
    }
}

impl UrEngine for FwhtEngine {
    fn name(&self) -> &'static str {
        "fwht"
    }
    fn update(&self, g: &DataTable, m: u64) -> Result<DataTable> {
        ur_via_fwht(g, m)
    }
}

impl UrEngine for CircuitEngine {
    fn name(&self) -> &'static str {
        "circuit"
    }
    fn update(&self, g: &DataTable, m: u64) -> Result<DataTable> {
        simulate_circuit(&self.0, g, m)
    }
}

/// One row of the classical benchmark.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub engine: String,
    pub wall_ns: u64,
    /// Circuit metrics; only the circuit engine reports them.
    pub depth: Option<usize>,
    pub width: Option<usize>,
    pub wire_length: Option<u64>,
}

pub const BENCH_CSV_HEADER: &str = "n,engine,wall_ns,depth,width,wire_length";

impl BenchRow {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<u64>| v.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.n,
            self.engine,
            self.wall_ns,
            opt(self.depth.map(|d| d as u64)),
            opt(self.width.map(|w| w as u64)),
            opt(self.wire_length)
        )
    }
}

/// Time every engine on one random instance per `n`, checking that all
/// engines agree. The circuit engine is skipped above its size cap.
pub fn bench_classical(ns: &[usize], seed: u64) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for (idx, &n) in ns.iter().enumerate() {
        let mut rng = stream(seed, idx as u64);
        let g = DataTable::random(n, &mut rng);
        let m = rng.random_range(0..1u64 << n);
        let mut engines: Vec<Box<dyn UrEngine>> =
            vec![Box::new(NaiveEngine), Box::new(PackedEngine), Box::new(FwhtEngine)];
        let mut metrics = None;
        if n <= MAX_CIRCUIT_BITS {
            let c = build_shallow_ur_circuit(n)?;
            metrics = Some(c.metrics());
            engines.push(Box::new(CircuitEngine(c)));
        }
        let mut reference: Option<DataTable> = None;
        for e in &engines {
            let t = Instant::now();
            let out = e.update(&g, m)?;
            let wall_ns = t.elapsed().as_nanos() as u64;
            match &reference {
                Some(r) if *r != out => {
                    return Err(Error::Numerical(format!("engine {} disagrees at n = {n}", e.name())))
                }
                None => reference = Some(out),
                _ => {}
            }
            let circ = if e.name() == "circuit" { metrics } else { None };
            rows.push(BenchRow {
                n,
                engine: e.name().into(),
                wall_ns,
                depth: circ.map(|c| c.depth),
                width: circ.map(|c| c.width),
                wire_length: circ.map(|c| c.total_wire_length_1d),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn naive_matches_packed_exhaustively() {
        for n in 1..=4 {
            for w in 0..1u64 << (1 << n) {
                let g = DataTable::from_fn(n, |x| w >> x & 1 == 1);
                for m in 0..1u64 << n {
                    assert_eq!(ur_naive(&g, m).unwrap(), update_rule(&g, m).unwrap());
                }
                assert_eq!(ur_naive(&g, 0).unwrap(), DataTable::zero(n));
            }
        }
    }

    #[test]
    fn naive_spot_checks_at_twenty_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = DataTable::random(20, &mut rng);
        let m = rng.random_range(0..1u64 << 20);
        let h = ur_naive(&g, m).unwrap();
        for _ in 0..1000 {
            let x = rng.random_range(0..1u64 << 20);
            assert_eq!(h.get(x), g.get(x) ^ g.get(x ^ m));
        }
    }

    #[test]
    fn bench_rows() {
        let rows = bench_classical(&[3, 13], 1).unwrap();
        assert_eq!(rows.len(), 4 + 3);
        let circ = rows.iter().find(|r| r.engine == "circuit").unwrap();
        assert_eq!(circ.depth, Some(7));
        assert!(rows[0].csv_line().starts_with("3,naive,"));
    }
}
