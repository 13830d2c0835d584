//! The depth-`2n+1` update-rule circuit over classical bit cells.
//!
//! Layer counting: one layer copies every `g(x)` into its scratch cell, `n−1`
//! layers fan each `m_i` out to `2^{n−1}` copies by doubling, `n` layers of
//! `m_i`-controlled swaps move scratch contents along hypercube edges, and one
//! layer XORs the scratch cells back into the data cells.
//!
//! Layout: cells sit on a line grouped by address. The block of address `x`
//! holds the data cell `g(x)`, its scratch cell, then one copy of `m_i` for
//! every `i` with `x_i = 0` (the copy that controls the swap of the pair
//! `{x, x ⊕ e_i}`). Block 0 therefore holds the `m` input cells.

use serde::Serialize;

use crate::boolfn::DataTable;
use crate::error::{Error, Result};

/// Largest address width for circuit construction.
pub const MAX_CIRCUIT_BITS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    Copy { src: usize, dst: usize },
    XorInto { src: usize, dst: usize },
    /// Swap `a` and `b` when `ctrl` is set.
    CSwap { ctrl: usize, a: usize, b: usize },
    Negate { cell: usize },
}

impl Gate {
    pub fn cells(&self) -> Vec<usize> {
        match *self {
            Gate::Copy { src, dst } | Gate::XorInto { src, dst } => vec![src, dst],
            Gate::CSwap { ctrl, a, b } => vec![ctrl, a, b],
            Gate::Negate { cell } => vec![cell],
        }
    }

    fn apply(&self, s: &mut [bool]) {
        match *self {
            Gate::Copy { src, dst } => s[dst] = s[src],
            Gate::XorInto { src, dst } => s[dst] ^= s[src],
            Gate::CSwap { ctrl, a, b } => {
                if s[ctrl] {
                    s.swap(a, b)
                }
            }
            Gate::Negate { cell } => s[cell] = !s[cell],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalCircuit {
    pub n: usize,
    pub width: usize,
    pub layers: Vec<Vec<Gate>>,
    /// Position of each cell on the line.
    pub positions: Vec<usize>,
    /// Layers per construction step.
    pub step_layers: Vec<usize>,
    pub data_cells: Vec<usize>,
    pub scratch_cells: Vec<usize>,
    /// `m_copies[i][k]` controls the swap of pair `k` along axis `i`;
    /// `m_copies[i][0]` is the input cell of `m_i`.
    pub m_copies: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CircuitMetrics {
    pub depth: usize,
    pub width: usize,
    /// Sum over gates of the largest distance between the gate's cells.
    pub total_wire_length_1d: u64,
}

/// Insert a zero bit at position `i` of `k`.
fn insert_zero(k: usize, i: usize) -> usize {
    let low = k & ((1 << i) - 1);
    ((k >> i) << (i + 1)) | low
}

pub fn build_shallow_ur_circuit(n: usize) -> Result<ClassicalCircuit> {
    if n == 0 || n > MAX_CIRCUIT_BITS {
        return Err(Error::SizeCap(format!("circuit on n = {n}")));
    }
    let size = 1usize << n;
    let half = size / 2;
    let mut data_cells = vec![0; size];
    let mut scratch_cells = vec![0; size];
    let mut m_copies = vec![vec![0; half]; n];
    let mut next = 0;
    for x in 0..size {
        data_cells[x] = next;
        scratch_cells[x] = next + 1;
        next += 2;
        for (i, copies) in m_copies.iter_mut().enumerate() {
            if x >> i & 1 == 0 {
                let k = (x & ((1 << i) - 1)) | ((x >> (i + 1)) << i);
                copies[k] = next;
                next += 1;
            }
        }
    }

    let mut layers = Vec::new();
    layers.push(
        (0..size)
            .map(|x| Gate::Copy {
                src: data_cells[x],
                dst: scratch_cells[x],
            })
            .collect(),
    );
    for level in 1..n {
        let have = 1usize << (level - 1);
        layers.push(
            m_copies
                .iter()
                .flat_map(|c| (0..have).map(move |j| Gate::Copy { src: c[j], dst: c[j + have] }))
                .collect(),
        );
    }
    for (i, copies) in m_copies.iter().enumerate() {
        layers.push(
            (0..half)
                .map(|k| {
                    let x = insert_zero(k, i);
                    Gate::CSwap {
                        ctrl: copies[k],
                        a: scratch_cells[x],
                        b: scratch_cells[x | 1 << i],
                    }
                })
                .collect(),
        );
    }
    layers.push(
        (0..size)
            .map(|x| Gate::XorInto {
                src: scratch_cells[x],
                dst: data_cells[x],
            })
            .collect(),
    );

    let circ = ClassicalCircuit {
        n,
        width: next,
        layers,
        positions: (0..next).collect(),
        step_layers: vec![1, n - 1, n, 1],
        data_cells,
        scratch_cells,
        m_copies,
    };
    circ.validate()?;
    Ok(circ)
}

impl ClassicalCircuit {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Gates in a layer touch disjoint cells, all in range.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![usize::MAX; self.width];
        for (l, layer) in self.layers.iter().enumerate() {
            for g in layer {
                for c in g.cells() {
                    if c >= self.width {
                        return Err(Error::Numerical(format!("cell {c} out of range")));
                    }
                    if seen[c] == l {
                        return Err(Error::Numerical(format!("cell {c} reused in layer {l}")));
                    }
                    seen[c] = l;
                }
            }
        }
        Ok(())
    }

    fn initial_state(&self, g: &DataTable, m: u64) -> Result<Vec<bool>> {
        if g.n() != self.n {
            return Err(Error::Dimension(format!("table n = {}, circuit n = {}", g.n(), self.n)));
        }
        if m >> self.n != 0 {
            return Err(Error::Precondition(format!("m = {m} outside {} bits", self.n)));
        }
        let mut s = vec![false; self.width];
        for (x, &c) in self.data_cells.iter().enumerate() {
            s[c] = g.get(x as u64);
        }
        for (i, copies) in self.m_copies.iter().enumerate() {
            s[copies[0]] = m >> i & 1 == 1;
        }
        Ok(s)
    }

    /// Cell states before the first layer and after every layer.
    pub fn simulate_layers(&self, g: &DataTable, m: u64) -> Result<Vec<Vec<bool>>> {
        let mut s = self.initial_state(g, m)?;
        let mut out = vec![s.clone()];
        for layer in &self.layers {
            layer.iter().for_each(|gate| gate.apply(&mut s));
            out.push(s.clone());
        }
        Ok(out)
    }

    pub fn metrics(&self) -> CircuitMetrics {
        let total = self
            .layers
            .iter()
            .flatten()
            .map(|g| {
                let p: Vec<usize> = g.cells().iter().map(|&c| self.positions[c]).collect();
                (p.iter().max().unwrap() - p.iter().min().unwrap()) as u64
            })
            .sum();
        CircuitMetrics {
            depth: self.depth(),
            width: self.width,
            total_wire_length_1d: total,
        }
    }
}

pub fn simulate_circuit(circ: &ClassicalCircuit, g: &DataTable, m: u64) -> Result<DataTable> {
    let mut s = circ.initial_state(g, m)?;
    for layer in &circ.layers {
        layer.iter().for_each(|gate| gate.apply(&mut s));
    }
    Ok(DataTable::from_fn(circ.n, |x| s[circ.data_cells[x as usize]]))
}

pub fn circuit_metrics(circ: &ClassicalCircuit) -> CircuitMetrics {
    circ.metrics()
}
