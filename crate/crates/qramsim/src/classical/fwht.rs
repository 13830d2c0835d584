//! Integer Walsh–Hadamard transforms and the reductions between them and the
//! update rule.
//!
//! Scale: `fwht` applies the unnormalized product `H^{(n)} ⋯ H^{(1)}`, which
//! is `2^{n/2}` times the orthonormal transform, so `fwht ∘ fwht = 2^n · I`
//! and everything stays in exact integer arithmetic.

use rayon::prelude::*;
use serde::Serialize;

use super::UrEngine;
use crate::boolfn::DataTable;
use crate::error::{Error, Result};

pub const DEFAULT_WIDTH: u32 = 32;

/// Signed integers of at most `width` bits (two's complement), one per
/// address.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntVector {
    n: usize,
    width: u32,
    values: Vec<i64>,
}

fn fits(v: i64, width: u32) -> bool {
    width >= 64 || (-(1i64 << (width - 1))..(1i64 << (width - 1))).contains(&v)
}

impl IntVector {
    pub fn new(values: Vec<i64>, width: u32) -> Result<Self> {
        if !values.len().is_power_of_two() {
            return Err(Error::Dimension(format!("length {} is not a power of two", values.len())));
        }
        if !(2..=64).contains(&width) {
            return Err(Error::Precondition(format!("width {width} outside 2..=64")));
        }
        if let Some(v) = values.iter().find(|&&v| !fits(v, width)) {
            return Err(Error::Overflow(format!("{v} does not fit {width} bits")));
        }
        Ok(IntVector {
            n: values.len().trailing_zeros() as usize,
            width,
            values,
        })
    }

    pub fn from_table(g: &DataTable, width: u32) -> Result<Self> {
        IntVector::new(g.bits().into_iter().map(i64::from).collect(), width)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    /// Bit `j` of every entry, as a table over the addresses.
    pub fn bit_plane(&self, j: u32) -> DataTable {
        DataTable::from_fn(self.n, |x| self.values[x as usize] >> j & 1 == 1)
    }

    /// Reassemble sign-extended entries from `width` bit planes.
    fn from_planes(planes: &[DataTable], width: u32) -> Vec<i64> {
        let n = planes[0].n();
        (0..1u64 << n)
            .map(|x| {
                let raw = planes
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (j, p)| acc | (p.get(x) as u64) << j);
                ((raw << (64 - width)) as i64) >> (64 - width)
            })
            .collect()
    }
}

/// `(H^{(i)} v)_x = v(x ⊕ e_i) + (−1)^{x_i} v(x)`.
pub fn apply_factor(v: &IntVector, i: usize) -> Result<IntVector> {
    if i >= v.n {
        return Err(Error::Precondition(format!("axis {i} on n = {}", v.n)));
    }
    let mut out = v.values.clone();
    butterfly(&mut out, i, v.width)?;
    Ok(IntVector { values: out, ..*v })
}

/// Below this length the butterflies run serially; thread dispatch would
/// dominate.
const PAR_MIN_LEN: usize = 1 << 14;

fn butterfly(data: &mut [i64], i: usize, width: u32) -> Result<()> {
    let h = 1usize << i;
    let pass = |block: &mut [i64]| {
        let (lo, hi) = block.split_at_mut(h);
        for (a, b) in lo.iter_mut().zip(hi) {
            let (s, d) = match (a.checked_add(*b), a.checked_sub(*b)) {
                (Some(s), Some(d)) if fits(s, width) && fits(d, width) => (s, d),
                _ => return Err(Error::Overflow(format!("butterfly exceeds {width} bits"))),
            };
            *a = s;
            *b = d;
        }
        Ok(())
    };
    if data.len() < PAR_MIN_LEN {
        data.chunks_mut(2 * h).try_for_each(pass)
    } else {
        data.par_chunks_mut(2 * h).try_for_each(pass)
    }
}

/// Unnormalized fast transform `H^{(n)} ⋯ H^{(1)} v`.
pub fn fwht(v: &IntVector) -> Result<IntVector> {
    let mut out = v.values.clone();
    for i in 0..v.n {
        butterfly(&mut out, i, v.width)?;
    }
    Ok(IntVector { values: out, ..*v })
}

/// `h = H M^{(m)} H g / 2^n mod 2`, with `M^{(m)}_{xx} = 2` when `m·x = 0`
/// and 0 otherwise.
pub fn ur_via_fwht(g: &DataTable, m: u64) -> Result<DataTable> {
    let n = g.n();
    if m >> n != 0 {
        return Err(Error::Precondition(format!("m = {m} outside {n} bits")));
    }
    // |entries| ≤ 2^{2n+1} along the way.
    let width = (2 * n as u32 + 3).min(64);
    let mut v = fwht(&IntVector::from_table(g, width)?)?;
    for (x, e) in v.values.iter_mut().enumerate() {
        *e *= if (m & x as u64).count_ones().is_multiple_of(2) { 2 } else { 0 };
    }
    let h = fwht(&v)?;
    let scale = 1i64 << n;
    h.values.iter().enumerate().try_for_each(|(x, &e)| {
        if e % scale != 0 {
            return Err(Error::Numerical(format!("entry {x} not divisible by 2^n")));
        }
        Ok(())
    })?;
    Ok(DataTable::from_fn(n, |x| (h.values[x as usize] / scale).rem_euclid(2) == 1))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FwhtViaUr {
    pub output: IntVector,
    pub ur_calls: u64,
}

/// The fast transform built from update-rule calls: per axis `i`, each of the
/// `w` bit planes goes through `UR(·, e_i)`, a local XOR with the kept copy
/// turns that into the swapped plane `v_j(x ⊕ e_i)`, then each address
/// negates its own entry when `x_i = 1` and adds it to the swapped one.
pub fn fwht_via_ur(v: &IntVector, engine: &dyn UrEngine) -> Result<FwhtViaUr> {
    let mut cur = v.values.clone();
    let mut calls = 0;
    for i in 0..v.n {
        let e_i = 1u64 << i;
        let snapshot = IntVector { values: cur.clone(), ..*v };
        let swapped_planes = (0..v.width)
            .map(|j| {
                let plane = snapshot.bit_plane(j);
                calls += 1;
                engine.update(&plane, e_i)?.xor(&plane)
            })
            .collect::<Result<Vec<_>>>()?;
        let swapped = IntVector::from_planes(&swapped_planes, v.width);
        for (x, (c, s)) in cur.iter_mut().zip(swapped).enumerate() {
            let own = if x >> i & 1 == 1 { c.checked_neg() } else { Some(*c) };
            *c = own
                .and_then(|o| s.checked_add(o))
                .filter(|&r| fits(r, v.width))
                .ok_or_else(|| Error::Overflow(format!("axis {i} exceeds {} bits", v.width)))?;
        }
    }
    Ok(FwhtViaUr {
        output: IntVector { values: cur, ..*v },
        ur_calls: calls,
    })
}
