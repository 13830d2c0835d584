//! F2 algebra of datasets: truth tables, algebraic normal form, degree, the
//! update rule and the b-bit signed generalization.

use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest address width supported by the classical operations.
pub const MAX_CLASSICAL_BITS: usize = 24;

/// Masks selecting the positions whose bit `k` is 0, for `k < 6`.
const LOW_MASKS: [u64; 6] = [
    0x5555_5555_5555_5555,
    0x3333_3333_3333_3333,
    0x0f0f_0f0f_0f0f_0f0f,
    0x00ff_00ff_00ff_00ff,
    0x0000_ffff_0000_ffff,
    0x0000_0000_ffff_ffff,
];

/// A Boolean function `{0,1}^n -> {0,1}` stored as its packed truth table.
/// Bit `x` of the table is `f(x)`; unused high bits of the last word are zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DataTable {
    n: usize,
    words: Vec<u64>,
}

/// Polynomial degree with a sentinel for the zero function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Degree {
    NegInf,
    Deg(usize),
}

pub const NEG_INF: Degree = Degree::NegInf;

impl Degree {
    /// `true` for constant functions (zero or one).
    pub fn is_constant(self) -> bool {
        matches!(self, Degree::NegInf | Degree::Deg(0))
    }

    pub fn value(self) -> Option<usize> {
        match self {
            Degree::NegInf => None,
            Degree::Deg(d) => Some(d),
        }
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degree::NegInf => write!(f, "-inf"),
            Degree::Deg(d) => write!(f, "{d}"),
        }
    }
}

fn word_count(n: usize) -> usize {
    if n >= 6 {
        1 << (n - 6)
    } else {
        1
    }
}

fn tail_mask(n: usize) -> u64 {
    if n >= 6 {
        u64::MAX
    } else {
        (1u64 << (1 << n)) - 1
    }
}

/// Permute the bits of a word so that bit `y` moves to bit `y ^ m` for the
/// low (in-word) address bits `m < 64`.
#[inline]
fn shift_word(mut w: u64, m: u64) -> u64 {
    for (k, &mask) in LOW_MASKS.iter().enumerate() {
        if m >> k & 1 == 1 {
            let s = 1u32 << k;
            w = ((w & mask) << s) | ((w >> s) & mask);
        }
    }
    w
}

fn check_addr(n: usize, m: u64) -> Result<()> {
    if n < 64 && m >> n != 0 {
        return Err(Error::Length {
            expected: n,
            got: 64 - m.leading_zeros() as usize,
        });
    }
    Ok(())
}

impl DataTable {
    pub fn zero(n: usize) -> Self {
        assert!(n <= MAX_CLASSICAL_BITS, "n = {n} exceeds the classical cap");
        DataTable {
            n,
            words: vec![0; word_count(n)],
        }
    }

    pub fn constant(n: usize, value: bool) -> Self {
        let mut t = Self::zero(n);
        if value {
            t.words.iter_mut().for_each(|w| *w = u64::MAX);
            t.clear_tail();
        }
        t
    }

    pub fn from_fn(n: usize, f: impl Fn(u64) -> bool) -> Self {
        let mut t = Self::zero(n);
        for x in 0..t.len() as u64 {
            if f(x) {
                t.set(x, true);
            }
        }
        t
    }

    /// Build from a bit vector of length exactly `2^n`.
    pub fn from_bits(n: usize, bits: &[bool]) -> Result<Self> {
        if bits.len() != 1 << n {
            return Err(Error::Length {
                expected: 1 << n,
                got: bits.len(),
            });
        }
        Ok(Self::from_fn(n, |x| bits[x as usize]))
    }

    /// Build from packed words; bits beyond `2^n` must be zero.
    pub fn from_words(n: usize, words: Vec<u64>) -> Result<Self> {
        if n > MAX_CLASSICAL_BITS {
            return Err(Error::SizeCap(format!("n = {n} > {MAX_CLASSICAL_BITS}")));
        }
        if words.len() != word_count(n) {
            return Err(Error::Length {
                expected: word_count(n),
                got: words.len(),
            });
        }
        if words[words.len() - 1] & !tail_mask(n) != 0 {
            return Err(Error::Parse("bits set beyond the table length".into()));
        }
        Ok(DataTable { n, words })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut t = Self::zero(n);
        t.words.iter_mut().for_each(|w| *w = rng.random());
        t.clear_tail();
        t
    }

    fn clear_tail(&mut self) {
        let m = tail_mask(self.n);
        if let Some(last) = self.words.last_mut() {
            *last &= m;
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Table length `2^n`.
    pub fn len(&self) -> usize {
        1 << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, x: u64) -> bool {
        self.words[(x >> 6) as usize] >> (x & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: u64, v: bool) {
        let w = &mut self.words[(x >> 6) as usize];
        if v {
            *w |= 1 << (x & 63);
        } else {
            *w &= !(1 << (x & 63));
        }
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.len() as u64).map(|x| self.get(x)).collect()
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn xor(&self, other: &DataTable) -> Result<DataTable> {
        if self.n != other.n {
            return Err(Error::Length {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(DataTable {
            n: self.n,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
        })
    }

    /// `Some(v)` if the function is the constant `v`.
    pub fn constant_value(&self) -> Option<bool> {
        if self.count_ones() == 0 {
            Some(false)
        } else if self.count_ones() == self.len() as u64 {
            Some(true)
        } else {
            None
        }
    }

    /// `(-1)^{f(x)}` for every address.
    pub fn signs(&self) -> Vec<f64> {
        (0..self.len() as u64)
            .map(|x| if self.get(x) { -1.0 } else { 1.0 })
            .collect()
    }

    /// Truth table as a bit string, address 0 first.
    pub fn to_bit_string(&self) -> String {
        self.bits().iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// Parse a bit string written address 0 first.
    pub fn from_bit_string(s: &str) -> Result<Self> {
        let bits: Vec<bool> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(format!("invalid bit '{c}'"))),
            })
            .collect::<Result<_>>()?;
        if !bits.len().is_power_of_two() {
            return Err(Error::Parse("length is not a power of two".into()));
        }
        Self::from_bits(bits.len().trailing_zeros() as usize, &bits)
    }
}

impl fmt::Debug for DataTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n <= 8 {
            write!(f, "DataTable(n={}, {})", self.n, self.to_bit_string())
        } else {
            write!(f, "DataTable(n={}, weight={})", self.n, self.count_ones())
        }
    }
}

/// ANF coefficients `c_e`, indexed by the exponent mask `e`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnfPolynomial {
    pub n: usize,
    pub coefficients: DataTable,
}

impl AnfPolynomial {
    pub fn coefficient(&self, e: u64) -> bool {
        self.coefficients.get(e)
    }

    /// Exponent masks of the monomials present.
    pub fn monomials(&self) -> Vec<u64> {
        (0..self.coefficients.len() as u64)
            .filter(|&e| self.coefficients.get(e))
            .collect()
    }

    pub fn degree(&self) -> Degree {
        self.monomials()
            .into_iter()
            .map(|e| Degree::Deg(e.count_ones() as usize))
            .max()
            .unwrap_or(Degree::NegInf)
    }
}

/// In-place Möbius transform over F2; it is an involution.
fn mobius_in_place(t: &mut DataTable) {
    let n = t.n;
    for k in 0..n.min(6) {
        let mask = LOW_MASKS[k];
        let s = 1u32 << k;
        for w in t.words.iter_mut() {
            *w ^= (*w & mask) << s;
        }
    }
    for k in 6..n {
        let stride = 1usize << (k - 6);
        let len = t.words.len();
        let mut base = 0;
        while base < len {
            for j in base..base + stride {
                let lo = t.words[j];
                t.words[j + stride] ^= lo;
            }
            base += 2 * stride;
        }
    }
}

pub fn anf_from_truth_table(g: &DataTable) -> AnfPolynomial {
    let mut c = g.clone();
    mobius_in_place(&mut c);
    AnfPolynomial { n: g.n, coefficients: c }
}

pub fn truth_table_from_anf(p: &AnfPolynomial) -> DataTable {
    let mut t = p.coefficients.clone();
    mobius_in_place(&mut t);
    t
}

pub fn degree(g: &DataTable) -> Degree {
    anf_from_truth_table(g).degree()
}

/// `g^{⊕m}(x) = g(x ⊕ m)`.
pub fn shift(g: &DataTable, m: u64) -> Result<DataTable> {
    check_addr(g.n, m)?;
    let hi = (m >> 6) as usize;
    let lo = m & 63;
    let words = (0..g.words.len())
        .map(|j| shift_word(g.words[j ^ hi], lo))
        .collect();
    Ok(DataTable { n: g.n, words })
}

/// `UR(g, m) = g ⊕ g^{⊕m}`.
pub fn update_rule(g: &DataTable, m: u64) -> Result<DataTable> {
    let s = shift(g, m)?;
    g.xor(&s)
}

/// A signed table `(f_±, f_data)` with `b` data bits per address.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SignedDataTable {
    pub n: usize,
    pub b: usize,
    pub sign: DataTable,
    /// Data bit-planes; `planes[i]` holds output bit `i + 1` at every address.
    pub planes: Vec<DataTable>,
}

impl SignedDataTable {
    pub fn new(sign: DataTable, planes: Vec<DataTable>) -> Result<Self> {
        let n = sign.n();
        for p in &planes {
            if p.n() != n {
                return Err(Error::Length {
                    expected: n,
                    got: p.n(),
                });
            }
        }
        if n + planes.len() > MAX_CLASSICAL_BITS {
            return Err(Error::SizeCap(format!(
                "n + b = {} > {MAX_CLASSICAL_BITS}",
                n + planes.len()
            )));
        }
        Ok(SignedDataTable {
            n,
            b: planes.len(),
            sign,
            planes,
        })
    }

    /// Build from the values `f_data(x)` packed as `b`-bit integers
    /// (bit `i` holds output bit `i + 1`).
    pub fn from_values(sign: DataTable, b: usize, values: &[u64]) -> Result<Self> {
        let n = sign.n();
        if values.len() != 1 << n {
            return Err(Error::Length {
                expected: 1 << n,
                got: values.len(),
            });
        }
        if b < 64 && values.iter().any(|&v| v >> b != 0) {
            return Err(Error::Precondition(format!("a data value exceeds {b} bits")));
        }
        let planes = (0..b)
            .map(|i| DataTable::from_fn(n, |x| values[x as usize] >> i & 1 == 1))
            .collect();
        Self::new(sign, planes)
    }

    pub fn random<R: Rng + ?Sized>(n: usize, b: usize, rng: &mut R) -> Self {
        let sign = DataTable::random(n, rng);
        let planes = (0..b).map(|_| DataTable::random(n, rng)).collect();
        Self::new(sign, planes).expect("sizes are consistent")
    }

    pub fn data_value(&self, x: u64) -> u64 {
        self.planes
            .iter()
            .enumerate()
            .fold(0, |acc, (i, p)| acc | (p.get(x) as u64) << i)
    }

    pub fn total_bits(&self) -> usize {
        self.n + self.b
    }
}

/// `f̂(x, u) = f_±(x) ⊕ u·f_data(x)` on `n + b` bits, with `x` in the low bits.
pub fn hat_function(f: &SignedDataTable) -> Result<DataTable> {
    let total = f.total_bits();
    if total > MAX_CLASSICAL_BITS {
        return Err(Error::SizeCap(format!("n + b = {total}")));
    }
    let n = f.n;
    let addr_mask = (1u64 << n) - 1;
    Ok(DataTable::from_fn(total, |z| {
        let x = z & addr_mask;
        let u = z >> n;
        let dot = (u & f.data_value(x)).count_ones() & 1 == 1;
        f.sign.get(x) ^ dot
    }))
}

/// Generalized update rule `f ⊕ f^{⊕m}` for `m = (m_A, m_B)` of length `n + b`.
pub fn update_rule_signed(f: &SignedDataTable, m: u64) -> Result<SignedDataTable> {
    check_addr(f.total_bits(), m)?;
    let m_a = m & ((1u64 << f.n) - 1);
    let m_b = m >> f.n;
    let mut sign = update_rule(&f.sign, m_a)?;
    for (i, p) in f.planes.iter().enumerate() {
        if m_b >> i & 1 == 1 {
            sign = sign.xor(&shift(p, m_a)?)?;
        }
    }
    let planes = f
        .planes
        .iter()
        .map(|p| update_rule(p, m_a))
        .collect::<Result<Vec<_>>>()?;
    SignedDataTable::new(sign, planes)
}

fn pack_bitstream(tables: &[&DataTable]) -> Vec<u8> {
    let total: usize = tables.iter().map(|t| t.len()).sum();
    let mut bytes = vec![0u8; total.div_ceil(8)];
    let mut pos = 0usize;
    for t in tables {
        for x in 0..t.len() as u64 {
            if t.get(x) {
                bytes[pos / 8] |= 1 << (pos % 8);
            }
            pos += 1;
        }
    }
    bytes
}

/// Write the `QRAMTBL v1` text format: a header line, then the hex encoding
/// of one little-endian packed bit stream (sign table, then each data plane).
pub fn write_table<W: Write>(f: &SignedDataTable, mut out: W) -> std::io::Result<()> {
    writeln!(out, "QRAMTBL v1 n={} b={}", f.n, f.b)?;
    let mut tables = vec![&f.sign];
    tables.extend(f.planes.iter());
    let bytes = pack_bitstream(&tables);
    for chunk in bytes.chunks(32) {
        let line: String = chunk.iter().map(|b| format!("{b:02x}")).collect();
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_table<R: BufRead>(input: R) -> Result<SignedDataTable> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty input".into()))?
        .map_err(|e| Error::Parse(e.to_string()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "QRAMTBL" || parts[1] != "v1" {
        return Err(Error::Parse(format!("bad header '{header}'")));
    }
    let field = |s: &str, key: &str| -> Result<usize> {
        s.strip_prefix(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad header field '{s}'")))
    };
    let n = field(parts[2], "n=")?;
    let b = field(parts[3], "b=")?;
    if n + b > MAX_CLASSICAL_BITS {
        return Err(Error::SizeCap(format!("n + b = {}", n + b)));
    }
    let mut hex = String::new();
    for line in lines {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        hex.extend(line.chars().filter(|c| !c.is_whitespace()));
    }
    if !hex.len().is_multiple_of(2) {
        return Err(Error::Parse("odd number of hex digits".into()));
    }
    let bytes = (0..hex.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&hex[i..i + 2], 16))
        .collect::<std::result::Result<Vec<u8>, _>>()
        .map_err(|e| Error::Parse(e.to_string()))?;
    let size = 1usize << n;
    let total = size * (b + 1);
    if bytes.len() != total.div_ceil(8) {
        return Err(Error::Length {
            expected: total.div_ceil(8),
            got: bytes.len(),
        });
    }
    if !total.is_multiple_of(8) && bytes[bytes.len() - 1] >> (total % 8) != 0 {
        return Err(Error::Parse("padding bits are not zero".into()));
    }
    let bit = |pos: usize| bytes[pos / 8] >> (pos % 8) & 1 == 1;
    let sign = DataTable::from_fn(n, |x| bit(x as usize));
    let planes = (0..b)
        .map(|i| DataTable::from_fn(n, |x| bit((i + 1) * size + x as usize)))
        .collect();
    SignedDataTable::new(sign, planes)
}
