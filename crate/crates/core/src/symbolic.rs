//! Symbolic coding of PL Manneville orbits over the partition `{A_k}` and
//! the recurrence-time orbit codec.
//!
//! Because `T(A_k) = A_{k-1}` for `k >= 1`, a symbolic orbit is determined
//! by its first symbol and the symbol entered after every visit to `A_0`.
//! That list is the recurrence string `P`.
//!
//! # Encoded-orbit format
//!
//! ```text
//! hat(n) ++ hat(Q_count) ++ hat(l) ++ hat(P_0) ++ hat(P_1) ++ ... ++ Q_0 ++ Q_1 ++ ...
//! ```
//!
//! `hat(m)` is the self-delimiting code of `nat_to_string(m)`. `P` has
//! `1 + #{i < n : symbol_i = 0}` entries. Each `Q_j` is a cover-ball index
//! written MSB-first in `ceil(log2 l)` bits; one is emitted, in time order,
//! for every step whose cell `A_k` is not contained in the ball at 0
//! (`xi_{k-1} >= eps`). Contained steps decode to ball 0. The map
//! parameters are not transmitted; the decoder receives them out of band.

use thiserror::Error;

use crate::codes::{nat_to_string, self_delim_encode, self_delim_nat_len, BitReader, BitString, CodeError};
use crate::maps::{MapError, Orbit, PlMannevilleMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolicError {
    #[error("orbit point {0} is the fixed point 0, which has no symbol")]
    FixedPoint(usize),
    #[error("symbol {found} at step {index} breaks the descent after {previous}")]
    Descent { index: usize, previous: u64, found: u64 },
    #[error("recurrence string exhausted at step {0}")]
    InsufficientData(usize),
    #[error("recurrence string is empty")]
    EmptyRecurrence,
    #[error("epsilon must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),
    #[error("no cover ball is within eps of {0}")]
    CoverTooCoarse(f64),
    #[error("cover has {found} balls, decoder expects {expected}")]
    CoverMismatch { expected: u64, found: u64 },
    #[error("n grid must be strictly increasing and within the orbit")]
    BadGrid,
    #[error("encoding of {len} bits exceeds its bound {bound}")]
    BoundViolated { len: u64, bound: u64 },
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Cell indices `X_0, ..., X_n` of an orbit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence {
    symbols: Vec<u64>,
}

impl SymbolSequence {
    /// Checks the descent rule `X_i = k > 0  =>  X_{i+1} = k - 1`.
    pub fn new(symbols: Vec<u64>) -> Result<Self, SymbolicError> {
        for (i, w) in symbols.windows(2).enumerate() {
            if w[0] > 0 && w[1] != w[0] - 1 {
                return Err(SymbolicError::Descent {
                    index: i + 1,
                    previous: w[0],
                    found: w[1],
                });
            }
        }
        Ok(Self { symbols })
    }

    pub fn symbols(&self) -> &[u64] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Horizon `n` (the sequence holds `n + 1` symbols).
    pub fn steps(&self) -> usize {
        self.symbols.len().saturating_sub(1)
    }

    /// `N_n`: number of visits to `A_0`.
    pub fn zero_count(&self) -> u64 {
        self.symbols.iter().filter(|&&s| s == 0).count() as u64
    }
}

/// Recurrence string of a symbolic orbit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecurrenceRecord {
    /// Initial symbol, then the symbol entered after each visit to `A_0`.
    pub p: Vec<u64>,
    /// `N_n`
    pub visits: u64,
    pub n: usize,
}

impl RecurrenceRecord {
    /// Excursion lengths implied by `P`; landing in `A_k` takes `k + 1`
    /// steps to return to `A_0`.
    pub fn excursion_times(&self) -> impl Iterator<Item = u64> + '_ {
        self.p.iter().map(|&k| k.saturating_add(1))
    }
}

pub fn symbolize(map: &PlMannevilleMap, orbit: &Orbit) -> Result<SymbolSequence, SymbolicError> {
    let mut symbols = Vec::with_capacity(orbit.points.len());
    for (i, &x) in orbit.points.iter().enumerate() {
        if x == 0.0 {
            return Err(SymbolicError::FixedPoint(i));
        }
        symbols.push(map.branch_index(x)?);
    }
    SymbolSequence::new(symbols)
}

pub fn to_recurrence(symbols: &SymbolSequence) -> RecurrenceRecord {
    let s = symbols.symbols();
    let mut p = Vec::new();
    if let Some(&first) = s.first() {
        p.push(first);
    }
    for w in s.windows(2) {
        if w[0] == 0 {
            p.push(w[1]);
        }
    }
    RecurrenceRecord {
        p,
        visits: symbols.zero_count(),
        n: symbols.steps(),
    }
}

/// Rebuilds `X_0, ..., X_n` from `P`. Entries of `P` beyond those needed
/// for horizon `n` are ignored, so a long recurrence string yields every
/// shorter prefix.
pub fn reconstruct(p: &[u64], n: usize) -> Result<SymbolSequence, SymbolicError> {
    let mut entries = p.iter().copied();
    let first = entries.next().ok_or(SymbolicError::EmptyRecurrence)?;
    let mut symbols = Vec::with_capacity(n + 1);
    symbols.push(first);
    for i in 0..n {
        let next = match symbols[i] {
            0 => entries.next().ok_or(SymbolicError::InsufficientData(i + 1))?,
            k => k - 1,
        };
        symbols.push(next);
    }
    Ok(SymbolSequence { symbols })
}

/// Cover of `[0,1]` by the balls `B_eps(j eps)`, `j = 0, ..., floor(1/eps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonCover {
    eps: f64,
    l: u64,
}

impl EpsilonCover {
    pub fn new(eps: f64) -> Result<Self, SymbolicError> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(SymbolicError::InvalidEpsilon(eps));
        }
        let mut last = (1.0 / eps).floor();
        // Guard against 1/eps rounding just below an integer.
        if (last + 1.0) * eps <= 1.0 {
            last += 1.0;
        }
        Ok(Self {
            eps,
            l: last as u64 + 1,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Number of balls.
    pub fn len(&self) -> u64 {
        self.l
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center(&self, j: u64) -> f64 {
        j as f64 * self.eps
    }

    /// Bits per ball index, `ceil(log2 l)`.
    pub fn index_width(&self) -> u32 {
        ceil_log2(self.l)
    }

    /// Lowest-index ball whose center is strictly within eps of `x`.
    pub fn index_of(&self, x: f64) -> Result<u64, SymbolicError> {
        let y = x / self.eps - 1.0;
        let mut j = if y < 0.0 { 0 } else { y.floor() as u64 + 1 };
        while j > 0 && (self.center(j - 1) - x).abs() < self.eps {
            j -= 1;
        }
        while j < self.l && !((self.center(j) - x).abs() < self.eps) {
            j += 1;
        }
        if j < self.l {
            Ok(j)
        } else {
            Err(SymbolicError::CoverTooCoarse(x))
        }
    }
}

/// `ceil(log2 m)` for `m >= 1`.
pub fn ceil_log2(m: u64) -> u32 {
    if m <= 1 {
        0
    } else {
        64 - (m - 1).leading_zeros()
    }
}

/// Smallest `k` whose cell lies inside the ball at 0: `xi_{k-1} < eps`.
pub fn contained_from(map: &PlMannevilleMap, eps: f64) -> u64 {
    if eps > 1.0 {
        return 0;
    }
    // xi_{k-1} < eps  <=>  k > (a/eps)^(z-1)
    let guess = (map.a() / eps).powf(map.z() - 1.0).floor();
    let mut k = if guess >= 1.0 { guess as u64 } else { 1 };
    while k > 1 && map.cell_upper(k - 1) < eps {
        k -= 1;
    }
    while !(map.cell_upper(k) < eps) {
        k += 1;
    }
    k
}

/// `k_eps = max{k : xi_{k-1} >= eps}`, the deepest cell that needs a Q entry.
pub fn k_eps(map: &PlMannevilleMap, eps: f64) -> u64 {
    contained_from(map, eps) - 1
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodecOutput {
    bits: BitString,
    q_count: u64,
    bound: u64,
}

impl CodecOutput {
    fn new(bits: BitString, q_count: u64, bound: u64) -> Result<Self, SymbolicError> {
        let len = bits.len() as u64;
        if len > bound {
            return Err(SymbolicError::BoundViolated { len, bound });
        }
        Ok(Self { bits, q_count, bound })
    }

    pub fn bits(&self) -> &BitString {
        &self.bits
    }

    pub fn len(&self) -> u64 {
        self.bits.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn q_count(&self) -> u64 {
        self.q_count
    }

    /// `header + sum_i (2 ceil(log2(t_i + 1)) + 2) + Q_count ceil(log2 l)`
    pub fn bound(&self) -> u64 {
        self.bound
    }
}

fn header_len(n: u64, q_count: u64, l: u64) -> u64 {
    self_delim_nat_len(n) + self_delim_nat_len(q_count) + self_delim_nat_len(l)
}

/// Per-entry budget of the bound: `2 ceil(log2(t + 1)) + 2`.
fn p_entry_budget(t: u64) -> u64 {
    2 * ceil_log2(t.saturating_add(1)) as u64 + 2
}

pub fn encode_orbit(map: &PlMannevilleMap, orbit: &Orbit, cover: &EpsilonCover) -> Result<CodecOutput, SymbolicError> {
    let symbols = symbolize(map, orbit)?;
    let record = to_recurrence(&symbols);
    let first_contained = contained_from(map, cover.eps());
    let mut q = Vec::new();
    for (&k, &x) in symbols.symbols().iter().zip(&orbit.points) {
        if k < first_contained {
            q.push(cover.index_of(x)?);
        }
    }
    let n = symbols.steps() as u64;
    let q_count = q.len() as u64;
    let width = cover.index_width();

    let mut bits = BitString::new();
    for h in [n, q_count, cover.len()] {
        bits.extend_from(&self_delim_encode(&nat_to_string(h)));
    }
    for &entry in &record.p {
        bits.extend_from(&self_delim_encode(&nat_to_string(entry)));
    }
    for &j in &q {
        bits.push_fixed(j, width);
    }

    let bound = header_len(n, q_count, cover.len())
        + record.p.iter().map(|&t| p_entry_budget(t)).sum::<u64>()
        + q_count * width as u64;
    CodecOutput::new(bits, q_count, bound)
}

/// Cover index for every step `0..=n`.
pub fn decode_orbit(bits: &BitString, map: &PlMannevilleMap, cover: &EpsilonCover) -> Result<Vec<u64>, SymbolicError> {
    let mut reader = BitReader::new(bits.bits());
    let n = reader.read_nat()?;
    let q_count = reader.read_nat()?;
    let l = reader.read_nat()?;
    if l != cover.len() {
        return Err(SymbolicError::CoverMismatch {
            expected: cover.len(),
            found: l,
        });
    }
    let n = usize::try_from(n).map_err(|_| CodeError::MalformedStream("horizon too large"))?;
    let first_contained = contained_from(map, cover.eps());

    let mut symbols = Vec::with_capacity(n.min(1 << 24) + 1);
    symbols.push(reader.read_nat()?);
    for i in 0..n {
        let next = match symbols[i] {
            0 => reader.read_nat()?,
            k => k - 1,
        };
        symbols.push(next);
    }
    let needed = symbols.iter().filter(|&&k| k < first_contained).count() as u64;
    if needed != q_count {
        return Err(CodeError::MalformedStream("Q count disagrees with the symbols").into());
    }
    let width = cover.index_width();
    let mut out = Vec::with_capacity(symbols.len());
    for &k in &symbols {
        if k < first_contained {
            let j = reader.read_fixed(width)?;
            if j >= l {
                return Err(CodeError::MalformedStream("ball index out of range").into());
            }
            out.push(j);
        } else {
            out.push(0);
        }
    }
    if reader.remaining() != 0 {
        return Err(CodeError::MalformedStream("trailing bits").into());
    }
    Ok(out)
}

/// Codec length `|encode_orbit|` of every prefix `n` in `n_grid`, computed
/// in one pass from the symbols alone (ball indices have fixed width).
pub fn codec_length_curve(
    map: &PlMannevilleMap,
    symbols: &SymbolSequence,
    eps: f64,
    n_grid: &[usize],
) -> Result<Vec<u64>, SymbolicError> {
    let cover = EpsilonCover::new(eps)?;
    if n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid.last().is_some_and(|&n| n > symbols.steps()) {
        return Err(SymbolicError::BadGrid);
    }
    let first_contained = contained_from(map, eps);
    let width = cover.index_width() as u64;
    let s = symbols.symbols();
    let mut out = Vec::with_capacity(n_grid.len());
    let mut p_bits = 0u64;
    let mut q_count = 0u64;
    let mut next = n_grid.iter().peekable();
    for (i, &k) in s.iter().enumerate() {
        // Entry of P that determines X_i.
        if i == 0 || s[i - 1] == 0 {
            p_bits += self_delim_nat_len(k);
        }
        if k < first_contained {
            q_count += 1;
        }
        while next.peek().is_some_and(|&&n| n == i) {
            next.next();
            let n = i as u64;
            out.push(header_len(n, q_count, cover.len()) + p_bits + q_count * width);
        }
        if next.peek().is_none() {
            break;
        }
    }
    Ok(out)
}
