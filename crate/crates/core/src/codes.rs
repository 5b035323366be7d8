//! Bit strings and the codes built on them.
//!
//! The string/number correspondence enumerates `{0,1}*` by length and then
//! lexicographically (`"" -> 0, "0" -> 1, "1" -> 2, "00" -> 3, ...`). The
//! self-delimiting code doubles every bit and appends the terminator `01`,
//! which makes concatenations of codewords uniquely decodable.
//!
//! Strings also carry a dyadic interpretation
//! `I(s) = sum_i s_i 2^(floor(n/2) - i)` which is evaluated exactly.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("malformed stream: {0}")]
    MalformedStream(&'static str),
    #[error("string of length {0} does not fit in a 64-bit natural")]
    Overflow(usize),
    #[error("invalid bit character {0:?}")]
    InvalidChar(char),
}

/// A finite binary string.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new() -> Self {
        Self { bits: Vec::new() }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn with_capacity(cap: usize) -> Self {
        Self {
            bits: Vec::with_capacity(cap),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn extend_from(&mut self, other: &BitString) {
        self.bits.extend_from_slice(&other.bits);
    }

    /// Appends `value` as a fixed-width big-endian field of `width` bits.
    pub fn push_fixed(&mut self, value: u64, width: u32) {
        for shift in (0..width).rev() {
            self.bits.push((value >> shift) & 1 == 1);
        }
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.extend_from(other);
        out
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.bits.starts_with(&self.bits)
    }

    /// Interprets the bits as a big-endian unsigned integer.
    fn to_bigint(&self) -> BigInt {
        let mut v = BigInt::zero();
        for &b in &self.bits {
            v <<= 1;
            if b {
                v += 1;
            }
        }
        v
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = CodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(CodeError::InvalidChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString::from_bits)
    }
}

/// Position of `s` in the length-then-lexicographic enumeration of `{0,1}*`.
pub fn string_to_nat(s: &BitString) -> Result<u64, CodeError> {
    if s.len() > 63 {
        return Err(CodeError::Overflow(s.len()));
    }
    let value = s.bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
    Ok((1u64 << s.len()) - 1 + value)
}

/// Inverse of [`string_to_nat`].
pub fn nat_to_string(n: u64) -> BitString {
    // Strings of length L occupy [2^L - 1, 2^(L+1) - 2].
    let shifted = n as u128 + 1;
    let len = 127 - shifted.leading_zeros();
    let value = shifted - (1u128 << len);
    let mut out = BitString::with_capacity(len as usize);
    for shift in (0..len).rev() {
        out.push((value >> shift) & 1 == 1);
    }
    out
}

/// Length of `nat_to_string(n)`, i.e. `floor(log2(n + 1))`.
pub fn nat_string_len(n: u64) -> u32 {
    127 - (n as u128 + 1).leading_zeros()
}

/// Bit length of `self_delim_encode(nat_to_string(n))`.
pub fn self_delim_nat_len(n: u64) -> u64 {
    2 * nat_string_len(n) as u64 + 2
}

/// `s0 s0 s1 s1 ... s_{n-1} s_{n-1} 0 1`
pub fn self_delim_encode(s: &BitString) -> BitString {
    let mut out = BitString::with_capacity(2 * s.len() + 2);
    for &b in &s.bits {
        out.push(b);
        out.push(b);
    }
    out.push(false);
    out.push(true);
    out
}

/// Splits a stream that begins with a self-delimited codeword into the
/// decoded payload and the untouched remainder.
pub fn self_delim_decode(stream: &BitString) -> Result<(BitString, BitString), CodeError> {
    let mut reader = BitReader::new(stream.bits());
    let payload = reader.read_self_delim()?;
    Ok((payload, BitString::from_bits(reader.rest().to_vec())))
}

/// Encodes the couple `(a, b)` as `self_delim(a) ++ b`.
pub fn pair_encode(a: &BitString, b: &BitString) -> BitString {
    self_delim_encode(a).concat(b)
}

pub fn pair_decode(stream: &BitString) -> Result<(BitString, BitString), CodeError> {
    self_delim_decode(stream)
}

/// Sequential reader over a bit slice.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bits: &'a [bool]) -> Self {
        Self { bits, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn rest(&self) -> &'a [bool] {
        &self.bits[self.pos..]
    }

    pub fn read_self_delim(&mut self) -> Result<BitString, CodeError> {
        let mut payload = BitString::new();
        loop {
            if self.remaining() < 2 {
                return Err(CodeError::MalformedStream("stream ended inside a codeword"));
            }
            let pair = (self.bits[self.pos], self.bits[self.pos + 1]);
            self.pos += 2;
            match pair {
                (false, false) => payload.push(false),
                (true, true) => payload.push(true),
                (false, true) => return Ok(payload),
                (true, false) => return Err(CodeError::MalformedStream("bit pair 10 before terminator")),
            }
        }
    }

    /// Reads a self-delimited natural (`self_delim(nat_to_string(n))`).
    pub fn read_nat(&mut self) -> Result<u64, CodeError> {
        let s = self.read_self_delim()?;
        string_to_nat(&s)
    }

    pub fn read_fixed(&mut self, width: u32) -> Result<u64, CodeError> {
        if self.remaining() < width as usize {
            return Err(CodeError::MalformedStream("stream ended inside a fixed-width field"));
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.bits[self.pos] as u64;
            self.pos += 1;
        }
        Ok(v)
    }
}

/// Exact dyadic rational `mantissa * 2^exponent`, kept normalized so that
/// equal values have equal representations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DyadicPoint {
    mantissa: BigInt,
    exponent: i64,
}

impl DyadicPoint {
    pub fn zero() -> Self {
        Self {
            mantissa: BigInt::zero(),
            exponent: 0,
        }
    }

    pub fn new(mantissa: BigInt, exponent: i64) -> Self {
        let mut p = Self { mantissa, exponent };
        p.normalize();
        p
    }

    pub fn from_i64(m: i64, exponent: i64) -> Self {
        Self::new(BigInt::from(m), exponent)
    }

    fn normalize(&mut self) {
        if self.mantissa.is_zero() {
            self.exponent = 0;
            return;
        }
        let tz = self.mantissa.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.mantissa >>= tz;
            self.exponent += tz as i64;
        }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn abs(&self) -> Self {
        Self {
            mantissa: self.mantissa.abs(),
            exponent: self.exponent,
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.mantissa.is_zero() {
            return 0.0;
        }
        // Keep the leading 64 bits so huge mantissas do not overflow.
        let bits = self.mantissa.bits() as i64;
        let drop = (bits - 64).max(0);
        let head = (&self.mantissa >> drop as usize).to_f64().unwrap_or(f64::NAN);
        let exp = self.exponent + drop;
        head * 2f64.powi(exp.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
    }

    /// The denominator exponent; the value has denominator `2^k` with the
    /// returned `k` (zero for integers).
    pub fn denominator_log2(&self) -> u64 {
        if self.exponent < 0 {
            (-self.exponent) as u64
        } else {
            0
        }
    }

    fn aligned(&self, other: &Self) -> (BigInt, BigInt, i64) {
        let e = self.exponent.min(other.exponent);
        let a = &self.mantissa << (self.exponent - e) as usize;
        let b = &other.mantissa << (other.exponent - e) as usize;
        (a, b, e)
    }
}

impl Add for &DyadicPoint {
    type Output = DyadicPoint;
    fn add(self, rhs: Self) -> DyadicPoint {
        let (a, b, e) = self.aligned(rhs);
        DyadicPoint::new(a + b, e)
    }
}

impl Sub for &DyadicPoint {
    type Output = DyadicPoint;
    fn sub(self, rhs: Self) -> DyadicPoint {
        let (a, b, e) = self.aligned(rhs);
        DyadicPoint::new(a - b, e)
    }
}

impl PartialOrd for DyadicPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl fmt::Display for DyadicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent >= 0 {
            write!(f, "{}", &self.mantissa << self.exponent as usize)
        } else {
            write!(f, "{}/2^{}", self.mantissa, -self.exponent)
        }
    }
}

/// `I(s) = sum_{1<=i<=n} s_i 2^(floor(n/2) - i)`, exactly.
pub fn dyadic_interpret(s: &BitString) -> DyadicPoint {
    let n = s.len() as i64;
    let m = s.to_bigint();
    debug_assert!(m.sign() != Sign::Minus);
    DyadicPoint::new(m, n / 2 - n)
}

/// Distance between the interpretations of two strings.
///
/// The contract only asks for `2^-n` accuracy; dyadic arithmetic is exact,
/// so the true distance is returned for every `n`.
pub fn ideal_distance(s1: &BitString, s2: &BitString, _n: u64) -> DyadicPoint {
    (&dyadic_interpret(s1) - &dyadic_interpret(s2)).abs()
}
