//! Computable upper estimates of the orbit information `E(x,n,eps)`.
//!
//! Two estimators are provided. `codec` is the recurrence-time codec of
//! [`crate::symbolic`] (PL Manneville maps only). `lz` is LZ78 incremental
//! parsing of the sequence of eps-cover indices visited by the orbit; each
//! phrase costs `ceil(log2(m + 1))` bits for the parent phrase (with `m`
//! phrases already in the dictionary, the parent ranges over `m + 1`
//! values, root included) plus `ceil(log2 alphabet)` bits for the new
//! symbol. A trailing incomplete phrase is charged like a complete one.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maps::{MapSpec, Orbit};
use crate::symbolic::{ceil_log2, codec_length_curve, symbolize, EpsilonCover, SymbolicError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplexityError {
    #[error("symbol {symbol} at position {position} is outside the alphabet of size {alphabet}")]
    Alphabet {
        position: usize,
        symbol: u64,
        alphabet: u64,
    },
    #[error("the codec estimator needs a PL Manneville map, got {0}")]
    EstimatorMismatch(String),
    #[error("epsilon must lie in (0,1), got {0}")]
    InvalidEpsilon(f64),
    #[error("dimension must be at least 1")]
    InvalidDimension,
    #[error("n grid must be strictly increasing and within the orbit")]
    BadGrid,
    #[error("unknown estimator {0:?} (expected codec or lz)")]
    UnknownEstimator(String),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Codec,
    Lz,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Codec => "codec",
            Estimator::Lz => "lz",
        })
    }
}

impl FromStr for Estimator {
    type Err = ComplexityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "codec" => Ok(Estimator::Codec),
            "lz" => Ok(Estimator::Lz),
            other => Err(ComplexityError::UnknownEstimator(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityCurve {
    pub estimator: Estimator,
    pub eps: f64,
    /// `(n, bits)` with `n` strictly increasing.
    pub samples: Vec<(usize, u64)>,
}

impl ComplexityCurve {
    /// `bits / n` at the last sample.
    pub fn final_rate(&self) -> Option<f64> {
        self.samples
            .last()
            .filter(|&&(n, _)| n > 0)
            .map(|&(n, bits)| bits as f64 / n as f64)
    }
}

/// Per-step index of the lowest ball of `cover` whose center is within eps
/// of the orbit point.
pub fn cover_index_sequence(orbit: &Orbit, cover: &EpsilonCover) -> Vec<u64> {
    orbit
        .points
        .iter()
        .map(|&x| {
            cover
                .index_of(x.clamp(0.0, 1.0))
                .expect("the grid cover reaches every point of [0,1]")
        })
        .collect()
}

/// Incremental LZ78 parser.
#[derive(Debug, Clone)]
pub struct LzState {
    alphabet: u64,
    width: u64,
    /// `(parent phrase, symbol) -> phrase`; phrase 0 is the empty root.
    children: HashMap<(u32, u64), u32>,
    phrases: u64,
    bits: u64,
    current: u32,
    consumed: usize,
}

impl LzState {
    pub fn new(alphabet: u64) -> Self {
        Self {
            alphabet,
            width: ceil_log2(alphabet.max(1)) as u64,
            children: HashMap::new(),
            phrases: 0,
            bits: 0,
            current: 0,
            consumed: 0,
        }
    }

    fn phrase_cost(&self) -> u64 {
        ceil_log2(self.phrases + 1) as u64 + self.width
    }

    pub fn push(&mut self, symbol: u64) -> Result<(), ComplexityError> {
        if symbol >= self.alphabet {
            return Err(ComplexityError::Alphabet {
                position: self.consumed,
                symbol,
                alphabet: self.alphabet,
            });
        }
        self.consumed += 1;
        match self.children.get(&(self.current, symbol)) {
            Some(&child) => self.current = child,
            None => {
                self.bits += self.phrase_cost();
                self.phrases += 1;
                let id = u32::try_from(self.phrases).expect("fewer than 2^32 phrases");
                self.children.insert((self.current, symbol), id);
                self.current = 0;
            }
        }
        Ok(())
    }

    /// Completed phrases.
    pub fn phrase_count(&self) -> u64 {
        self.phrases
    }

    /// Bits emitted so far, including the pending partial phrase.
    pub fn total_bits(&self) -> u64 {
        if self.current == 0 {
            self.bits
        } else {
            self.bits + self.phrase_cost()
        }
    }
}

/// LZ78 code length of `seq` over `{0, ..., alphabet - 1}`.
pub fn lz_compress(seq: &[u64], alphabet: u64) -> Result<u64, ComplexityError> {
    let mut state = LzState::new(alphabet);
    for &s in seq {
        state.push(s)?;
    }
    Ok(state.total_bits())
}

fn check_grid(n_grid: &[usize], steps: usize) -> Result<(), ComplexityError> {
    if n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid.last().is_some_and(|&n| n > steps) {
        Err(ComplexityError::BadGrid)
    } else {
        Ok(())
    }
}

/// Estimated information of the `n`-step prefix of `orbit` for each `n` in
/// `n_grid`.
pub fn orbit_information_curve(
    map: &MapSpec,
    orbit: &Orbit,
    eps: f64,
    n_grid: &[usize],
    estimator: Estimator,
) -> Result<ComplexityCurve, ComplexityError> {
    let cover = EpsilonCover::new(eps)?;
    check_grid(n_grid, orbit.steps())?;
    let bits = match estimator {
        Estimator::Codec => {
            let pl = map
                .as_pl_manneville()
                .ok_or_else(|| ComplexityError::EstimatorMismatch(map.to_string()))?;
            let n_max = n_grid.last().copied().unwrap_or(0);
            let symbols = symbolize(pl, &orbit.prefix(n_max))?;
            codec_length_curve(pl, &symbols, eps, n_grid)?
        }
        Estimator::Lz => {
            let n_max = n_grid.last().copied().unwrap_or(0);
            let seq = cover_index_sequence(&orbit.prefix(n_max), &cover);
            let mut state = LzState::new(cover.len());
            let mut out = Vec::with_capacity(n_grid.len());
            let mut next = n_grid.iter().peekable();
            for (i, &s) in seq.iter().enumerate() {
                state.push(s)?;
                while next.peek().is_some_and(|&&n| n == i) {
                    next.next();
                    out.push(state.total_bits());
                }
            }
            out
        }
    };
    Ok(ComplexityCurve {
        estimator,
        eps,
        samples: n_grid.iter().copied().zip(bits).collect(),
    })
}

/// Model point information `d log2(1/eps)` of an eps-approximation in
/// dimension `d`.
pub fn point_information_model(eps: f64, d: u32) -> Result<f64, ComplexityError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ComplexityError::InvalidEpsilon(eps));
    }
    if d == 0 {
        return Err(ComplexityError::InvalidDimension);
    }
    Ok(d as f64 * -eps.log2())
}
