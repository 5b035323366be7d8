//! Tube sets `B(n,x,eps) = { y : d(T^i y, T^i x) <= eps, 0 <= i <= n }` and
//! the radii of the largest ball inside (`r`) and the smallest ball around
//! (`R`) them.
//!
//! Membership of `y = x + delta` is decided by propagating the offset
//! `delta` along the reference orbit of `x` (see [`MapSpec::offset_step`]),
//! so tubes far narrower than the spacing of doubles near `x` are still
//! resolved. Each side of `x` is searched separately: a coarse scan finds an
//! escaping offset, halving walks back into the tube, and bisection pins the
//! boundary. The result is cross-checked against a dense scan by
//! [`tube_brute_force`].

use rayon::prelude::*;
use thiserror::Error;

use crate::maps::{AffinePiece, MapError, MapSpec, Orbit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensitivityError {
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("brute-force grid needs at least 1000 points, got {0}")]
    GridTooSmall(usize),
    #[error("n grid must be strictly increasing and within the orbit")]
    UnsortedGrid,
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Relative resolution of the boundary bisection.
pub const REL_TOL: f64 = 1e-13;
/// Absolute floor below which offsets are treated as zero.
pub const ABS_FLOOR: f64 = 1e-300;

const INNER_SCAN: usize = 64;
const HOLE_SCAN: usize = 32;
const OUTER_SCAN: usize = 4096;
const MAX_ROUNDS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeRecord {
    pub n: usize,
    pub r: f64,
    pub big_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubeResult {
    pub x: f64,
    pub epsilon: f64,
    pub records: Vec<TubeRecord>,
}

fn check_eps(eps: f64) -> Result<(), SensitivityError> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(SensitivityError::InvalidEpsilon(eps))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    /// Every offset up to the window edge stays in the tube.
    Full,
    /// Largest offset known to stay in before the first escape.
    Edge(f64),
}

struct Tube<'a> {
    map: &'a MapSpec,
    orbit: &'a [f64],
    /// Affine piece of each orbit point but the last.
    pieces: &'a [Option<AffinePiece>],
    eps: f64,
}

impl Tube<'_> {
    fn contains(&self, delta: f64) -> Result<bool, MapError> {
        let mut d = delta;
        if d.abs() > self.eps {
            return Ok(false);
        }
        for (&xi, piece) in self.orbit.iter().zip(self.pieces) {
            d = self.map.offset_step_with(piece.as_ref(), xi, d)?;
            if d.abs() > self.eps {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn windows(&self) -> [f64; 2] {
        let x = self.orbit[0];
        if self.map.is_circle() {
            let w = self.eps.min(0.5);
            [w, w]
        } else {
            [self.eps.min(x), self.eps.min(1.0 - x)]
        }
    }

    fn bisect(&self, sign: f64, mut lo: f64, mut hi: f64) -> Result<f64, MapError> {
        for _ in 0..400 {
            if hi - lo <= REL_TOL * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.contains(sign * mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    fn inner_side(&self, sign: f64, window: f64) -> Result<Side, MapError> {
        if window <= 0.0 {
            return Ok(Side::Full);
        }
        let mut first_out = None;
        for j in 1..=INNER_SCAN {
            let d = window * j as f64 / INNER_SCAN as f64;
            if !self.contains(sign * d)? {
                first_out = Some(d);
                break;
            }
        }
        for _ in 0..MAX_ROUNDS {
            let Some(out) = first_out else {
                return Ok(Side::Full);
            };
            let mut hi = out;
            let mut lo = 0.5 * hi;
            while !self.contains(sign * lo)? {
                hi = lo;
                lo *= 0.5;
                if lo < ABS_FLOOR {
                    return Ok(Side::Edge(0.0));
                }
            }
            let edge = self.bisect(sign, lo, hi)?;
            first_out = None;
            for j in 1..=HOLE_SCAN {
                let d = edge * j as f64 / (HOLE_SCAN + 1) as f64;
                if !self.contains(sign * d)? {
                    first_out = Some(d);
                    break;
                }
            }
            if first_out.is_none() {
                return Ok(Side::Edge(edge));
            }
        }
        Ok(Side::Edge(0.0))
    }

    fn outer_side(&self, sign: f64, window: f64, inner: Side) -> Result<f64, MapError> {
        if window <= 0.0 {
            return Ok(0.0);
        }
        if inner == Side::Full {
            return Ok(window);
        }
        // Farthest scan point still in the tube; offsets near the window edge
        // usually escape within a few steps, so scan downwards.
        let mut farthest = 0usize;
        for j in (1..=OUTER_SCAN).rev() {
            let d = window * j as f64 / OUTER_SCAN as f64;
            if self.contains(sign * d)? {
                farthest = j;
                break;
            }
        }
        if farthest == OUTER_SCAN {
            return Ok(window);
        }
        let inner_edge = match inner {
            Side::Edge(e) => e,
            Side::Full => window,
        };
        let hi = window * (farthest + 1) as f64 / OUTER_SCAN as f64;
        let lo = if farthest == 0 {
            inner_edge.min(hi)
        } else {
            window * farthest as f64 / OUTER_SCAN as f64
        };
        let refined = self.bisect(sign, lo, hi)?;
        Ok(refined.max(inner_edge.min(window)))
    }

    /// Returns `(r, R)`.
    fn radii(&self) -> Result<(f64, f64), MapError> {
        let windows = self.windows();
        let mut r = self.eps;
        let mut big_r: f64 = 0.0;
        for (sign, window) in [(-1.0, windows[0]), (1.0, windows[1])] {
            let inner = self.inner_side(sign, window)?;
            if let Side::Edge(e) = inner {
                r = r.min(e);
            }
            big_r = big_r.max(self.outer_side(sign, window, inner)?);
        }
        Ok((r, big_r.max(r.min(windows[0].max(windows[1])))))
    }
}

fn affine_pieces(map: &MapSpec, orbit: &[f64]) -> Vec<Option<AffinePiece>> {
    orbit[..orbit.len() - 1].iter().map(|&x| map.affine_piece(x)).collect()
}

fn reference_orbit(map: &MapSpec, x: f64, n: usize) -> Result<Vec<f64>, SensitivityError> {
    Ok(map.iterate(x, n)?.points)
}

/// `r(x,n,eps)`: radius of the largest ball around `x` contained in the tube.
pub fn tube_inner(map: &MapSpec, x: f64, n: usize, eps: f64) -> Result<f64, SensitivityError> {
    Ok(tube_radii(map, x, n, eps)?.0)
}

/// `R(x,n,eps)`: radius of the smallest ball around `x` containing the tube.
pub fn tube_outer(map: &MapSpec, x: f64, n: usize, eps: f64) -> Result<f64, SensitivityError> {
    Ok(tube_radii(map, x, n, eps)?.1)
}

/// Both radii `(r, R)` from one pass.
pub fn tube_radii(map: &MapSpec, x: f64, n: usize, eps: f64) -> Result<(f64, f64), SensitivityError> {
    check_eps(eps)?;
    let orbit = reference_orbit(map, x, n)?;
    let pieces = affine_pieces(map, &orbit);
    let tube = Tube {
        map,
        orbit: &orbit,
        pieces: &pieces[..n],
        eps,
    };
    Ok(tube.radii()?)
}

/// Dense-scan oracle: tests `grid` equally spaced candidates in the
/// eps-window around `x` by direct iteration and returns `(inner, outer)`.
pub fn tube_brute_force(
    map: &MapSpec,
    x: f64,
    n: usize,
    eps: f64,
    grid: usize,
) -> Result<(f64, f64), SensitivityError> {
    check_eps(eps)?;
    if grid < 1000 {
        return Err(SensitivityError::GridTooSmall(grid));
    }
    let orbit = reference_orbit(map, x, n)?;
    let (lo, hi) = if map.is_circle() {
        (x - eps, x + eps)
    } else {
        ((x - eps).max(0.0), (x + eps).min(1.0))
    };
    let step = (hi - lo) / (grid - 1) as f64;
    let mut inner = eps;
    let mut outer: f64 = 0.0;
    for j in 0..grid {
        let raw = lo + step * j as f64;
        let mut y = if map.is_circle() { raw.rem_euclid(1.0) } else { raw };
        let dist = map.distance(y, x);
        let mut inside = dist <= eps;
        for &xi in &orbit[1..] {
            if !inside {
                break;
            }
            y = map.step(y)?;
            inside = map.distance(y, xi) <= eps;
        }
        if inside {
            outer = outer.max(dist);
        } else {
            inner = inner.min(dist);
        }
    }
    Ok((inner, outer))
}

/// Grid spacing used by [`tube_brute_force`] for the same arguments.
pub fn brute_force_step(map: &MapSpec, x: f64, eps: f64, grid: usize) -> f64 {
    let (lo, hi) = if map.is_circle() {
        (x - eps, x + eps)
    } else {
        ((x - eps).max(0.0), (x + eps).min(1.0))
    };
    (hi - lo) / (grid - 1) as f64
}

/// Radii at every `n` of a strictly increasing grid.
///
/// Tubes are nested in `n`, so each radius is capped by its predecessor.
pub fn sensitivity_curve(map: &MapSpec, x: f64, eps: f64, n_grid: &[usize]) -> Result<TubeResult, SensitivityError> {
    let n_max = n_grid.last().copied().unwrap_or(0);
    let orbit = map.iterate(x, n_max)?;
    sensitivity_curve_along(map, &orbit, eps, n_grid)
}

/// [`sensitivity_curve`] around a supplied reference orbit, e.g. one
/// produced with more precision than float iteration provides.
pub fn sensitivity_curve_along(
    map: &MapSpec,
    orbit: &Orbit,
    eps: f64,
    n_grid: &[usize],
) -> Result<TubeResult, SensitivityError> {
    check_eps(eps)?;
    if n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid.last().is_some_and(|&n| n > orbit.steps()) {
        return Err(SensitivityError::UnsortedGrid);
    }
    let points = &orbit.points;
    let n_max = n_grid.last().copied().unwrap_or(0);
    let pieces = affine_pieces(map, &points[..=n_max]);
    let raw: Vec<(f64, f64)> = n_grid
        .par_iter()
        .map(|&n| {
            Tube {
                map,
                orbit: &points[..=n],
                pieces: &pieces[..n],
                eps,
            }
            .radii()
        })
        .collect::<Result<_, _>>()?;
    let mut records = Vec::with_capacity(n_grid.len());
    let (mut r_cap, mut big_r_cap) = (eps, eps);
    for (&n, &(r, big_r)) in n_grid.iter().zip(&raw) {
        r_cap = r_cap.min(r);
        big_r_cap = big_r_cap.min(big_r).max(r_cap);
        records.push(TubeRecord {
            n,
            r: r_cap,
            big_r: big_r_cap,
        });
    }
    Ok(TubeResult {
        x: orbit.x0,
        epsilon: eps,
        records,
    })
}
