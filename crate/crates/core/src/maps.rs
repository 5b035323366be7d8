//! Interval maps and their orbits.
//!
//! The central object is the piecewise-linear Manneville map with
//! breakpoints `xi_k = a (k+1)^(-1/(z-1))`. Its cells are
//! `A_0 = (xi_0, 1]` and `A_k = (xi_k, xi_{k-1}]` for `k >= 1`; each `A_k`
//! is mapped affinely onto `A_{k-1}` and `A_0` onto `(0, 1]`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("point {0} is outside the map's domain")]
    Domain(f64),
    #[error("invalid map parameter: {0}")]
    Parameter(String),
    #[error("cannot parse map specification {0:?}: {1}")]
    Parse(String, String),
    #[error("map {0} has no symbolic partition")]
    Unsupported(String),
    #[error("branch index of {0:e} exceeds the representable range")]
    BranchOverflow(f64),
}

/// Largest branch index we are willing to report; beyond 2^53 consecutive
/// integers are no longer distinguishable in the closed form.
const MAX_BRANCH: f64 = 9_007_199_254_740_992.0;

/// Piecewise-linear Manneville map `T_z` with scale `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlMannevilleMap {
    z: f64,
    a: f64,
    beta: f64,
}

impl PlMannevilleMap {
    pub fn new(z: f64, a: f64) -> Result<Self, MapError> {
        if !(z > 1.0) || !z.is_finite() {
            return Err(MapError::Parameter(format!("z must be > 1, got {z}")));
        }
        if !(a > 0.0 && a < 1.0) {
            return Err(MapError::Parameter(format!("a must lie in (0,1), got {a}")));
        }
        Ok(Self {
            z,
            a,
            beta: 1.0 / (z - 1.0),
        })
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Tail exponent `1/(z-1)`.
    pub fn alpha(&self) -> f64 {
        self.beta
    }

    /// `xi_k = a (k+1)^(-1/(z-1))`.
    pub fn xi(&self, k: u64) -> f64 {
        self.a / ((k as f64) + 1.0).powf(self.beta)
    }

    /// Upper endpoint of `A_k`: `xi_{k-1}`, with `xi_{-1} = 1`.
    pub fn cell_upper(&self, k: u64) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.xi(k - 1)
        }
    }

    /// Lower (open) endpoint of `A_k`: `xi_k`.
    pub fn cell_lower(&self, k: u64) -> f64 {
        self.xi(k)
    }

    /// Index `k` of the cell `A_k = (xi_k, xi_{k-1}]` containing `x`.
    pub fn branch_index(&self, x: f64) -> Result<u64, MapError> {
        self.locate(x).map(|(k, _, _)| k)
    }

    /// Cell of `x` together with its endpoints `(xi_k, cell_upper(k))`.
    fn locate(&self, x: f64) -> Result<(u64, f64, f64), MapError> {
        if !(x > 0.0 && x <= 1.0) {
            return Err(MapError::Domain(x));
        }
        if x > self.a {
            return Ok((0, self.xi(0), 1.0));
        }
        // x in A_k  <=>  k <= (a/x)^(z-1) < k+1
        let guess = self.cell_coordinate(x).floor();
        if !(guess < MAX_BRANCH) {
            return Err(MapError::BranchOverflow(x));
        }
        let mut k = (guess as u64).max(1);
        let mut lo = self.xi(k);
        while !(lo < x) {
            k += 1;
            lo = self.xi(k);
        }
        let mut hi = self.xi(k - 1);
        while k > 1 && !(x <= hi) {
            k -= 1;
            lo = hi;
            hi = self.xi(k - 1);
        }
        Ok((k, lo, hi))
    }

    /// Expansion factor of the affine branch on `A_k`.
    pub fn slope(&self, k: u64) -> f64 {
        if k == 0 {
            1.0 / (1.0 - self.a)
        } else {
            let hi = self.cell_upper(k);
            (self.cell_upper(k - 1) - hi) / (hi - self.xi(k))
        }
    }

    /// Applies the branch of `A_k` to a point known to lie in `A_k`.
    fn apply_branch(&self, k: u64, x: f64) -> f64 {
        self.apply_branch_in(k, x, self.xi(k), self.cell_upper(k))
    }

    /// [`Self::apply_branch`] with the cell endpoints already known.
    fn apply_branch_in(&self, k: u64, x: f64, lo: f64, hi: f64) -> f64 {
        if k == 0 {
            let y = (x - self.a) / (1.0 - self.a);
            return y.clamp(f64::MIN_POSITIVE, 1.0);
        }
        let hi2 = self.cell_upper(k - 1);
        // Anchored at the right endpoint so that xi_{k-1} -> xi_{k-2} exactly.
        let y = hi2 - (hi - x) * ((hi2 - hi) / (hi - lo));
        if y <= hi {
            hi.next_up()
        } else {
            y.min(hi2)
        }
    }

    pub fn step(&self, x: f64) -> Result<f64, MapError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(MapError::Domain(x));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        match self.locate(x) {
            Ok((k, lo, hi)) => Ok(self.apply_branch_in(k, x, lo, hi)),
            Err(MapError::BranchOverflow(_)) => Ok(self.deep_step(x)),
            Err(e) => Err(e),
        }
    }

    /// Fractional cell index `(a/x)^(z-1)`.
    fn cell_coordinate(&self, x: f64) -> f64 {
        (self.a / x).powf(self.z - 1.0)
    }

    /// Step for points so close to 0 that their cell index is beyond 2^53.
    /// Cells there are narrower than the resolution of `x`, and the branch
    /// reduces to `x -> x (g/(g-1))^(1/(z-1))` with `g` the cell coordinate.
    fn deep_step(&self, x: f64) -> f64 {
        let g = self.cell_coordinate(x);
        x * (-self.beta * (-1.0 / g).ln_1p()).exp()
    }

    /// Steps a point whose cell index is already known.
    pub fn step_in_cell(&self, k: u64, x: f64) -> f64 {
        self.apply_branch(k, x)
    }

    fn affine_piece(&self, x: f64) -> Option<AffinePiece> {
        if !(x > 0.0) {
            return None;
        }
        match self.branch_index(x) {
            Ok(k) => Some(AffinePiece {
                lo: self.xi(k) - x,
                hi: self.cell_upper(k) - x,
                lo_closed: false,
                hi_closed: true,
                slope: self.slope(k),
            }),
            Err(MapError::BranchOverflow(_)) => Some(AffinePiece {
                lo: -1e-3 * x,
                hi: 1e-3 * x,
                lo_closed: false,
                hi_closed: false,
                slope: 1.0 + self.z * self.beta / self.cell_coordinate(x),
            }),
            Err(_) => None,
        }
    }
}

/// Full-branch piecewise-linear map: each `[b_j, b_{j+1})` is stretched
/// affinely onto `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullBranchMap {
    breaks: Vec<f64>,
}

impl FullBranchMap {
    /// `interior` lists the breakpoints strictly between 0 and 1.
    pub fn new(interior: &[f64]) -> Result<Self, MapError> {
        let mut breaks = Vec::with_capacity(interior.len() + 2);
        breaks.push(0.0);
        breaks.extend_from_slice(interior);
        breaks.push(1.0);
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(MapError::Parameter(
                "breakpoints must be strictly increasing inside (0,1)".into(),
            ));
        }
        Ok(Self { breaks })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn branch_count(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn branch_of(&self, x: f64) -> usize {
        let j = self.breaks.partition_point(|&b| b <= x);
        j.saturating_sub(1).min(self.branch_count() - 1)
    }

    fn step(&self, x: f64) -> f64 {
        if x >= 1.0 {
            return 0.0;
        }
        let j = self.branch_of(x);
        let (lo, hi) = (self.breaks[j], self.breaks[j + 1]);
        let y = (x - lo) / (hi - lo);
        if y >= 1.0 {
            1.0f64.next_down()
        } else {
            y
        }
    }

    fn affine_piece(&self, x: f64) -> Option<AffinePiece> {
        if !(0.0..1.0).contains(&x) {
            return None;
        }
        let j = self.branch_of(x);
        let (lo, hi) = (self.breaks[j], self.breaks[j + 1]);
        Some(AffinePiece {
            lo: lo - x,
            hi: hi - x,
            lo_closed: true,
            hi_closed: false,
            slope: 1.0 / (hi - lo),
        })
    }
}

/// Offsets `d` in a range `lo..hi` (ends open or closed) on which a map
/// acts on `x + d` as `T(x) + slope * d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePiece {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    pub slope: f64,
}

impl AffinePiece {
    pub fn contains(&self, d: f64) -> bool {
        let above = if self.lo_closed { d >= self.lo } else { d > self.lo };
        let below = if self.hi_closed { d <= self.hi } else { d < self.hi };
        above && below
    }
}

/// Every map the laboratory knows how to iterate.
#[derive(Debug, Clone, PartialEq)]
pub enum MapSpec {
    Identity,
    /// `x + t (mod 1)`, a map of the circle.
    Rotation {
        t: f64,
    },
    /// `2x (mod 1)`
    Doubling,
    /// `x + x^z (mod 1)`
    SmoothManneville {
        z: f64,
    },
    PlManneville(PlMannevilleMap),
    PiecewiseLinear(FullBranchMap),
}

impl MapSpec {
    pub fn rotation(t: f64) -> Result<Self, MapError> {
        if !(t > 0.0 && t < 1.0) {
            return Err(MapError::Parameter(format!("rotation t must lie in (0,1), got {t}")));
        }
        Ok(MapSpec::Rotation { t })
    }

    pub fn smooth_manneville(z: f64) -> Result<Self, MapError> {
        if !(z > 1.0) || !z.is_finite() {
            return Err(MapError::Parameter(format!("z must be > 1, got {z}")));
        }
        Ok(MapSpec::SmoothManneville { z })
    }

    pub fn pl_manneville(z: f64, a: f64) -> Result<Self, MapError> {
        PlMannevilleMap::new(z, a).map(MapSpec::PlManneville)
    }

    pub fn as_pl_manneville(&self) -> Option<&PlMannevilleMap> {
        match self {
            MapSpec::PlManneville(m) => Some(m),
            _ => None,
        }
    }

    /// Rotations live on the circle; every other map uses the interval metric.
    pub fn is_circle(&self) -> bool {
        matches!(self, MapSpec::Rotation { .. })
    }

    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        if self.is_circle() {
            d.min(1.0 - d)
        } else {
            d
        }
    }

    pub fn step(&self, x: f64) -> Result<f64, MapError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(MapError::Domain(x));
        }
        Ok(match self {
            MapSpec::Identity => x,
            MapSpec::Rotation { t } => {
                let y = x + t;
                if y >= 1.0 {
                    y - 1.0
                } else {
                    y
                }
            }
            MapSpec::Doubling => (2.0 * x).fract(),
            MapSpec::SmoothManneville { z } => (x + x.powf(*z)).fract(),
            MapSpec::PlManneville(m) => m.step(x)?,
            MapSpec::PiecewiseLinear(m) => m.step(x),
        })
    }

    /// Index of the monotone branch containing `x`.
    pub fn branch_index(&self, x: f64) -> Result<u64, MapError> {
        match self {
            MapSpec::PlManneville(m) => m.branch_index(x),
            MapSpec::Doubling => {
                if !(0.0..=1.0).contains(&x) {
                    Err(MapError::Domain(x))
                } else {
                    Ok((x >= 0.5) as u64)
                }
            }
            MapSpec::PiecewiseLinear(m) => {
                if !(0.0..=1.0).contains(&x) {
                    Err(MapError::Domain(x))
                } else {
                    Ok(m.branch_of(x) as u64)
                }
            }
            other => Err(MapError::Unsupported(other.to_string())),
        }
    }

    /// Affine branch through `x` as a range of offsets: `T(x + d) - T(x) =
    /// slope * d` for every `d` the piece contains. `None` for maps (or
    /// points) without a usable affine branch.
    pub fn affine_piece(&self, x: f64) -> Option<AffinePiece> {
        match self {
            MapSpec::Identity => Some(AffinePiece {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
                lo_closed: true,
                hi_closed: true,
                slope: 1.0,
            }),
            MapSpec::Doubling if (0.0..1.0).contains(&x) => {
                let (lo, hi) = if x < 0.5 { (-x, 0.5 - x) } else { (0.5 - x, 1.0 - x) };
                Some(AffinePiece {
                    lo,
                    hi,
                    lo_closed: true,
                    hi_closed: false,
                    slope: 2.0,
                })
            }
            MapSpec::PlManneville(m) => m.affine_piece(x),
            MapSpec::PiecewiseLinear(m) => m.affine_piece(x),
            _ => None,
        }
    }

    /// `T(x + delta) - T(x)` evaluated without cancellation when both points
    /// share an affine branch. This lets tube computations resolve offsets far
    /// below the spacing of doubles near `x`. For the circle the result is the
    /// signed offset in `[-1/2, 1/2)`.
    pub fn offset_step(&self, x: f64, delta: f64) -> Result<f64, MapError> {
        self.offset_step_with(self.affine_piece(x).as_ref(), x, delta)
    }

    /// [`MapSpec::offset_step`] with the affine piece of `x` supplied, so
    /// repeated offsets around one point skip the branch search.
    pub fn offset_step_with(&self, piece: Option<&AffinePiece>, x: f64, delta: f64) -> Result<f64, MapError> {
        if let Some(p) = piece {
            if p.contains(delta) {
                return Ok(p.slope * delta);
            }
        }
        match self {
            MapSpec::Identity => Ok(delta),
            MapSpec::Rotation { .. } => Ok(wrap_signed(delta)),
            MapSpec::SmoothManneville { z } => {
                let u = x + x.powf(*z);
                let d = if x > 0.0 {
                    delta + x.powf(*z) * (z * (delta / x).ln_1p()).exp_m1()
                } else {
                    delta + delta.max(0.0).powf(*z)
                };
                let v = u + d;
                Ok(d - (v.floor() - u.floor()))
            }
            _ => Ok(self.step((x + delta).clamp(0.0, 1.0))? - self.step(x)?),
        }
    }

    pub fn iterate(&self, x0: f64, n: usize) -> Result<Orbit, MapError> {
        let mut points = Vec::with_capacity(n + 1);
        let mut x = x0;
        if !(0.0..=1.0).contains(&x) {
            return Err(MapError::Domain(x));
        }
        points.push(x);
        for _ in 0..n {
            x = self.step(x)?;
            points.push(x);
        }
        Ok(Orbit { x0, points })
    }
}

fn wrap_signed(d: f64) -> f64 {
    let w = d - d.round();
    if w >= 0.5 {
        w - 1.0
    } else {
        w
    }
}

impl fmt::Display for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapSpec::Identity => write!(f, "identity"),
            MapSpec::Rotation { t } => write!(f, "rotation:t={t}"),
            MapSpec::Doubling => write!(f, "doubling"),
            MapSpec::SmoothManneville { z } => write!(f, "manneville:z={z}"),
            MapSpec::PlManneville(m) => write!(f, "plmanneville:z={},a={}", m.z, m.a),
            MapSpec::PiecewiseLinear(m) => {
                let inner: Vec<String> = m.breaks[1..m.breaks.len() - 1].iter().map(|b| b.to_string()).collect();
                write!(f, "piecewise:breaks={}", inner.join("|"))
            }
        }
    }
}

impl FromStr for MapSpec {
    type Err = MapError;

    /// Grammar: `identity`, `rotation:t=<real>`, `doubling`,
    /// `manneville:z=<real>`, `plmanneville:z=<real>,a=<real>`, and
    /// `piecewise:breaks=<real>|<real>|...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |why: &str| MapError::Parse(s.to_string(), why.to_string());
        let s_trim = s.trim();
        let (name, params) = match s_trim.split_once(':') {
            Some((n, p)) => (n, p),
            None => (s_trim, ""),
        };
        let mut kv = Vec::new();
        for part in params.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| err("expected key=value"))?;
            kv.push((k.trim(), v.trim()));
        }
        let real = |key: &str| -> Result<f64, MapError> {
            let v = kv
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| err(&format!("missing parameter {key}")))?;
            v.parse::<f64>()
                .map_err(|_| err(&format!("parameter {key} is not a number")))
        };
        let allow = |keys: &[&str]| -> Result<(), MapError> {
            match kv.iter().find(|(k, _)| !keys.contains(k)) {
                Some((k, _)) => Err(err(&format!("unknown parameter {k}"))),
                None => Ok(()),
            }
        };
        match name {
            "identity" => {
                allow(&[])?;
                Ok(MapSpec::Identity)
            }
            "doubling" => {
                allow(&[])?;
                Ok(MapSpec::Doubling)
            }
            "rotation" => {
                allow(&["t"])?;
                MapSpec::rotation(real("t")?)
            }
            "manneville" => {
                allow(&["z"])?;
                MapSpec::smooth_manneville(real("z")?)
            }
            "plmanneville" => {
                allow(&["z", "a"])?;
                MapSpec::pl_manneville(real("z")?, real("a")?)
            }
            "piecewise" => {
                allow(&["breaks"])?;
                let raw = kv
                    .iter()
                    .find(|(k, _)| *k == "breaks")
                    .map(|(_, v)| *v)
                    .ok_or_else(|| err("missing parameter breaks"))?;
                let breaks = raw
                    .split('|')
                    .map(|b| b.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| err("breaks must be numbers"))?;
                FullBranchMap::new(&breaks).map(MapSpec::PiecewiseLinear)
            }
            _ => Err(err("unknown map name")),
        }
    }
}

/// `x, T(x), ..., T^n(x)`
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub x0: f64,
    pub points: Vec<f64>,
}

impl Orbit {
    /// Number of steps `n` (the orbit holds `n + 1` points).
    pub fn steps(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn prefix(&self, n: usize) -> Orbit {
        Orbit {
            x0: self.x0,
            points: self.points[..=n.min(self.steps())].to_vec(),
        }
    }
}

/// Doubling-map orbit of the real number whose binary digits are supplied by
/// `digits`. Floating-point doubling discards one bit per step and collapses
/// to 0 within 54 iterations; reading fresh digits keeps every orbit point
/// accurate to 53 bits.
pub fn doubling_orbit_from_digits<I>(digits: I, n: usize) -> Orbit
where
    I: IntoIterator<Item = bool>,
{
    const WIDTH: usize = 53;
    let mut iter = digits.into_iter();
    let mut window: std::collections::VecDeque<bool> = iter.by_ref().take(WIDTH).collect();
    while window.len() < WIDTH {
        window.push_back(false);
    }
    let value = |w: &std::collections::VecDeque<bool>| -> f64 {
        let mut m = 0u64;
        for &b in w {
            m = (m << 1) | b as u64;
        }
        m as f64 / (1u64 << WIDTH) as f64
    };
    let mut points = Vec::with_capacity(n + 1);
    points.push(value(&window));
    for _ in 0..n {
        window.pop_front();
        window.push_back(iter.next().unwrap_or(false));
        points.push(value(&window));
    }
    Orbit { x0: points[0], points }
}
