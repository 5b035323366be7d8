//! The renewal chain of visits to `A_0`.
//!
//! From state 0 the chain lands in state `k` with probability
//! `p_k = mu(A_k)`, then descends `k, k-1, ..., 0` deterministically, so the
//! return time is `t = k + 1`. The tail `sum_{i >= k} p_i = xi_{k-1}`
//! decays like `a k^(-alpha)` with `alpha = 1/(z-1)`, and for `z > 2` the
//! visit count grows like `E(N_n) ~ C n^alpha`.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`; trial
//! `i` uses stream `i` of that key, so every trial is reproducible on its
//! own and results do not depend on thread count or scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::maps::{MapError, Orbit, PlMannevilleMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecurrenceError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("uniform draw must lie in (0,1], got {0}")]
    InvalidUniform(f64),
    #[error("need at least {min} trials, got {got}")]
    TooFewTrials { min: usize, got: usize },
    #[error("horizons must satisfy n1 <= n2, got {0} and {1}")]
    Horizons(u64, u64),
    #[error("n grid must be strictly increasing")]
    UnsortedGrid,
}

/// Generator for trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Uniform draw on `(0, 1]` with 53 random bits.
pub fn uniform_open_closed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalModel {
    map: PlMannevilleMap,
}

impl RenewalModel {
    pub fn new(z: f64, a: f64) -> Result<Self, RecurrenceError> {
        Ok(Self {
            map: PlMannevilleMap::new(z, a)?,
        })
    }

    pub fn from_map(map: PlMannevilleMap) -> Self {
        Self { map }
    }

    pub fn map(&self) -> &PlMannevilleMap {
        &self.map
    }

    pub fn z(&self) -> f64 {
        self.map.z()
    }

    pub fn a(&self) -> f64 {
        self.map.a()
    }

    /// Tail exponent `1/(z-1)`.
    pub fn alpha(&self) -> f64 {
        self.map.alpha()
    }

    /// `p_k = xi_{k-1} - xi_k`
    pub fn p(&self, k: u64) -> f64 {
        self.map.cell_upper(k) - self.map.xi(k)
    }

    /// `sum_{i >= k} p_i = xi_{k-1}` (and 1 for `k = 0`).
    pub fn tail(&self, k: u64) -> f64 {
        self.map.cell_upper(k)
    }

    /// Landing state `k` with `u in (xi_k, xi_{k-1}]`.
    ///
    /// Draws so small that `k` exceeds 2^53 saturate to `u64::MAX`: such an
    /// excursion outlasts every horizon this crate simulates.
    pub fn sample_landing(&self, u: f64) -> Result<u64, RecurrenceError> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(RecurrenceError::InvalidUniform(u));
        }
        match self.map.branch_index(u) {
            Ok(k) => Ok(k),
            Err(MapError::BranchOverflow(_)) => Ok(u64::MAX),
            Err(e) => Err(e.into()),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.sample_landing(uniform_open_closed(rng))
            .expect("uniform draw lies in (0,1]")
    }

    /// `N_m` at every horizon of a strictly increasing grid, for one trial.
    fn visits_on_grid<R: Rng + ?Sized>(&self, n_grid: &[u64], rng: &mut R) -> Vec<u64> {
        let mut out = Vec::with_capacity(n_grid.len());
        let mut count = 1u64;
        let mut next_zero = self.draw(rng).saturating_add(1);
        for &n in n_grid {
            while next_zero <= n {
                count += 1;
                next_zero = next_zero.saturating_add(self.draw(rng)).saturating_add(1);
            }
            out.push(count);
        }
        out
    }
}

/// Draws of `N_n` for one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct NnSamples {
    pub n: u64,
    /// Indexed by trial.
    pub values: Vec<u64>,
    pub seed: u64,
}

impl NnSamples {
    pub fn mean(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() / self.values.len() as f64
    }

    /// `N_n / n^alpha`
    pub fn scaled(&self, alpha: f64) -> Vec<f64> {
        let s = (self.n as f64).powf(alpha);
        self.values.iter().map(|&v| v as f64 / s).collect()
    }
}

/// `N_n` over `trials` independent runs of the chain started in state 0.
pub fn simulate_nn(model: &RenewalModel, n: u64, trials: usize, seed: u64) -> Result<NnSamples, RecurrenceError> {
    Ok(simulate_nn_grid(model, &[n], trials, seed)?.remove(0))
}

/// Like [`simulate_nn`] at every horizon of `n_grid`; each trial is one
/// chain run observed at all horizons.
pub fn simulate_nn_grid(
    model: &RenewalModel,
    n_grid: &[u64],
    trials: usize,
    seed: u64,
) -> Result<Vec<NnSamples>, RecurrenceError> {
    if trials < 1 {
        return Err(RecurrenceError::TooFewTrials { min: 1, got: trials });
    }
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RecurrenceError::UnsortedGrid);
    }
    let per_trial: Vec<Vec<u64>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| model.visits_on_grid(n_grid, &mut trial_rng(seed, trial)))
        .collect();
    Ok(n_grid
        .iter()
        .enumerate()
        .map(|(j, &n)| NnSamples {
            n,
            values: per_trial.iter().map(|row| row[j]).collect(),
            seed,
        })
        .collect())
}

const DRAWS_PER_STREAM: usize = 1 << 16;

/// Monte-Carlo estimate of `E[log2 t]`, `t = k + 1`, from `trials` landings.
pub fn excursion_log_mean(model: &RenewalModel, trials: usize, seed: u64) -> Result<f64, RecurrenceError> {
    if trials < 1000 {
        return Err(RecurrenceError::TooFewTrials { min: 1000, got: trials });
    }
    let chunks = trials.div_ceil(DRAWS_PER_STREAM);
    let sum: f64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = trial_rng(seed, c as u64);
            let len = DRAWS_PER_STREAM.min(trials - c * DRAWS_PER_STREAM);
            (0..len)
                .map(|_| {
                    let k = model.draw(&mut rng);
                    ((k as f64) + 1.0).log2()
                })
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(sum / trials as f64)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i].total_cmp(&b[j]).is_le() { a[i] } else { b[j] };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// KS distance between `N_{n1}/n1^alpha` and `N_{n2}/n2^alpha`, both taken
/// from the same chain runs.
pub fn scaled_distribution_check(
    model: &RenewalModel,
    n1: u64,
    n2: u64,
    trials: usize,
    seed: u64,
) -> Result<f64, RecurrenceError> {
    if n1 > n2 {
        return Err(RecurrenceError::Horizons(n1, n2));
    }
    let alpha = model.alpha();
    let (s1, s2) = if n1 == n2 {
        let s = simulate_nn(model, n1, trials, seed)?;
        (s.clone(), s)
    } else {
        let mut v = simulate_nn_grid(model, &[n1, n2], trials, seed)?;
        let s2 = v.pop().expect("two horizons");
        (v.pop().expect("two horizons"), s2)
    };
    Ok(ks_distance(&s1.scaled(alpha), &s2.scaled(alpha)))
}

/// Orbit of the map in which the image of every point of `A_0` is
/// replaced by a fresh uniform draw on `(0,1]`. `T` maps `A_0` affinely
/// onto `(0,1]`, so this is the exact law of the next point when the point
/// in `A_0` is itself uniform; it keeps long float orbits from collapsing
/// onto the artificial cycles that repeated doubling-like steps produce.
/// Between returns the points follow the map exactly.
pub fn renewal_orbit(map: &PlMannevilleMap, n: usize, seed: u64, trial: u64) -> Result<Orbit, RecurrenceError> {
    let mut rng = trial_rng(seed, trial);
    let x0 = uniform_open_closed(&mut rng);
    renewal_orbit_from(map, x0, n, &mut rng)
}

/// [`renewal_orbit`] from a given starting point and generator.
pub fn renewal_orbit_from<R: Rng + ?Sized>(
    map: &PlMannevilleMap,
    x0: f64,
    n: usize,
    rng: &mut R,
) -> Result<Orbit, RecurrenceError> {
    if !(x0 > 0.0 && x0 <= 1.0) {
        return Err(MapError::Domain(x0).into());
    }
    let a = map.a();
    let mut points = Vec::with_capacity(n + 1);
    points.push(x0);
    let mut x = x0;
    for _ in 0..n {
        x = if x > a { uniform_open_closed(rng) } else { map.step(x)? };
        points.push(x);
    }
    Ok(Orbit { x0, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> RenewalModel {
        RenewalModel::new(3.0, 0.5).unwrap()
    }

    #[test]
    fn landing_examples() {
        let m = model();
        assert_eq!(m.sample_landing(0.9).unwrap(), 0);
        assert_eq!(m.sample_landing(0.5).unwrap(), 1);
        // (a/u)^(z-1) = 25 exactly, and u = xi_24 belongs to A_25.
        assert_eq!(m.sample_landing(0.1).unwrap(), 25);
        assert_eq!(m.sample_landing(1.0).unwrap(), 0);
        assert_eq!(m.sample_landing(1e-300).unwrap(), u64::MAX);
        assert!(m.sample_landing(0.0).is_err());
        assert!(m.sample_landing(1.5).is_err());
    }

    #[test]
    fn landing_membership() {
        let m = model();
        for i in 1..5000 {
            let u = i as f64 / 5000.0;
            let k = m.sample_landing(u).unwrap();
            assert!(m.map().xi(k) < u && u <= m.tail(k));
        }
    }

    #[test]
    fn masses_telescope() {
        for (z, a) in [(3.0, 0.5), (4.0, 0.3), (1.5, 0.9)] {
            let m = RenewalModel::new(z, a).unwrap();
            // Neumaier-compensated running sum.
            let (mut sum, mut comp) = (0.0f64, 0.0f64);
            for k in 0..=1_000_000u64 {
                let p = m.p(k);
                assert!(p > 0.0);
                let t = sum + p;
                comp += if sum.abs() >= p { (sum - t) + p } else { (p - t) + sum };
                sum = t;
                if k % 99_991 == 0 || k == 1_000_000 {
                    let err = (sum + comp + m.tail(k + 1) - 1.0).abs();
                    assert!(err < 1e-12, "z = {z}, K = {k}, error {err:e}");
                }
            }
        }
    }

    #[test]
    fn zero_horizon_counts_start() {
        let s = simulate_nn(&model(), 0, 50, 7).unwrap();
        assert!(s.values.iter().all(|&v| v == 1));
    }

    #[test]
    fn grid_matches_single_horizons() {
        let m = model();
        let grid = [0, 1, 10, 1000, 50_000];
        let all = simulate_nn_grid(&m, &grid, 40, 3).unwrap();
        for (s, &n) in all.iter().zip(&grid) {
            assert_eq!(*s, simulate_nn(&m, n, 40, 3).unwrap());
            assert!(s.values.iter().all(|&v| v >= 1 && v <= n + 1));
        }
    }

    #[test]
    fn chain_is_reproducible_per_trial() {
        let m = model();
        let a = simulate_nn(&m, 10_000, 64, 11).unwrap();
        let b = simulate_nn(&m, 10_000, 16, 11).unwrap();
        assert_eq!(&a.values[..16], &b.values[..]);
        assert_ne!(a, simulate_nn(&m, 10_000, 64, 12).unwrap());
    }

    #[test]
    fn ks_basics() {
        assert_eq!(ks_distance(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]), 0.0);
        assert_eq!(ks_distance(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_distance(&[1.0, 2.0, 3.0, 4.0], &[2.5]) - 0.5).abs() < 1e-15);
        assert_eq!(scaled_distribution_check(&model(), 1000, 1000, 200, 5).unwrap(), 0.0);
    }

    #[test]
    fn excursion_mean_requires_trials() {
        assert!(excursion_log_mean(&model(), 10, 1).is_err());
    }

    #[test]
    fn renewal_orbit_is_symbolically_consistent() {
        let m = PlMannevilleMap::new(3.0, 0.5).unwrap();
        let orbit = renewal_orbit(&m, 20_000, 9, 0).unwrap();
        assert_eq!(orbit.points.len(), 20_001);
        let s = crate::symbolic::symbolize(&m, &orbit).unwrap();
        assert!(s.zero_count() > 10);
        for (w, s) in orbit.points.windows(2).zip(s.symbols()) {
            if *s > 0 {
                assert_eq!(w[1], m.step(w[0]).unwrap());
            }
        }
        assert_eq!(orbit, renewal_orbit(&m, 20_000, 9, 0).unwrap());
    }
}
