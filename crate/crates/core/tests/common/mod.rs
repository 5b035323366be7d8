//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use proptest::test_runner::Config;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use weakchaos::maps::{doubling_orbit_from_digits, MapSpec, Orbit};
use weakchaos::recurrence::{trial_rng, uniform_open_closed};

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `count` integers spaced geometrically from `lo` to `hi`, deduplicated.
pub fn geom_grid(lo: f64, hi: f64, count: usize) -> Vec<usize> {
    let mut g: Vec<usize> = (0..count)
        .map(|i| (lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).round() as usize)
        .collect();
    g.dedup();
    g
}

/// Orbit of a random start point; doubling orbits read fresh random digits.
pub fn random_orbit(map: &MapSpec, n: usize, seed: u64, index: u64) -> Orbit {
    let mut rng: ChaCha8Rng = trial_rng(seed, index);
    match map {
        MapSpec::Doubling => {
            let digits: Vec<bool> = (0..n + 64).map(|_| rng.gen()).collect();
            doubling_orbit_from_digits(digits, n)
        }
        _ => map.iterate(uniform_open_closed(&mut rng), n).unwrap(),
    }
}

/// `E[log2 t]` for the renewal chain by direct series summation:
/// `P(t > m) = tail(m) = xi_{m-1}` so `E[log2 t] = sum_{m>=1} xi_{m-1} log2((m+1)/m)`,
/// truncated at `m = terms` with the integral tail `a M^-beta / (beta ln 2)`.
pub fn excursion_log_mean_series(z: f64, a: f64, terms: u64) -> f64 {
    let beta = 1.0 / (z - 1.0);
    let xi = |k: f64| a * (k + 1.0).powf(-beta);
    let mut sum = 0.0;
    for m in 1..=terms {
        let m = m as f64;
        sum += xi(m - 1.0) * ((m + 1.0) / m).log2();
    }
    let big = terms as f64;
    sum + a * big.powf(-beta) / (beta * std::f64::consts::LN_2)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Proptest configuration without failure persistence (integration tests
/// have no `lib.rs` next to them to anchor the regression files).
pub fn proptest_config(cases: u32) -> Config {
    Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    }
}
