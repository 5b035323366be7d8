mod common;

use proptest::prelude::*;

use weakchaos::asymptotics::{fit_order, OrderClass, SeriesSample};
use weakchaos::complexity::{orbit_information_curve, point_information_model, Estimator};
use weakchaos::maps::MapSpec;
use weakchaos::recurrence::renewal_orbit;
use weakchaos::sensitivity::sensitivity_curve_along;

use common::{geom_grid, random_orbit};

/// `max_n (bits(n, 2 eps) - S(r(x,n,eps)) - log2 n)` for one start point.
fn upper_gap(map: &MapSpec, eps: f64, grid: &[usize], seed: u64, index: u64) -> f64 {
    let orbit = random_orbit(map, *grid.last().unwrap(), seed, index);
    let tube = sensitivity_curve_along(map, &orbit, eps, grid).unwrap();
    let bits = orbit_information_curve(map, &orbit, 2.0 * eps, grid, Estimator::Codec).unwrap();
    tube.records
        .iter()
        .zip(&bits.samples)
        .map(|(t, &(n, b))| b as f64 - point_information_model(t.r, 1).unwrap() - (n as f64).log2())
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn complexity_bounded_by_inner_sensitivity() {
    // bits(n, 2 eps) <= S(r(x,n,eps)) + log2 n + c with c fitted on one set
    // of start points and tested on another.
    let map = MapSpec::pl_manneville(3.0, 0.5).unwrap();
    let eps = 1.0 / 16.0;
    let grid = [1, 2, 3, 5, 8, 12, 18, 27, 40, 60, 90, 135, 200, 300, 450, 700, 1000];
    let c = (0..60)
        .map(|i| upper_gap(&map, eps, &grid, 700, i))
        .fold(f64::NEG_INFINITY, f64::max);
    let fresh: Vec<f64> = (0..20).map(|i| upper_gap(&map, eps, &grid, 701, i)).collect();
    let held = fresh.iter().filter(|&&g| g <= c).count();
    assert!(held >= 19, "bound with c = {c} holds for {held}/20: {fresh:?}");
}

#[test]
fn complexity_and_separation_share_an_order() {
    let m = MapSpec::pl_manneville(3.0, 0.5).unwrap();
    let eps = 0.125;
    let grid = geom_grid(10.0, 2000.0, 10);
    let orbits = 20;
    let mut separation = vec![0.0; grid.len()];
    let mut bits = vec![0.0; grid.len()];
    for i in 0..orbits {
        let orbit = random_orbit(&m, *grid.last().unwrap(), 77, i);
        let tube = sensitivity_curve_along(&m, &orbit, 3.0 * eps, &grid).unwrap();
        let curve = orbit_information_curve(&m, &orbit, eps, &grid, Estimator::Codec).unwrap();
        for (j, (t, &(n, b))) in tube.records.iter().zip(&curve.samples).enumerate() {
            separation[j] += (-t.big_r.log2() + (n as f64).log2()) / orbits as f64;
            bits[j] += b as f64 / orbits as f64;
        }
    }
    let fit = |values: &[f64]| {
        let series = SeriesSample::new(grid.iter().map(|&n| n as f64).zip(values.iter().copied()).collect()).unwrap();
        fit_order(&series).class
    };
    match (fit(&separation), fit(&bits)) {
        (OrderClass::Power { alpha: a1, .. }, OrderClass::Power { alpha: a2, .. }) => {
            assert!((a1 - a2).abs() <= 0.1, "separation n^{a1} vs complexity n^{a2}");
        }
        (s, c) => panic!("separation {s} vs complexity {c}"),
    }
}

proptest! {
    #![proptest_config(common::proptest_config(32))]

    #[test]
    fn codec_curves_are_monotone(m_eps in 1i32..8, seed in any::<u64>()) {
        let m = MapSpec::pl_manneville(3.0, 0.5).unwrap();
        let pl = *m.as_pl_manneville().unwrap();
        let grid = geom_grid(1.0, 20_000.0, 25);
        let orbit = renewal_orbit(&pl, *grid.last().unwrap(), seed, 0).unwrap();
        let fine = orbit_information_curve(&m, &orbit, 2f64.powi(-m_eps - 1), &grid, Estimator::Codec).unwrap();
        let coarse = orbit_information_curve(&m, &orbit, 2f64.powi(-m_eps), &grid, Estimator::Codec).unwrap();
        for curve in [&fine, &coarse] {
            prop_assert!(curve.samples.windows(2).all(|w| w[0].1 <= w[1].1));
        }
        // A coarser cover shrinks Q_count and l, so even the header cannot grow.
        for (&(_, f), &(_, c)) in fine.samples.iter().zip(&coarse.samples) {
            prop_assert!(c <= f, "coarse {c} > fine {f}");
        }
    }

    #[test]
    fn lz_curves_are_monotone(seed in any::<u64>(), which in 0usize..3) {
        let map = [MapSpec::Doubling, MapSpec::rotation(0.381966).unwrap(), MapSpec::pl_manneville(3.0, 0.5).unwrap()][which].clone();
        let grid = geom_grid(1.0, 5000.0, 20);
        let orbit = random_orbit(&map, *grid.last().unwrap(), seed, 0);
        let curve = orbit_information_curve(&map, &orbit, 0.1, &grid, Estimator::Lz).unwrap();
        prop_assert!(curve.samples.windows(2).all(|w| w[0].1 <= w[1].1));
    }
}
