//! Acceptance suite: one pass/fail line per criterion. Runs without the
//! libtest harness so the report is always printed; exits non-zero if any
//! criterion fails.

mod common;

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use weakchaos::asymptotics::{compare_orders, fit_order, OrderClass, OrderModel, SeriesSample};
use weakchaos::cli::main_with_args;
use weakchaos::complexity::{cover_index_sequence, lz_compress, orbit_information_curve, Estimator};
use weakchaos::maps::{FullBranchMap, MapSpec, PlMannevilleMap};
use weakchaos::recurrence::{
    renewal_orbit, scaled_distribution_check, simulate_nn_grid, trial_rng, uniform_open_closed, RenewalModel,
};
use weakchaos::sensitivity::{brute_force_step, sensitivity_curve_along, tube_brute_force, tube_radii};
use weakchaos::symbolic::{
    codec_length_curve, contained_from, decode_orbit, encode_orbit, symbolize, to_recurrence, EpsilonCover,
};

use common::{geom_grid, ols_slope, random_orbit};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn exact_identities() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [0usize, 1, 2, 3, 5, 8, 13, 20, 35, 50, 75, 100, 150, 200] {
        for &eps in &[0.3, 0.05, 1e-3] {
            let (r, big_r) = tube_radii(&MapSpec::Identity, 0.4, n, eps).unwrap();
            worst = worst.max(rel(r, eps)).max(rel(big_r, eps));
        }
        let want = 0.1 * 2f64.powi(-(n as i32));
        let (r, big_r) = tube_radii(&MapSpec::Doubling, 0.0, n, 0.1).unwrap();
        worst = worst.max(rel(r, want)).max(rel(big_r, want));
        for (z, a) in [(3.0, 0.5), (4.0, 0.3)] {
            let m = PlMannevilleMap::new(z, a).unwrap();
            for k in [0u64, 3, 20] {
                let (r, big_r) = tube_radii(&MapSpec::PlManneville(m), 0.0, n, m.xi(k)).unwrap();
                let want = m.xi(k + n as u64);
                worst = worst.max(rel(r, want)).max(rel(big_r, want));
            }
        }
    }
    outcome(worst <= 1e-9, format!("max relative error {worst:.2e}"))
}

fn random_map(rng: &mut ChaCha8Rng) -> MapSpec {
    match rng.gen_range(0..6) {
        0 => MapSpec::Identity,
        1 => MapSpec::rotation(rng.gen_range(0.05..0.95)).unwrap(),
        2 => MapSpec::Doubling,
        3 => MapSpec::smooth_manneville(rng.gen_range(1.5..4.0)).unwrap(),
        4 => MapSpec::pl_manneville(rng.gen_range(2.2..5.0), rng.gen_range(0.2..0.8)).unwrap(),
        _ => {
            let mut b: Vec<f64> = (0..rng.gen_range(1..4)).map(|_| rng.gen_range(0.1..0.9)).collect();
            b.sort_by(f64::total_cmp);
            b.dedup_by(|x, y| (*x - *y).abs() < 0.05);
            MapSpec::PiecewiseLinear(FullBranchMap::new(&b).unwrap())
        }
    }
}

fn brute_force_agreement() -> Outcome {
    const GRID: usize = 4001;
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let map = random_map(&mut rng);
        let x = rng.gen_range(0.0..1.0);
        let n = rng.gen_range(0..=12);
        let eps = rng.gen_range(0.005..0.2);
        let (r, big_r) = tube_radii(&map, x, n, eps).unwrap();
        let (bi, bo) = tube_brute_force(&map, x, n, eps, GRID).unwrap();
        let step = brute_force_step(&map, x, eps, GRID);
        let err = ((r - bi).abs().max((big_r - bo).abs())) / step;
        worst = worst.max(err);
        if err > 2.0 {
            failures.push(format!("#{i} {map} x={x:.4} n={n} eps={eps:.4}"));
        }
    }
    outcome(
        failures.is_empty(),
        format!("worst deviation {worst:.2} grid steps; failures: {failures:?}"),
    )
}

fn renewal_exponent() -> Outcome {
    let grid = [1_000u64, 10_000, 100_000, 1_000_000];
    let mut parts = Vec::new();
    let mut pass = true;
    for z in [3.0, 4.0] {
        let model = RenewalModel::new(z, 0.5).unwrap();
        let samples = simulate_nn_grid(&model, &grid, 1000, 31).unwrap();
        let x: Vec<f64> = grid.iter().map(|&n| (n as f64).log2()).collect();
        let y: Vec<f64> = samples.iter().map(|s| s.mean().log2()).collect();
        let slope = ols_slope(&x, &y);
        let target = 1.0 / (z - 1.0);
        pass &= (slope - target).abs() <= 0.05;
        parts.push(format!("z={z}: slope {slope:.4} (target {target:.4})"));
    }
    outcome(pass, parts.join("; "))
}

fn codec_scaling() -> Outcome {
    let m = PlMannevilleMap::new(3.0, 0.5).unwrap();
    let eps = 0.125;
    let grid = geom_grid(1e3, 1e6, 13);
    let n_max = *grid.last().unwrap();
    let mut mean_bits = vec![0.0; grid.len()];
    for trial in 0..20 {
        let orbit = renewal_orbit(&m, n_max, 404, trial).unwrap();
        let symbols = symbolize(&m, &orbit).unwrap();
        let curve = codec_length_curve(&m, &symbols, eps, &grid).unwrap();
        for (acc, b) in mean_bits.iter_mut().zip(curve) {
            *acc += b as f64 / 20.0;
        }
    }
    let series = SeriesSample::new(grid.iter().map(|&n| n as f64).zip(mean_bits).collect()).unwrap();
    let fit = fit_order(&series);
    let pass = matches!(fit.class, OrderClass::Power { alpha, .. } if (alpha - 0.5).abs() <= 0.1);
    outcome(pass, format!("mean codec curve over 20 orbits, eps=1/8: {}", fit.class))
}

fn codec_round_trip() -> Outcome {
    let m = PlMannevilleMap::new(3.0, 0.5).unwrap();
    let map = MapSpec::PlManneville(m);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DEC);
    let mut problems = Vec::new();
    let mut total_bits = 0u64;
    for i in 0..100u64 {
        let n = rng.gen_range(0..5000);
        let eps = 2f64.powi(-rng.gen_range(1..9));
        let cover = EpsilonCover::new(eps).unwrap();
        let orbit = if i % 2 == 0 {
            map.iterate(uniform_open_closed(&mut rng), n).unwrap()
        } else {
            renewal_orbit(&m, n, 77, i).unwrap()
        };
        let out = encode_orbit(&m, &orbit, &cover).unwrap();
        total_bits += out.len();
        let symbols = symbolize(&m, &orbit).unwrap();
        let record = to_recurrence(&symbols);
        let first_contained = contained_from(&m, eps);
        // Independent recomputation of the bound.
        let header: u64 = [n as u64, out.q_count(), cover.len()]
            .iter()
            .map(|&v| 2 * (64 - (v + 1).leading_zeros() as u64 - 1) + 2)
            .sum();
        let clog = |v: u64| (v as f64).log2().ceil() as u64;
        let bound: u64 =
            header + record.p.iter().map(|&t| 2 * clog(t + 1) + 2).sum::<u64>() + out.q_count() * clog(cover.len());
        if out.len() > bound {
            problems.push(format!("#{i}: {} bits > bound {bound}", out.len()));
        }
        let decoded = decode_orbit(out.bits(), &m, &cover).unwrap();
        let expected: Vec<u64> = symbols
            .symbols()
            .iter()
            .zip(cover_index_sequence(&orbit, &cover))
            .map(|(&k, j)| if k < first_contained { j } else { 0 })
            .collect();
        if decoded != expected {
            problems.push(format!("#{i}: decoded indices differ"));
        }
        for (&j, &x) in decoded.iter().zip(&orbit.points) {
            if (cover.center(j) - x).abs() >= eps || x.is_nan() {
                problems.push(format!("#{i}: center {} not within {eps} of {x}", cover.center(j)));
                break;
            }
        }
        if encode_orbit(&m, &orbit, &cover).unwrap() != out {
            problems.push(format!("#{i}: re-encoding differs"));
        }
    }
    outcome(
        problems.is_empty(),
        format!("100 orbits, {total_bits} bits total; problems: {problems:?}"),
    )
}

/// `max_n (-log2 R(x,n,3 eps) - bits(n,eps))` for one start point.
fn quella2_gap(map: &MapSpec, estimator: Estimator, eps: f64, grid: &[usize], seed: u64, index: u64) -> f64 {
    let orbit = random_orbit(map, *grid.last().unwrap(), seed, index);
    let tube = sensitivity_curve_along(map, &orbit, 3.0 * eps, grid).unwrap();
    let bits = orbit_information_curve(map, &orbit, eps, grid, estimator).unwrap();
    tube.records
        .iter()
        .zip(&bits.samples)
        .map(|(t, &(_, b))| -t.big_r.log2() - b as f64)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn sensitivity_complexity_inequality() -> Outcome {
    let cases = [
        (
            MapSpec::Doubling,
            Estimator::Lz,
            0.125,
            vec![1, 2, 3, 5, 8, 12, 18, 27, 40, 60, 90, 135, 200, 300, 400],
        ),
        (
            MapSpec::pl_manneville(3.0, 0.5).unwrap(),
            Estimator::Codec,
            1.0 / 16.0,
            vec![1, 2, 3, 5, 8, 12, 18, 27, 40, 60, 90, 135, 200, 300, 450, 700, 1000],
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (map, est, eps, grid) in cases {
        // Fit c on a calibration set, then test it on fresh start points.
        let c = (0..100)
            .map(|i| quella2_gap(&map, est, eps, &grid, 600, i))
            .fold(f64::NEG_INFINITY, f64::max);
        let held = (0..20)
            .filter(|&i| quella2_gap(&map, est, eps, &grid, 601, i) <= c)
            .count();
        pass &= held >= 19;
        parts.push(format!("{map} ({est}, eps={eps}): c={c:.3}, holds for {held}/20"));
    }
    outcome(pass, parts.join("; "))
}

fn lz_rate(map: &MapSpec, n: usize, seed: u64) -> f64 {
    let cover = EpsilonCover::new(0.5).unwrap();
    let orbit = random_orbit(map, n, seed, 0);
    lz_compress(&cover_index_sequence(&orbit, &cover), cover.len()).unwrap() as f64 / n as f64
}

fn lz_doubling() -> Outcome {
    let rate = lz_rate(&MapSpec::Doubling, 100_000, 70);
    outcome(
        (0.8..=1.6).contains(&rate),
        format!("doubling rate {rate:.4} bits/step at n=1e5, eps=1/2"),
    )
}

fn lz_rotation() -> Outcome {
    let rot = MapSpec::rotation(2f64.sqrt() - 1.0).unwrap();
    let rate = lz_rate(&rot, 100_000, 71);
    outcome(
        rate < 0.2,
        format!("rotation t=sqrt(2)-1 rate {rate:.4} bits/step at n=1e5, eps=1/2"),
    )
}

fn lz_identity() -> Outcome {
    let grid = geom_grid(10.0, 1e6, 21);
    let orbit = MapSpec::Identity.iterate(0.3, *grid.last().unwrap()).unwrap();
    let curve = orbit_information_curve(&MapSpec::Identity, &orbit, 0.5, &grid, Estimator::Lz).unwrap();
    let series = SeriesSample::new(curve.samples.iter().map(|&(n, b)| (n as f64, b as f64)).collect()).unwrap();
    let fit = fit_order(&series);
    outcome(
        fit.class.model() == OrderModel::Log,
        format!("identity LZ curve n=10..1e6 fits {}", fit.class),
    )
}

struct Family {
    name: &'static str,
    model: OrderModel,
    truth: f64,
    ns: Vec<f64>,
    f: Box<dyn Fn(f64) -> f64>,
}

fn families() -> Vec<Family> {
    let wide: Vec<f64> = geom_grid(10.0, 1e4, 100).into_iter().map(|n| n as f64).collect();
    let short: Vec<f64> = geom_grid(10.0, 1e3, 100).into_iter().map(|n| n as f64).collect();
    let mut v = vec![
        Family {
            name: "constant(7)",
            model: OrderModel::Constant,
            truth: 7.0,
            ns: wide.clone(),
            f: Box::new(|_| 7.0),
        },
        Family {
            name: "log(a=3)",
            model: OrderModel::Log,
            truth: 3.0,
            ns: wide.clone(),
            f: Box::new(|n| 3.0 * n.log2() + 2.0),
        },
    ];
    for alpha in [0.2, 0.5, 0.8] {
        v.push(Family {
            name: "power",
            model: OrderModel::Power,
            truth: alpha,
            ns: wide.clone(),
            f: Box::new(move |n| 5.0 * n.powf(alpha)),
        });
    }
    for alpha in [0.3, 0.6] {
        v.push(Family {
            name: "stretched_exp",
            model: OrderModel::StretchedExp,
            truth: alpha,
            ns: wide.clone(),
            f: Box::new(move |n| (2.0 * n.powf(alpha)).exp2()),
        });
    }
    for lambda in [-1.0, -0.5, 0.5, 1.0] {
        v.push(Family {
            name: "exp",
            model: OrderModel::Exp,
            truth: lambda,
            ns: short.clone(),
            f: Box::new(move |n| (lambda * n).exp2()),
        });
    }
    v
}

fn recovered_parameter(class: &OrderClass) -> f64 {
    match *class {
        OrderClass::Constant { c } => c,
        OrderClass::Log { a, .. } => a,
        OrderClass::Power { alpha, .. } | OrderClass::StretchedExp { alpha, .. } => alpha,
        OrderClass::Exp { lambda, .. } => lambda,
    }
}

fn fitter_recovery() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut fitted = Vec::new();
    for (fi, fam) in families().iter().enumerate() {
        let mut good = 0;
        for trial in 0..100u64 {
            let mut rng = trial_rng(0xF17 + fi as u64, trial);
            let pts: Vec<(f64, f64)> = fam
                .ns
                .iter()
                .map(|&n| {
                    let g: f64 = rng.sample(StandardNormal);
                    (n, (fam.f)(n) * (0.01 * g).exp())
                })
                .collect();
            let fit = fit_order(&SeriesSample::new(pts).unwrap());
            let ok = fit.class.model() == fam.model
                && (recovered_parameter(&fit.class) - fam.truth).abs() <= 0.1 * fam.truth.abs();
            good += ok as usize;
            fitted.push(fit.class);
        }
        pass &= good >= 95;
        parts.push(format!("{}({}) {good}/100", fam.name, fam.truth));
    }

    // Total-order checks over every fitted class of the suite.
    let k = fitted.len();
    let table: Vec<Ordering> = (0..k * k)
        .map(|ij| compare_orders(&fitted[ij / k], &fitted[ij % k]))
        .collect();
    let at = |i: usize, j: usize| table[i * k + j];
    let mut antisymmetric = true;
    for i in 0..k {
        antisymmetric &= at(i, i) == Ordering::Equal;
        for j in 0..k {
            antisymmetric &= at(i, j) == at(j, i).reverse();
        }
    }
    let mut transitive = true;
    'outer: for i in 0..k {
        for j in 0..k {
            let ij = at(i, j);
            if ij == Ordering::Greater {
                continue;
            }
            for l in 0..k {
                let jl = at(j, l);
                if jl == Ordering::Greater {
                    continue;
                }
                let expect_strict = ij == Ordering::Less || jl == Ordering::Less;
                let il = at(i, l);
                if il == Ordering::Greater || (expect_strict && il != Ordering::Less) {
                    transitive = false;
                    break 'outer;
                }
            }
        }
    }
    pass &= antisymmetric && transitive;
    outcome(
        pass,
        format!(
            "{}; compare_orders on {k} classes: antisymmetric={antisymmetric}, transitive={transitive}",
            parts.join(", ")
        ),
    )
}

fn levy_stability() -> Outcome {
    let model = RenewalModel::new(3.0, 0.5).unwrap();
    let ks = scaled_distribution_check(&model, 100_000, 1_000_000, 2000, 909).unwrap();
    outcome(ks < 0.1, format!("KS(N_1e5/1e5^a, N_1e6/1e6^a) = {ks:.4}, 2000 trials"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let commands: [&[&str]; 3] = [
        &[
            "sensitivity",
            "--map",
            "plmanneville:z=3,a=0.5",
            "--x0",
            "random:4",
            "--n-grid",
            "geom:1:300:8",
            "--eps",
            "0.1,0.02",
        ],
        &[
            "complexity",
            "--map",
            "doubling",
            "--x0",
            "random:3",
            "--n-grid",
            "geom:10:20000:6",
            "--eps",
            "0.5,0.125",
            "--estimator",
            "lz",
        ],
        &[
            "renewal",
            "--map",
            "plmanneville:z=4,a=0.4",
            "--n-grid",
            "10,1000,100000",
            "--trials",
            "64",
            "--seed",
            "5",
        ],
    ];
    let mut identical = 0;
    let mut notes = Vec::new();
    for (c, args) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let path = dir.path().join(format!("out{c}_{run}.csv"));
            let mut full = vec!["weakchaos".to_string()];
            full.extend(args.iter().map(|s| s.to_string()));
            full.push("--out".into());
            full.push(path.display().to_string());
            let code = main_with_args(full);
            if code != 0 {
                notes.push(format!("{} exited {code}", args[0]));
            }
            outputs.push(std::fs::read(&path).unwrap_or_default());
        }
        if !outputs[0].is_empty() && outputs[0] == outputs[1] {
            identical += 1;
        } else {
            notes.push(format!("{} outputs differ", args[0]));
        }
    }
    outcome(
        identical == commands.len(),
        format!("{identical}/3 commands byte-identical {notes:?}"),
    )
}

/// Id, name, runtime limit, check.
type Criterion = (&'static str, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (
            "1",
            "exact sensitivity identities",
            Duration::from_secs(1),
            exact_identities,
        ),
        (
            "2",
            "brute-force oracle agreement",
            Duration::from_secs(60),
            brute_force_agreement,
        ),
        ("3", "renewal exponent", Duration::from_secs(120), renewal_exponent),
        ("4", "orbit-complexity scaling", Duration::from_secs(300), codec_scaling),
        ("5", "codec correctness and bound", Duration::MAX, codec_round_trip),
        (
            "6",
            "sensitivity-complexity inequality",
            Duration::MAX,
            sensitivity_complexity_inequality,
        ),
        ("7a", "LZ entropy sanity: doubling", Duration::MAX, lz_doubling),
        ("7b", "LZ entropy sanity: rotation", Duration::MAX, lz_rotation),
        ("7c", "LZ entropy sanity: identity", Duration::MAX, lz_identity),
        (
            "8",
            "order-fitter recovery and total order",
            Duration::MAX,
            fitter_recovery,
        ),
        ("9", "Levy/Mittag-Leffler stability", Duration::MAX, levy_stability),
        ("10", "determinism", Duration::MAX, determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (id, name, limit, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = elapsed < limit;
        let pass = result.pass && in_time;
        let limit_note = if limit == Duration::MAX {
            String::new()
        } else {
            format!(", limit {limit:?}")
        };
        println!(
            "[{}] criterion {id:<3} {name}: {} ({:.2?}{limit_note})",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
