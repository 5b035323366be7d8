//! Command-line experiment driver.
//!
//! A run is fully determined by an [`ExperimentConfig`], resolved from
//! built-in defaults, then an optional flat `key = value` file
//! (`--config`), then command-line flags. Every CSV ends with a comment
//! line `# config: ...` holding the resolved configuration, and rows are
//! emitted in a fixed order so output bytes never depend on scheduling.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::asymptotics::{fit_order_with, OrderModel, SeriesSample};
use crate::complexity::{orbit_information_curve, Estimator};
use crate::maps::{doubling_orbit_from_digits, MapSpec, Orbit};
use crate::recurrence::{renewal_orbit_from, simulate_nn_grid, trial_rng, uniform_open_closed, RenewalModel};
use crate::sensitivity::sensitivity_curve_along;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn numeric_err(e: impl fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "weakchaos",
    version,
    about = "Sensitivity and orbit-complexity experiments on interval maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tube radii r(x,n,eps) and R(x,n,eps).
    Sensitivity(ExperimentArgs),
    /// Orbit information estimates E(x,n,eps).
    Complexity(ExperimentArgs),
    /// Visit counts N_n of the renewal chain.
    Renewal(ExperimentArgs),
    /// Fit the asymptotic order of a CSV column.
    Fit(FitArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Map specification, e.g. `plmanneville:z=3,a=0.5`.
    #[arg(long)]
    pub map: Option<String>,
    /// Initial point: a number, or `random:<count>`.
    #[arg(long)]
    pub x0: Option<String>,
    /// Horizons: `n1,n2,...` or `geom:<start>:<end>:<count>`.
    #[arg(long = "n-grid")]
    pub n_grid: Option<String>,
    /// Comma-separated accuracies.
    #[arg(long)]
    pub eps: Option<String>,
    /// `codec` or `lz`.
    #[arg(long)]
    pub estimator: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// `direct` (iterate the map) or `renewal` (re-randomized returns).
    #[arg(long)]
    pub orbit: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV produced by one of the experiment commands.
    #[arg(long)]
    pub input: PathBuf,
    /// Column to fit against `n`; defaults to `bits`, `N_n` or `R`,
    /// whichever is present first.
    #[arg(long)]
    pub column: Option<String>,
    /// Comma-separated candidate models (default: all).
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum X0Policy {
    Fixed(f64),
    Random(usize),
}

impl fmt::Display for X0Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            X0Policy::Fixed(x) => write!(f, "{x}"),
            X0Policy::Random(c) => write!(f, "random:{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitMode {
    Direct,
    Renewal,
}

impl fmt::Display for OrbitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrbitMode::Direct => "direct",
            OrbitMode::Renewal => "renewal",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub map: MapSpec,
    pub x0: X0Policy,
    pub n_grid_spec: String,
    pub n_grid: Vec<u64>,
    pub eps: Vec<f64>,
    pub estimator: Estimator,
    pub trials: usize,
    pub seed: u64,
    pub orbit: OrbitMode,
    pub out: Option<PathBuf>,
}

const KEYS: [&str; 9] = [
    "map",
    "x0",
    "n_grid",
    "eps",
    "estimator",
    "trials",
    "seed",
    "orbit",
    "out",
];

fn defaults() -> BTreeMap<String, String> {
    [
        ("map", "plmanneville:z=3,a=0.5"),
        ("x0", "random:1"),
        ("n_grid", "geom:10:10000:7"),
        ("eps", "0.125"),
        ("estimator", "lz"),
        ("trials", "100"),
        ("seed", "0"),
        ("orbit", "direct"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

/// Parses a flat `key = value` file. Blank lines and lines starting with
/// `#` are ignored; `-` and `_` are interchangeable in keys.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected key=value, got {raw:?}", lineno + 1)))?;
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(config_err(format!("line {}: unknown key {key:?}", lineno + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

/// Horizons from `n1,n2,...` or `geom:<start>:<end>:<count>` (geometric,
/// rounded, duplicates removed).
pub fn parse_n_grid(spec: &str) -> Result<Vec<u64>, CliError> {
    let spec = spec.trim();
    let grid: Vec<u64> = if let Some(rest) = spec.strip_prefix("geom:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(config_err(format!(
                "n grid {spec:?}: expected geom:<start>:<end>:<count>"
            )));
        }
        let start: u64 = parse_field(parts[0], "n grid start")?;
        let end: u64 = parse_field(parts[1], "n grid end")?;
        let count: usize = parse_field(parts[2], "n grid count")?;
        if start < 1 || end < start || count < 1 {
            return Err(config_err(format!(
                "n grid {spec:?}: need 1 <= start <= end and count >= 1"
            )));
        }
        let mut g: Vec<u64> = (0..count)
            .map(|i| {
                if count == 1 {
                    start
                } else {
                    let t = i as f64 / (count - 1) as f64;
                    ((start as f64) * (end as f64 / start as f64).powf(t)).round() as u64
                }
            })
            .collect();
        g.dedup();
        g
    } else {
        spec.split(',')
            .map(|s| parse_field(s, "n grid entry"))
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config_err(format!(
            "n grid {spec:?} must be nonempty and strictly increasing"
        )));
    }
    Ok(grid)
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    s.trim().parse().map_err(|e| config_err(format!("{what} {s:?}: {e}")))
}

fn parse_x0(s: &str) -> Result<X0Policy, CliError> {
    if let Some(count) = s.trim().strip_prefix("random:") {
        let c: usize = parse_field(count, "x0 count")?;
        if c == 0 {
            return Err(config_err("x0 random count must be positive"));
        }
        Ok(X0Policy::Random(c))
    } else {
        let x: f64 = parse_field(s, "x0")?;
        if !(0.0..=1.0).contains(&x) {
            return Err(config_err(format!("x0 {x} is outside [0,1]")));
        }
        Ok(X0Policy::Fixed(x))
    }
}

impl ExperimentConfig {
    /// Defaults, then the config file named in `args`, then the flags.
    pub fn resolve(args: &ExperimentArgs) -> Result<Self, CliError> {
        let mut raw = defaults();
        if let Some(path) = &args.config {
            let text =
                fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
            raw.extend(parse_config_text(&text)?);
        }
        let flags = [
            ("map", &args.map),
            ("x0", &args.x0),
            ("n_grid", &args.n_grid),
            ("eps", &args.eps),
            ("estimator", &args.estimator),
            ("trials", &args.trials),
            ("seed", &args.seed),
            ("orbit", &args.orbit),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                raw.insert(k.to_string(), v.clone());
            }
        }
        if let Some(out) = &args.out {
            raw.insert("out".into(), out.display().to_string());
        }
        Self::from_raw(&raw)
    }

    fn from_raw(raw: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let get = |k: &str| raw.get(k).map(String::as_str).unwrap_or("");
        let map: MapSpec = get("map").parse().map_err(config_err)?;
        let eps: Vec<f64> = get("eps")
            .split(',')
            .map(|s| parse_field::<f64>(s, "eps"))
            .collect::<Result<_, _>>()?;
        if let Some(&bad) = eps.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
            return Err(config_err(format!("eps {bad} must lie in (0,1)")));
        }
        let trials: usize = parse_field(get("trials"), "trials")?;
        if trials == 0 {
            return Err(config_err("trials must be positive"));
        }
        let orbit = match get("orbit").trim() {
            "direct" => OrbitMode::Direct,
            "renewal" => OrbitMode::Renewal,
            other => return Err(config_err(format!("orbit {other:?}: expected direct or renewal"))),
        };
        Ok(Self {
            map,
            x0: parse_x0(get("x0"))?,
            n_grid_spec: get("n_grid").trim().to_string(),
            n_grid: parse_n_grid(get("n_grid"))?,
            eps,
            estimator: get("estimator").parse().map_err(config_err)?,
            trials,
            seed: parse_field(get("seed"), "seed")?,
            orbit,
            out: raw.get("out").map(PathBuf::from),
        })
    }

    /// One-line rendering of everything that determines the output.
    pub fn metadata(&self) -> String {
        let eps: Vec<String> = self.eps.iter().map(|e| e.to_string()).collect();
        format!(
            "map={} x0={} n_grid={} eps={} estimator={} trials={} seed={} orbit={}",
            self.map,
            self.x0,
            self.n_grid_spec,
            eps.join(","),
            self.estimator,
            self.trials,
            self.seed,
            self.orbit
        )
    }

    fn n_max(&self) -> Result<usize, CliError> {
        let n = *self.n_grid.last().expect("grid is nonempty");
        usize::try_from(n).map_err(config_err)
    }

    fn grid_usize(&self) -> Vec<usize> {
        self.n_grid.iter().map(|&n| n as usize).collect()
    }

    fn x0_count(&self) -> usize {
        match self.x0 {
            X0Policy::Fixed(_) => 1,
            X0Policy::Random(c) => c,
        }
    }

    /// Orbit number `i` of length `n`. Random starts draw from stream `i`
    /// of the seed; doubling orbits from random starts read fresh binary
    /// digits from that stream so the float orbit never collapses.
    fn orbit(&self, i: usize, n: usize) -> Result<Orbit, CliError> {
        let mut rng = trial_rng(self.seed, i as u64);
        match self.orbit {
            OrbitMode::Renewal => {
                let pl = self
                    .map
                    .as_pl_manneville()
                    .ok_or_else(|| config_err("orbit=renewal needs a plmanneville map"))?;
                let x0 = match self.x0 {
                    X0Policy::Fixed(x) => x,
                    X0Policy::Random(_) => uniform_open_closed(&mut rng),
                };
                renewal_orbit_from(pl, x0, n, &mut rng).map_err(numeric_err)
            }
            OrbitMode::Direct => match (self.x0, &self.map) {
                (X0Policy::Random(_), MapSpec::Doubling) => {
                    use rand::Rng;
                    let digits = std::iter::repeat_with(move || rng.gen::<bool>());
                    Ok(doubling_orbit_from_digits(digits, n))
                }
                (X0Policy::Random(_), map) => map.iterate(uniform_open_closed(&mut rng), n).map_err(numeric_err),
                (X0Policy::Fixed(x), map) => map.iterate(x, n).map_err(numeric_err),
            },
        }
    }
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>], metadata: &str) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(numeric_err)?;
    for row in rows {
        w.write_record(row).map_err(numeric_err)?;
    }
    let mut bytes = w.into_inner().map_err(numeric_err)?;
    writeln!(bytes, "# config: {metadata}").map_err(numeric_err)?;
    Ok(bytes)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| numeric_err(format!("cannot write {}: {e}", path.display()))),
        None => io::stdout().write_all(bytes).map_err(numeric_err),
    }
}

/// CSV with columns `n,r,R,eps,x0,map`.
pub fn run_sensitivity(config: &ExperimentConfig) -> Result<Vec<u8>, CliError> {
    let grid = config.grid_usize();
    let n_max = config.n_max()?;
    let map_name = config.map.to_string();
    let blocks: Vec<Vec<Vec<String>>> = (0..config.x0_count())
        .into_par_iter()
        .map(|i| {
            let orbit = config.orbit(i, n_max)?;
            let mut rows = Vec::new();
            for &eps in &config.eps {
                let curve = sensitivity_curve_along(&config.map, &orbit, eps, &grid).map_err(numeric_err)?;
                rows.extend(curve.records.iter().map(|rec| {
                    vec![
                        rec.n.to_string(),
                        rec.r.to_string(),
                        rec.big_r.to_string(),
                        eps.to_string(),
                        orbit.x0.to_string(),
                        map_name.clone(),
                    ]
                }));
            }
            Ok(rows)
        })
        .collect::<Result<_, CliError>>()?;
    csv_bytes(
        &["n", "r", "R", "eps", "x0", "map"],
        &blocks.concat(),
        &config.metadata(),
    )
}

/// CSV with columns `n,bits,estimator,eps,x0,map`.
pub fn run_complexity(config: &ExperimentConfig) -> Result<Vec<u8>, CliError> {
    if config.estimator == Estimator::Codec && config.map.as_pl_manneville().is_none() {
        return Err(config_err(format!(
            "the codec estimator needs a plmanneville map, got {}",
            config.map
        )));
    }
    let grid = config.grid_usize();
    let n_max = config.n_max()?;
    let map_name = config.map.to_string();
    let blocks: Vec<Vec<Vec<String>>> = (0..config.x0_count())
        .into_par_iter()
        .map(|i| {
            let orbit = config.orbit(i, n_max)?;
            let mut rows = Vec::new();
            for &eps in &config.eps {
                let curve =
                    orbit_information_curve(&config.map, &orbit, eps, &grid, config.estimator).map_err(numeric_err)?;
                rows.extend(curve.samples.iter().map(|&(n, bits)| {
                    vec![
                        n.to_string(),
                        bits.to_string(),
                        config.estimator.to_string(),
                        eps.to_string(),
                        orbit.x0.to_string(),
                        map_name.clone(),
                    ]
                }));
            }
            Ok(rows)
        })
        .collect::<Result<_, CliError>>()?;
    csv_bytes(
        &["n", "bits", "estimator", "eps", "x0", "map"],
        &blocks.concat(),
        &config.metadata(),
    )
}

/// CSV with columns `trial,n,N_n,z,a,seed`, sorted by `(trial, n)`.
pub fn run_renewal(config: &ExperimentConfig) -> Result<Vec<u8>, CliError> {
    let pl = config
        .map
        .as_pl_manneville()
        .ok_or_else(|| config_err(format!("renewal needs a plmanneville map, got {}", config.map)))?;
    let model = RenewalModel::from_map(*pl);
    let samples = simulate_nn_grid(&model, &config.n_grid, config.trials, config.seed).map_err(numeric_err)?;
    let mut rows = Vec::with_capacity(config.trials * samples.len());
    for trial in 0..config.trials {
        for s in &samples {
            rows.push(vec![
                trial.to_string(),
                s.n.to_string(),
                s.values[trial].to_string(),
                model.z().to_string(),
                model.a().to_string(),
                config.seed.to_string(),
            ]);
        }
    }
    csv_bytes(&["trial", "n", "N_n", "z", "a", "seed"], &rows, &config.metadata())
}

/// JSON fit report for one column of a CSV against its `n` column. Rows
/// sharing the same `n` are averaged (e.g. over trials or start points).
pub fn run_fit(args: &FitArgs) -> Result<Vec<u8>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(&args.input)
        .map_err(|e| config_err(format!("cannot read {}: {e}", args.input.display())))?;
    let headers = reader.headers().map_err(config_err)?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let n_col = find("n").ok_or_else(|| config_err("input has no `n` column"))?;
    let column = match &args.column {
        Some(c) => c.clone(),
        None => ["bits", "N_n", "R"]
            .into_iter()
            .find(|c| find(c).is_some())
            .ok_or_else(|| config_err("no default column (bits, N_n, R) in input; pass --column"))?
            .to_string(),
    };
    let v_col = find(&column).ok_or_else(|| config_err(format!("input has no column {column:?}")))?;
    let models: Vec<OrderModel> = match &args.models {
        Some(list) => list
            .split(',')
            .map(|m| m.parse().map_err(config_err))
            .collect::<Result<_, _>>()?,
        None => OrderModel::ALL.to_vec(),
    };

    let mut sums: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(config_err)?;
        let n: u64 = parse_field(&record[n_col], "n")?;
        let v: f64 = parse_field(&record[v_col], &column)?;
        let e = sums.entry(n).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let points: Vec<(f64, f64)> = sums.into_iter().map(|(n, (s, c))| (n as f64, s / c as f64)).collect();
    let series = SeriesSample::new(points).map_err(numeric_err)?;
    let fit = fit_order_with(&series, &models).map_err(numeric_err)?;
    let mut bytes = serde_json::to_vec_pretty(&fit.report()).map_err(numeric_err)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (bytes, out) = match &cli.command {
        Command::Sensitivity(args) => {
            let c = ExperimentConfig::resolve(args)?;
            (run_sensitivity(&c)?, c.out)
        }
        Command::Complexity(args) => {
            let c = ExperimentConfig::resolve(args)?;
            (run_complexity(&c)?, c.out)
        }
        Command::Renewal(args) => {
            let c = ExperimentConfig::resolve(args)?;
            (run_renewal(&c)?, c.out)
        }
        Command::Fit(args) => (run_fit(args)?, args.out.clone()),
    };
    emit(out.as_deref(), &bytes)
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("weakchaos: {e}");
            e.exit_code()
        }
    }
}
