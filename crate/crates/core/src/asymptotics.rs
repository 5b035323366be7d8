//! Finite-data classification of the asymptotic order of positive
//! sequences.
//!
//! Five families are fitted by least squares, all but `Log` in `log2`
//! coordinates:
//!
//! | model          | fitted form                          |
//! |----------------|--------------------------------------|
//! | `Constant`     | `log2 y = b`                         |
//! | `Log`          | `y = a log2 n + b`                   |
//! | `Power`        | `log2 y = b + alpha log2 n`          |
//! | `StretchedExp` | `log2 y = b + c n^alpha`, `0 < alpha < 1` |
//! | `Exp`          | `log2 y = b + lambda n`              |
//!
//! Every model is scored by the RMS of its residuals in `log2 y`, which
//! makes the scores comparable and invariant under `y -> c y`. The
//! selected class is the simplest model (in the order above) whose score is
//! within 5% of the best one.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("need at least {MIN_POINTS} points spanning two decades in n: {0}")]
    InsufficientData(String),
    #[error("value {value} at n = {n} is not positive and finite")]
    NonPositive { n: f64, value: f64 },
    #[error("n must be positive, finite and strictly increasing")]
    BadAbscissa,
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("no models to fit")]
    NoModels,
}

pub const MIN_POINTS: usize = 8;
/// Relative score margin granted to simpler models.
pub const SELECTION_MARGIN: f64 = 0.05;
/// Bucket width used when comparing fitted parameters.
pub const PARAMETER_RESOLUTION: f64 = 0.05;

const SE_ALPHA_MIN: f64 = 0.02;
const SE_ALPHA_MAX: f64 = 0.95;

/// Points `(n, value)` with `n` strictly increasing over at least two
/// decades and every value positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSample {
    points: Vec<(f64, f64)>,
}

impl SeriesSample {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, AsymptoticsError> {
        if points.len() < MIN_POINTS {
            return Err(AsymptoticsError::InsufficientData(format!("{} points", points.len())));
        }
        for &(n, value) in &points {
            if !(n > 0.0 && n.is_finite()) {
                return Err(AsymptoticsError::BadAbscissa);
            }
            if !(value > 0.0 && value.is_finite()) {
                return Err(AsymptoticsError::NonPositive { n, value });
            }
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(AsymptoticsError::BadAbscissa);
        }
        let (lo, hi) = (points[0].0, points[points.len() - 1].0);
        if hi < 100.0 * lo {
            return Err(AsymptoticsError::InsufficientData(format!("n spans only {lo}..{hi}")));
        }
        Ok(Self { points })
    }

    pub fn from_pairs<I, A, B>(pairs: I) -> Result<Self, AsymptoticsError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<f64>,
        B: Into<f64>,
    {
        Self::new(pairs.into_iter().map(|(n, v)| (n.into(), v.into())).collect())
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn n_range(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }
}

/// The candidate families, in order of increasing complexity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OrderModel {
    Constant,
    Log,
    Power,
    StretchedExp,
    Exp,
}

impl OrderModel {
    pub const ALL: [OrderModel; 5] = [
        OrderModel::Constant,
        OrderModel::Log,
        OrderModel::Power,
        OrderModel::StretchedExp,
        OrderModel::Exp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OrderModel::Constant => "constant",
            OrderModel::Log => "log",
            OrderModel::Power => "power",
            OrderModel::StretchedExp => "stretched_exp",
            OrderModel::Exp => "exp",
        }
    }
}

impl fmt::Display for OrderModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OrderModel {
    type Err = AsymptoticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        OrderModel::ALL
            .into_iter()
            .find(|m| m.name() == key || (key == "stretchedexp" && *m == OrderModel::StretchedExp))
            .ok_or_else(|| AsymptoticsError::UnknownModel(s.to_string()))
    }
}

/// A fitted asymptotic class. `b` is the fitted offset (`log2` of the
/// prefactor, or the additive constant for `Log`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum OrderClass {
    Constant { c: f64 },
    Log { a: f64, b: f64 },
    Power { alpha: f64, b: f64 },
    StretchedExp { c: f64, alpha: f64, b: f64 },
    Exp { lambda: f64, b: f64 },
}

impl OrderClass {
    pub fn model(&self) -> OrderModel {
        match self {
            OrderClass::Constant { .. } => OrderModel::Constant,
            OrderClass::Log { .. } => OrderModel::Log,
            OrderClass::Power { .. } => OrderModel::Power,
            OrderClass::StretchedExp { .. } => OrderModel::StretchedExp,
            OrderClass::Exp { .. } => OrderModel::Exp,
        }
    }

    /// The exponent-like parameter that distinguishes classes within a tag.
    pub fn rate(&self) -> Option<f64> {
        match *self {
            OrderClass::Constant { .. } | OrderClass::Log { .. } => None,
            OrderClass::Power { alpha, .. } | OrderClass::StretchedExp { alpha, .. } => Some(alpha),
            OrderClass::Exp { lambda, .. } => Some(lambda),
        }
    }

    pub fn parameters(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match *self {
            OrderClass::Constant { c } => vec![("c", c)],
            OrderClass::Log { a, b } => vec![("a", a), ("b", b)],
            OrderClass::Power { alpha, b } => vec![("alpha", alpha), ("b", b)],
            OrderClass::StretchedExp { c, alpha, b } => vec![("c", c), ("alpha", alpha), ("b", b)],
            OrderClass::Exp { lambda, b } => vec![("lambda", lambda), ("b", b)],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Position in the class lattice and the within-tag sort keys.
    fn key(&self) -> (u8, i64, i64) {
        let bucket = |v: f64| (v / PARAMETER_RESOLUTION).floor() as i64;
        match *self {
            OrderClass::Exp { lambda, .. } if lambda < 0.0 => (0, bucket(lambda), 0),
            OrderClass::StretchedExp { c, alpha, .. } if c < 0.0 => (1, -bucket(alpha), bucket(c)),
            OrderClass::Power { alpha, .. } if alpha < 0.0 => (2, bucket(alpha), 0),
            OrderClass::Constant { .. } => (3, 0, 0),
            OrderClass::Log { .. } => (4, 0, 0),
            OrderClass::Power { alpha, .. } => (5, bucket(alpha), 0),
            OrderClass::StretchedExp { c, alpha, .. } => (6, bucket(alpha), bucket(c)),
            OrderClass::Exp { lambda, .. } => (7, bucket(lambda), 0),
        }
    }
}

impl fmt::Display for OrderClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            OrderClass::Constant { c } => write!(f, "Constant({c:.4})"),
            OrderClass::Log { a, .. } => write!(f, "Log(a={a:.4})"),
            OrderClass::Power { alpha, .. } => write!(f, "Power({alpha:.4})"),
            OrderClass::StretchedExp { c, alpha, .. } => write!(f, "StretchedExp(c={c:.4}, alpha={alpha:.4})"),
            OrderClass::Exp { lambda, .. } => write!(f, "Exp({lambda:.4})"),
        }
    }
}

/// Order on fitted classes: decaying exponentials < decaying stretched
/// exponentials < decaying powers < constants < logs < growing powers <
/// growing stretched exponentials < growing exponentials. Within a tag the
/// rate decides; parameters falling in the same
/// [`PARAMETER_RESOLUTION`]-wide bucket compare equal, which keeps the
/// relation transitive.
pub fn compare_orders(o1: &OrderClass, o2: &OrderClass) -> Ordering {
    o1.key().cmp(&o2.key())
}

/// Selected class plus the score of every candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub class: OrderClass,
    /// RMS residual in `log2 y`; `None` when the model could not be fitted.
    pub residuals: BTreeMap<OrderModel, Option<f64>>,
    pub candidates: BTreeMap<OrderModel, OrderClass>,
    pub n_range: (f64, f64),
    pub points: usize,
}

/// JSON-friendly view of an [`OrderFit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub tag: String,
    pub parameters: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, Option<f64>>,
    pub n_range: [f64; 2],
    pub points: usize,
}

impl OrderFit {
    pub fn report(&self) -> FitReport {
        FitReport {
            tag: self.class.model().name().to_string(),
            parameters: self.class.parameters(),
            residuals: self.residuals.iter().map(|(m, r)| (m.name().to_string(), *r)).collect(),
            n_range: [self.n_range.0, self.n_range.1],
            points: self.points,
        }
    }
}

/// Least-squares line `y = b + m x`; returns `(b, m, rms)`.
fn line_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let len = x.len() as f64;
    let mx = x.iter().sum::<f64>() / len;
    let my = y.iter().sum::<f64>() / len;
    let sxx: f64 = x.iter().map(|xi| (xi - mx) * (xi - mx)).sum();
    if !(sxx > 0.0) || !sxx.is_finite() {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let m = sxy / sxx;
    let b = my - m * mx;
    let rms = rms(x.iter().zip(y).map(|(xi, yi)| yi - b - m * xi));
    Some((b, m, rms))
}

fn rms(residuals: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for r in residuals {
        sum += r * r;
        count += 1;
    }
    (sum / count as f64).sqrt()
}

struct Coordinates {
    n: Vec<f64>,
    log_n: Vec<f64>,
    value: Vec<f64>,
    log_value: Vec<f64>,
}

fn fit_constant(c: &Coordinates) -> (OrderClass, f64) {
    let b = c.log_value.iter().sum::<f64>() / c.log_value.len() as f64;
    let score = rms(c.log_value.iter().map(|y| y - b));
    (OrderClass::Constant { c: b.exp2() }, score)
}

fn fit_log(c: &Coordinates) -> Option<(OrderClass, f64)> {
    let (b, a, _) = line_fit(&c.log_n, &c.value)?;
    let mut residuals = Vec::with_capacity(c.n.len());
    for (ln, ly) in c.log_n.iter().zip(&c.log_value) {
        let predicted = a * ln + b;
        if !(predicted > 0.0) {
            return None;
        }
        residuals.push(ly - predicted.log2());
    }
    Some((OrderClass::Log { a, b }, rms(residuals.into_iter())))
}

fn fit_power(c: &Coordinates) -> Option<(OrderClass, f64)> {
    let (b, alpha, score) = line_fit(&c.log_n, &c.log_value)?;
    Some((OrderClass::Power { alpha, b }, score))
}

fn fit_exp(c: &Coordinates) -> Option<(OrderClass, f64)> {
    let (b, lambda, score) = line_fit(&c.n, &c.log_value)?;
    Some((OrderClass::Exp { lambda, b }, score))
}

fn fit_stretched(c: &Coordinates) -> Option<(OrderClass, f64)> {
    let at = |alpha: f64| -> Option<(f64, f64, f64)> {
        let x: Vec<f64> = c.n.iter().map(|n| n.powf(alpha)).collect();
        line_fit(&x, &c.log_value)
    };
    let score = |alpha: f64| at(alpha).map_or(f64::INFINITY, |f| f.2);

    const GRID: usize = 94;
    let step = (SE_ALPHA_MAX - SE_ALPHA_MIN) / (GRID - 1) as f64;
    let grid: Vec<f64> = (0..GRID).map(|i| SE_ALPHA_MIN + step * i as f64).collect();
    let best = (0..GRID).min_by(|&i, &j| score(grid[i]).total_cmp(&score(grid[j])))?;
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(GRID - 1)]);
    // Golden-section refinement inside the bracketing grid cell.
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (score(x1), score(x2));
    for _ in 0..60 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = score(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = score(x2);
        }
    }
    let candidates = [grid[best], x1, x2];
    let alpha = candidates.into_iter().min_by(|&p, &q| score(p).total_cmp(&score(q)))?;
    let (b, c_coef, s) = at(alpha)?;
    s.is_finite()
        .then_some((OrderClass::StretchedExp { c: c_coef, alpha, b }, s))
}

pub fn fit_order(series: &SeriesSample) -> OrderFit {
    fit_order_with(series, &OrderModel::ALL).expect("the full model list is nonempty")
}

/// [`fit_order`] restricted to `models`.
pub fn fit_order_with(series: &SeriesSample, models: &[OrderModel]) -> Result<OrderFit, AsymptoticsError> {
    if models.is_empty() {
        return Err(AsymptoticsError::NoModels);
    }
    let pts = series.points();
    let coords = Coordinates {
        n: pts.iter().map(|p| p.0).collect(),
        log_n: pts.iter().map(|p| p.0.log2()).collect(),
        value: pts.iter().map(|p| p.1).collect(),
        log_value: pts.iter().map(|p| p.1.log2()).collect(),
    };
    let mut residuals = BTreeMap::new();
    let mut candidates = BTreeMap::new();
    for &model in models {
        let fitted = match model {
            OrderModel::Constant => Some(fit_constant(&coords)),
            OrderModel::Log => fit_log(&coords),
            OrderModel::Power => fit_power(&coords),
            OrderModel::StretchedExp => fit_stretched(&coords),
            OrderModel::Exp => fit_exp(&coords),
        };
        residuals.insert(model, fitted.map(|f| f.1));
        if let Some((class, _)) = fitted {
            candidates.insert(model, class);
        }
    }
    let best = residuals.values().flatten().copied().fold(f64::INFINITY, f64::min);
    let threshold = best * (1.0 + SELECTION_MARGIN) + 1e-9;
    let chosen = residuals
        .iter()
        .find(|(_, r)| r.is_some_and(|r| r <= threshold))
        .map(|(m, _)| *m)
        .ok_or_else(|| AsymptoticsError::InsufficientData("no model could be fitted".into()))?;
    Ok(OrderFit {
        class: candidates[&chosen],
        residuals,
        candidates,
        n_range: series.n_range(),
        points: pts.len(),
    })
}
