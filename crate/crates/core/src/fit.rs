//! Log-log OLS fits of cluster trips against cluster population.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::Survey;

/// Two-sided 95% Student-t quantiles `t(0.975, df)` for `df = 1..=30`.
const T975: [f64; 30] = [
    12.7062, 4.3027, 3.1824, 2.7764, 2.5706, 2.4469, 2.3646, 2.3060, 2.2622, 2.2281, 2.2010,
    2.1788, 2.1604, 2.1448, 2.1314, 2.1199, 2.1098, 2.1009, 2.0930, 2.0860, 2.0796, 2.0739, 2.0687,
    2.0639, 2.0595, 2.0555, 2.0518, 2.0484, 2.0452, 2.0423,
];

/// `t(0.975, df)`, tabulated to 4 decimals for `df <= 30`; 1.96 beyond.
pub fn t975(df: usize) -> f64 {
    assert!(df >= 1, "t quantile needs df >= 1");
    T975.get(df - 1).copied().unwrap_or(1.96)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub label: String,
    pub population: f64,
    pub trips: f64,
}

impl ScalingPoint {
    pub fn new(label: impl Into<String>, population: f64, trips: f64) -> Self {
        ScalingPoint {
            label: label.into(),
            population,
            trips,
        }
    }
}

/// `log10(T) = intercept + beta * log10(P)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub beta: f64,
    pub intercept: f64,
    pub se_beta: f64,
    pub ci95: (f64, f64),
    pub r2: f64,
    pub adj_r2: f64,
    pub n: usize,
}

impl ScalingFit {
    /// `T0 = 10^intercept`.
    pub fn prefactor(&self) -> f64 {
        10f64.powf(self.intercept)
    }
}

pub fn loglog_ols(points: &[ScalingPoint]) -> Result<ScalingFit> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: n });
    }
    for p in points {
        for (field, value) in [("population", p.population), ("trips", p.trips)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositivePoint {
                    label: p.label.clone(),
                    field,
                    value,
                });
            }
        }
    }
    // canonical order so every field is independent of the input order
    let mut xy: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.population.log10(), p.trips.log10()))
        .collect();
    xy.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    if xy.iter().all(|&(x, _)| x == xy[0].0) {
        return Err(Error::DegenerateRegressor);
    }

    let nf = n as f64;
    let xbar = xy.iter().map(|p| p.0).sum::<f64>() / nf;
    let ybar = xy.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &xy {
        let (dx, dy) = (x - xbar, y - ybar);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateRegressor);
    }
    let beta = sxy / sxx;
    let intercept = ybar - beta * xbar;
    let sse: f64 = xy
        .iter()
        .map(|&(x, y)| (y - intercept - beta * x).powi(2))
        .sum();
    let df = n - 2;
    let se_beta = (sse / (df as f64 * sxx)).sqrt();
    let half = t975(df) * se_beta;
    // a constant response is fit exactly by a flat line
    let r2 = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let adj_r2 = 1.0 - (1.0 - r2) * (nf - 1.0) / df as f64;
    Ok(ScalingFit {
        beta,
        intercept,
        se_beta,
        ci95: (beta - half, beta + half),
        r2,
        adj_r2,
        n,
    })
}

pub fn baseline_points(surveys: &[Survey]) -> Vec<ScalingPoint> {
    surveys
        .iter()
        .map(|s| ScalingPoint::new(s.id(), s.total_population(), s.total_trips()))
        .collect()
}

/// One point per survey (total expanded population, total expanded trips).
pub fn baseline_fit(surveys: &[Survey]) -> Result<ScalingFit> {
    loglog_ols(&baseline_points(surveys))
}
