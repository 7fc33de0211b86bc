//! Threshold grid, urban/rural partitions, the sensitivity sweep and the
//! three-class zone classification.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::fit::{loglog_ols, ScalingFit, ScalingPoint};
use crate::ingest::Survey;
use crate::spectral::CentralityRanking;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogNormalFit {
    pub mu: f64,
    pub sigma: f64,
    pub n: usize,
}

impl LogNormalFit {
    pub fn is_degenerate(&self) -> bool {
        self.sigma == 0.0
    }
}

/// Maximum-likelihood log-normal: mean and population standard deviation of
/// `ln psi`. All inputs must be strictly positive.
pub fn fit_lognormal(psis: &[f64]) -> Result<LogNormalFit> {
    if let Some(bad) = psis.iter().find(|&&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "log-normal fit needs positive finite values, got {bad}"
        )));
    }
    if psis.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: psis.len(),
        });
    }
    let n = psis.len() as f64;
    let logs: Vec<f64> = psis.iter().map(|p| p.ln()).collect();
    let mu = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n;
    let sigma = if logs.iter().all(|&l| l == logs[0]) {
        0.0
    } else {
        var.sqrt()
    };
    Ok(LogNormalFit {
        mu,
        sigma,
        n: psis.len(),
    })
}

/// Positive scores of all rankings, plus the number of zero scores dropped.
pub fn pooled_positive_psi(rankings: &[CentralityRanking]) -> (Vec<f64>, usize) {
    let mut out = Vec::new();
    let mut zeros = 0;
    for r in rankings {
        for &p in &r.psi {
            if p > 0.0 {
                out.push(p);
            } else {
                zeros += 1;
            }
        }
    }
    (out, zeros)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSpacing {
    /// Evenly spaced probability levels mapped through the log-normal quantile.
    #[default]
    Quantile,
    /// Evenly spaced in `ln psi` between the quantiles at `q_lo` and `q_hi`.
    LogEven,
}

impl GridSpacing {
    pub fn as_str(self) -> &'static str {
        match self {
            GridSpacing::Quantile => "quantile",
            GridSpacing::LogEven => "log-even",
        }
    }
}

impl std::str::FromStr for GridSpacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantile" => Ok(GridSpacing::Quantile),
            "log-even" => Ok(GridSpacing::LogEven),
            other => Err(Error::InvalidArgument(format!(
                "unknown grid spacing '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdGrid {
    pub values: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
    /// Probability level of each threshold under the fitted log-normal.
    pub levels: Vec<f64>,
    pub spacing: GridSpacing,
    pub warnings: Vec<String>,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub fn build_grid(
    mu: f64,
    sigma: f64,
    n_points: usize,
    q_lo: f64,
    q_hi: f64,
    spacing: GridSpacing,
) -> Result<ThresholdGrid> {
    if n_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid needs at least 2 points, got {n_points}"
        )));
    }
    if !(0.0 < q_lo && q_lo < q_hi && q_hi < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < q_lo < q_hi < 1, got q_lo={q_lo}, q_hi={q_hi}"
        )));
    }
    if !(mu.is_finite() && sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bad log-normal parameters mu={mu}, sigma={sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(ThresholdGrid {
            values: vec![mu.exp()],
            mu,
            sigma,
            levels: vec![0.5],
            spacing,
            warnings: vec!["degenerate log-normal (sigma = 0): single-threshold grid".into()],
        });
    }
    let norm = std_normal();
    let step = 1.0 / (n_points - 1) as f64;
    let (values, levels) = match spacing {
        GridSpacing::Quantile => {
            let levels: Vec<f64> = (0..n_points)
                .map(|k| q_lo + (q_hi - q_lo) * k as f64 * step)
                .collect();
            let values: Vec<f64> = levels
                .iter()
                .map(|&q| (mu + sigma * norm.inverse_cdf(q)).exp())
                .collect();
            (values, levels)
        }
        GridSpacing::LogEven => {
            let lo = mu + sigma * norm.inverse_cdf(q_lo);
            let hi = mu + sigma * norm.inverse_cdf(q_hi);
            let logs: Vec<f64> = (0..n_points)
                .map(|k| lo + (hi - lo) * k as f64 * step)
                .collect();
            let levels = logs.iter().map(|&l| norm.cdf((l - mu) / sigma)).collect();
            (logs.iter().map(|l| l.exp()).collect(), levels)
        }
    };
    let mut warnings = Vec::new();
    if values.windows(2).any(|w| w[1] <= w[0]) {
        warnings.push("grid thresholds not strictly increasing (sigma too small)".into());
    }
    Ok(ThresholdGrid {
        values,
        mu,
        sigma,
        levels,
        spacing,
        warnings,
    })
}

/// How a directed trip's weight is credited to the urban and rural clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribution {
    /// Full weight to the origin zone's cluster.
    #[default]
    Origin,
    /// Half to each endpoint's cluster.
    Split,
}

impl Attribution {
    pub fn as_str(&self) -> &'static str {
        match self {
            Attribution::Origin => "origin",
            Attribution::Split => "split",
        }
    }
}

impl std::str::FromStr for Attribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "origin" => Ok(Attribution::Origin),
            "split" => Ok(Attribution::Split),
            other => Err(Error::InvalidArgument(format!(
                "unknown attribution rule '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub survey_id: String,
    pub threshold: f64,
    pub urban_zones: Vec<String>,
    pub rural_zones: Vec<String>,
    pub urban_population: f64,
    pub urban_trips: f64,
    pub rural_population: f64,
    pub rural_trips: f64,
}

fn check_pair(ranking: &CentralityRanking, survey: &Survey) -> Result<()> {
    if ranking.survey_id != survey.id() {
        return Err(Error::InvalidArgument(format!(
            "ranking for '{}' paired with survey '{}'",
            ranking.survey_id,
            survey.id()
        )));
    }
    if ranking.zones != survey.zones() {
        return Err(Error::InvalidArgument(format!(
            "ranking and survey '{}' disagree on zone order",
            survey.id()
        )));
    }
    Ok(())
}

/// Urban zones are those with `psi >= threshold`. Sums run in zone order
/// (populations) and sorted trip-key order (trips).
pub fn partition_at(
    threshold: f64,
    ranking: &CentralityRanking,
    survey: &Survey,
    attribution: Attribution,
) -> Result<Partition> {
    check_pair(ranking, survey)?;
    let urban: Vec<bool> = ranking.psi.iter().map(|&p| p >= threshold).collect();
    let mut part = Partition {
        survey_id: survey.id().to_string(),
        threshold,
        urban_zones: Vec::new(),
        rural_zones: Vec::new(),
        urban_population: 0.0,
        urban_trips: 0.0,
        rural_population: 0.0,
        rural_trips: 0.0,
    };
    for (i, z) in survey.zones().iter().enumerate() {
        let pop = survey.population(z).unwrap_or(0.0);
        if urban[i] {
            part.urban_zones.push(z.clone());
            part.urban_population += pop;
        } else {
            part.rural_zones.push(z.clone());
            part.rural_population += pop;
        }
    }
    let is_urban = |z: &str| urban[survey.zone_index(z).expect("trip endpoint is a zone")];
    for (o, d, w) in survey.directed_trips() {
        match attribution {
            Attribution::Origin => {
                if is_urban(o) {
                    part.urban_trips += w;
                } else {
                    part.rural_trips += w;
                }
            }
            Attribution::Split => {
                for z in [o, d] {
                    if is_urban(z) {
                        part.urban_trips += 0.5 * w;
                    } else {
                        part.rural_trips += 0.5 * w;
                    }
                }
            }
        }
    }
    Ok(part)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Urban,
    Rural,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Urban => "urban",
            Regime::Rural => "rural",
        }
    }
}

/// Scaling points for one regime, dropping clusters with zero population or
/// zero trips. Returns the points and flags describing what was dropped.
pub fn regime_points(partitions: &[Partition], regime: Regime) -> (Vec<ScalingPoint>, Vec<String>) {
    let mut points = Vec::new();
    let (mut empty, mut zero_pop, mut zero_trips) = (0, 0, 0);
    for p in partitions {
        let (zones, pop, trips) = match regime {
            Regime::Urban => (&p.urban_zones, p.urban_population, p.urban_trips),
            Regime::Rural => (&p.rural_zones, p.rural_population, p.rural_trips),
        };
        if zones.is_empty() {
            empty += 1;
        } else if pop <= 0.0 {
            zero_pop += 1;
        } else if trips <= 0.0 {
            zero_trips += 1;
        } else {
            points.push(ScalingPoint::new(p.survey_id.clone(), pop, trips));
            continue;
        }
    }
    let name = regime.as_str();
    let mut flags = Vec::new();
    if empty > 0 {
        flags.push(format!("{name} cluster empty in {empty} surveys"));
    }
    if zero_pop > 0 {
        flags.push(format!(
            "{name} excluded: zero population in {zero_pop} surveys"
        ));
    }
    if zero_trips > 0 {
        flags.push(format!(
            "{name} excluded: zero trips in {zero_trips} surveys"
        ));
    }
    (points, flags)
}

/// Fits a regime when at least `min_points` valid points exist; otherwise
/// (or when the fit itself is degenerate) the reason lands in `flags`.
pub fn fit_regime(
    partitions: &[Partition],
    regime: Regime,
    min_points: usize,
) -> (Option<ScalingFit>, usize, Vec<String>) {
    let (points, mut flags) = regime_points(partitions, regime);
    let n = points.len();
    let name = regime.as_str();
    if n < min_points.max(3) {
        flags.push(format!(
            "{name} fit skipped: {n} valid points < {}",
            min_points.max(3)
        ));
        return (None, n, flags);
    }
    match loglog_ols(&points) {
        Ok(f) => (Some(f), n, flags),
        Err(e) => {
            flags.push(format!("{name} fit failed: {e}"));
            (None, n, flags)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub urban_fit: Option<ScalingFit>,
    pub rural_fit: Option<ScalingFit>,
    pub n_urban_points: usize,
    pub n_rural_points: usize,
    pub flags: Vec<String>,
}

impl SweepRow {
    pub fn has_both_fits(&self) -> bool {
        self.urban_fit.is_some() && self.rural_fit.is_some()
    }
}

/// Pairs each survey with its ranking, sorted by survey id.
pub fn pair_by_survey<'a>(
    rankings: &'a [CentralityRanking],
    surveys: &'a [Survey],
) -> Result<Vec<(&'a CentralityRanking, &'a Survey)>> {
    let mut by_id: BTreeMap<&str, &CentralityRanking> = BTreeMap::new();
    for r in rankings {
        if by_id.insert(&r.survey_id, r).is_some() {
            return Err(Error::DuplicateSurvey(r.survey_id.clone()));
        }
    }
    let mut pairs = Vec::with_capacity(surveys.len());
    for s in surveys {
        let r = by_id
            .get(s.id())
            .ok_or_else(|| Error::MissingRanking(s.id().to_string()))?;
        check_pair(r, s)?;
        pairs.push((*r, s));
    }
    pairs.sort_by(|a, b| a.1.id().cmp(b.1.id()));
    if pairs.windows(2).any(|w| w[0].1.id() == w[1].1.id()) {
        return Err(Error::DuplicateSurvey(pairs[0].1.id().to_string()));
    }
    Ok(pairs)
}

pub fn partitions_at(
    threshold: f64,
    pairs: &[(&CentralityRanking, &Survey)],
    attribution: Attribution,
) -> Result<Vec<Partition>> {
    pairs
        .iter()
        .map(|(r, s)| partition_at(threshold, r, s, attribution))
        .collect()
}

/// One row per grid threshold. Thresholds run in parallel; each row's points
/// are assembled in survey-id order so output does not depend on scheduling.
pub fn sweep(
    grid: &ThresholdGrid,
    rankings: &[CentralityRanking],
    surveys: &[Survey],
    min_points: usize,
    attribution: Attribution,
) -> Result<Vec<SweepRow>> {
    let pairs = pair_by_survey(rankings, surveys)?;
    grid.values
        .par_iter()
        .map(|&threshold| {
            let parts = partitions_at(threshold, &pairs, attribution)?;
            let (urban_fit, n_urban_points, mut flags) =
                fit_regime(&parts, Regime::Urban, min_points);
            let (rural_fit, n_rural_points, rflags) = fit_regime(&parts, Regime::Rural, min_points);
            flags.extend(rflags);
            Ok(SweepRow {
                threshold,
                urban_fit,
                rural_fit,
                n_urban_points,
                n_rural_points,
                flags,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ZoneClass {
    Rural,
    Urban,
    Central,
}

impl ZoneClass {
    pub fn of(psi: f64, psi_a: f64, psi_b: f64) -> Self {
        if psi >= psi_b {
            ZoneClass::Central
        } else if psi >= psi_a {
            ZoneClass::Urban
        } else {
            ZoneClass::Rural
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ZoneClass::Rural => "rural",
            ZoneClass::Urban => "urban",
            ZoneClass::Central => "central",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifiedZone {
    pub survey_id: String,
    pub zone_id: String,
    pub psi: f64,
    pub class: ZoneClass,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub rural: usize,
    pub urban: usize,
    pub central: usize,
}

impl ClassCounts {
    fn add(&mut self, c: ZoneClass) {
        match c {
            ZoneClass::Rural => self.rural += 1,
            ZoneClass::Urban => self.urban += 1,
            ZoneClass::Central => self.central += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneClassification {
    pub psi_a: f64,
    pub psi_b: f64,
    pub zones: Vec<ClassifiedZone>,
    pub per_survey: BTreeMap<String, ClassCounts>,
    pub national: ClassCounts,
}

/// rural: `psi < psi_a`; urban: `psi_a <= psi < psi_b`; central: `psi >= psi_b`.
pub fn classify(
    psi_a: f64,
    psi_b: f64,
    rankings: &[CentralityRanking],
) -> Result<ZoneClassification> {
    if psi_a.is_nan() || psi_b.is_nan() || psi_a >= psi_b {
        return Err(Error::InvalidArgument(format!(
            "classification needs psi_a < psi_b, got {psi_a} and {psi_b}"
        )));
    }
    let mut sorted: Vec<&CentralityRanking> = rankings.iter().collect();
    sorted.sort_by(|a, b| a.survey_id.cmp(&b.survey_id));
    let mut zones = Vec::new();
    let mut per_survey = BTreeMap::new();
    let mut national = ClassCounts::default();
    for r in sorted {
        if per_survey.contains_key(&r.survey_id) {
            return Err(Error::DuplicateSurvey(r.survey_id.clone()));
        }
        let mut counts = ClassCounts::default();
        for (z, &psi) in r.zones.iter().zip(&r.psi) {
            let class = ZoneClass::of(psi, psi_a, psi_b);
            counts.add(class);
            national.add(class);
            zones.push(ClassifiedZone {
                survey_id: r.survey_id.clone(),
                zone_id: z.clone(),
                psi,
                class,
            });
        }
        per_survey.insert(r.survey_id.clone(), counts);
    }
    Ok(ZoneClassification {
        psi_a,
        psi_b,
        zones,
        per_survey,
        national,
    })
}

/// Rural/urban population split at both thresholds, one row per survey.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationSplitRow {
    pub survey_id: String,
    pub rural_at_a: f64,
    pub urban_at_a: f64,
    pub rural_at_b: f64,
    pub urban_at_b: f64,
    pub counts: ClassCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationSplit {
    pub rows: Vec<PopulationSplitRow>,
    pub total: PopulationSplitRow,
}

pub fn population_split(
    classification: &ZoneClassification,
    rankings: &[CentralityRanking],
    surveys: &[Survey],
    attribution: Attribution,
) -> Result<PopulationSplit> {
    let pairs = pair_by_survey(rankings, surveys)?;
    let mut rows = Vec::new();
    let mut total = PopulationSplitRow {
        survey_id: "TOTAL".into(),
        rural_at_a: 0.0,
        urban_at_a: 0.0,
        rural_at_b: 0.0,
        urban_at_b: 0.0,
        counts: classification.national,
    };
    for (r, s) in pairs {
        let a = partition_at(classification.psi_a, r, s, attribution)?;
        let b = partition_at(classification.psi_b, r, s, attribution)?;
        total.rural_at_a += a.rural_population;
        total.urban_at_a += a.urban_population;
        total.rural_at_b += b.rural_population;
        total.urban_at_b += b.urban_population;
        rows.push(PopulationSplitRow {
            survey_id: s.id().to_string(),
            rural_at_a: a.rural_population,
            urban_at_a: a.urban_population,
            rural_at_b: b.rural_population,
            urban_at_b: b.urban_population,
            counts: classification
                .per_survey
                .get(s.id())
                .copied()
                .unwrap_or_default(),
        });
    }
    Ok(PopulationSplit { rows, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{assemble_survey, parse_population, parse_trips};
    use crate::spectral::ScalingMode;

    #[test]
    fn lognormal_two_point() {
        let f = fit_lognormal(&[1f64.exp(), 3f64.exp()]).unwrap();
        assert!((f.mu - 2.0).abs() < 1e-15);
        assert!((f.sigma - 1.0).abs() < 1e-15);
        assert!(!f.is_degenerate());
    }

    #[test]
    fn lognormal_equal_values_degenerate() {
        let f = fit_lognormal(&[7.3; 5]).unwrap();
        assert_eq!(f.sigma, 0.0);
        assert!(f.is_degenerate());
        assert!(fit_lognormal(&[1.0]).is_err());
        assert!(fit_lognormal(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn grid_standard_quartiles() {
        let g = build_grid(0.0, 1.0, 3, 0.25, 0.75, GridSpacing::Quantile).unwrap();
        // Phi^-1(0.75) = 0.6744897501960817
        let z = 0.674_489_750_196_081_7_f64;
        assert!((g.values[0] - (-z).exp()).abs() < 1e-12);
        assert!((g.values[1] - 1.0).abs() < 1e-12);
        assert!((g.values[2] - z.exp()).abs() < 1e-12);
        assert_eq!(g.levels, [0.25, 0.5, 0.75]);
    }

    #[test]
    fn grid_median_is_geometric_mean() {
        let g = build_grid(2.5, 0.7, 3, 0.4, 0.6, GridSpacing::Quantile).unwrap();
        assert!((g.values[1] - 2.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn grid_degenerate_and_errors() {
        let g = build_grid(1.0, 0.0, 50, 0.02, 0.98, GridSpacing::Quantile).unwrap();
        assert_eq!(g.values, [1f64.exp()]);
        assert_eq!(g.warnings.len(), 1);
        assert!(build_grid(0.0, 1.0, 1, 0.1, 0.9, GridSpacing::Quantile).is_err());
        assert!(build_grid(0.0, 1.0, 5, 0.9, 0.1, GridSpacing::Quantile).is_err());
        assert!(build_grid(0.0, 1.0, 5, 0.0, 0.9, GridSpacing::Quantile).is_err());
    }

    #[test]
    fn grid_log_even() {
        let g = build_grid(0.0, 1.0, 5, 0.1, 0.9, GridSpacing::LogEven).unwrap();
        let logs: Vec<f64> = g.values.iter().map(|v| v.ln()).collect();
        let d = logs[1] - logs[0];
        for w in logs.windows(2) {
            assert!((w[1] - w[0] - d).abs() < 1e-12);
        }
        assert!((g.levels[0] - 0.1).abs() < 1e-9 && (g.levels[4] - 0.9).abs() < 1e-9);
        assert!((g.levels[2] - 0.5).abs() < 1e-12);
    }

    fn fixture() -> (Survey, CentralityRanking) {
        let t = parse_trips(
            "origin,destination,weight\na,b,10\nb,a,5\nb,c,3\nc,c,4\nd,a,1".as_bytes(),
            "s",
        )
        .unwrap();
        let p =
            parse_population("zone,population\na,100\nb,50\nc,20\nd,5".as_bytes(), "s").unwrap();
        let s = assemble_survey(&t, &p, "s").unwrap();
        let r = CentralityRanking {
            survey_id: "s".into(),
            zones: s.zones().to_vec(),
            lambda: 1.0,
            x: vec![0.0; 4],
            psi: vec![9.0, 5.0, 2.0, 0.0],
            scaling_mode: ScalingMode::Unit2,
            iterations: 0,
            residual: 0.0,
            warnings: vec![],
        };
        (s, r)
    }

    #[test]
    fn partition_extremes_and_ties() {
        let (s, r) = fixture();
        let all = partition_at(0.0, &r, &s, Attribution::Origin).unwrap();
        assert_eq!(all.rural_zones.len(), 0);
        assert_eq!((all.rural_population, all.rural_trips), (0.0, 0.0));
        assert_eq!(all.urban_population, s.total_population());
        assert_eq!(all.urban_trips, s.total_trips());

        let none = partition_at(100.0, &r, &s, Attribution::Origin).unwrap();
        assert!(none.urban_zones.is_empty());
        assert_eq!(none.rural_population, 175.0);

        let tie = partition_at(5.0, &r, &s, Attribution::Origin).unwrap();
        assert_eq!(tie.urban_zones, ["a", "b"]);
        assert_eq!(tie.urban_population, 150.0);
        // origin rule: a->b 10, b->a 5, b->c 3 urban; c->c 4, d->a 1 rural
        assert_eq!(tie.urban_trips, 18.0);
        assert_eq!(tie.rural_trips, 5.0);

        let split = partition_at(5.0, &r, &s, Attribution::Split).unwrap();
        // b->c and d->a each straddle the boundary
        assert_eq!(split.urban_trips, 15.0 + 1.5 + 0.5);
        assert_eq!(split.rural_trips, 1.5 + 4.0 + 0.5);
    }

    #[test]
    fn partition_rejects_mismatch() {
        let (s, mut r) = fixture();
        r.zones.swap(0, 1);
        assert!(partition_at(1.0, &r, &s, Attribution::Origin).is_err());
    }

    #[test]
    fn classify_three_classes() {
        let r = CentralityRanking {
            survey_id: "s".into(),
            zones: vec!["a".into(), "b".into(), "c".into()],
            lambda: 1.0,
            x: vec![0.0; 3],
            psi: vec![5.0, 200.0, 500.0],
            scaling_mode: ScalingMode::Unit2,
            iterations: 0,
            residual: 0.0,
            warnings: vec![],
        };
        let c = classify(138.0, 363.0, std::slice::from_ref(&r)).unwrap();
        let classes: Vec<_> = c.zones.iter().map(|z| z.class).collect();
        assert_eq!(
            classes,
            [ZoneClass::Rural, ZoneClass::Urban, ZoneClass::Central]
        );
        assert_eq!(
            c.national,
            ClassCounts {
                rural: 1,
                urban: 1,
                central: 1
            }
        );

        let all_central = classify(1.0, 2.0, std::slice::from_ref(&r)).unwrap();
        assert_eq!(all_central.national.central, 3);
        assert!(classify(2.0, 2.0, std::slice::from_ref(&r)).is_err());
        assert!(classify(3.0, 2.0, std::slice::from_ref(&r)).is_err());
    }

    #[test]
    fn regime_points_flags() {
        let (s, r) = fixture();
        let parts = vec![partition_at(0.0, &r, &s, Attribution::Origin).unwrap()];
        let (pts, flags) = regime_points(&parts, Regime::Rural);
        assert!(pts.is_empty());
        assert_eq!(flags, ["rural cluster empty in 1 surveys"]);
        let (fit, n, flags) = fit_regime(&parts, Regime::Urban, 3);
        assert!(fit.is_none());
        assert_eq!(n, 1);
        assert!(flags.iter().any(|f| f.contains("skipped")));
    }

    #[test]
    fn population_split_totals() {
        let (s, r) = fixture();
        let c = classify(3.0, 6.0, std::slice::from_ref(&r)).unwrap();
        let split = population_split(
            &c,
            std::slice::from_ref(&r),
            std::slice::from_ref(&s),
            Attribution::Origin,
        )
        .unwrap();
        assert_eq!(split.rows[0].urban_at_a, 150.0);
        assert_eq!(split.rows[0].rural_at_a, 25.0);
        assert_eq!(split.rows[0].urban_at_b, 100.0);
        assert_eq!(split.total.rural_at_b, 75.0);
    }
}
