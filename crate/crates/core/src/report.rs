//! Run orchestration and every file the command line emits.
//!
//! Outputs are staged in memory and land in the output directory through a
//! temp-file-then-rename step, so a failed command leaves no partial files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fit::{baseline_fit, ScalingFit};
use crate::fmt_num;
use crate::graph::build_network;
use crate::ingest::{
    load_manifest, load_survey, validate_survey, ManifestEntry, Survey, ValidationReport,
};
use crate::spectral::{
    national_ranking, rank_network, CentralityRanking, EigenOptions, NationalRanking, ScalingMode,
};
use crate::sweep::{
    build_grid, classify, fit_lognormal, fit_regime, pair_by_survey, partitions_at,
    pooled_positive_psi, population_split, sweep, Attribution, GridSpacing, LogNormalFit,
    PopulationSplit, Regime, SweepRow, ThresholdGrid, ZoneClassification,
};
use crate::synth::{generate_system_detailed, write_fixture, SynthParams};

pub const TOOL_NAME: &str = "urbanbound";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default thresholds of interest, `10^2.14` and `10^2.56` trips.
///
/// ```
/// use urbanbound::report::{DEFAULT_PSI_A, DEFAULT_PSI_B};
/// assert!((10f64.powf(2.14) - DEFAULT_PSI_A).abs() <= 0.1);
/// assert!((10f64.powf(2.56) - DEFAULT_PSI_B).abs() <= 0.5);
/// ```
pub const DEFAULT_PSI_A: f64 = 138.0;
pub const DEFAULT_PSI_B: f64 = 363.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub grid_points: usize,
    pub q_lo: f64,
    pub q_hi: f64,
    pub grid_spacing: GridSpacing,
    pub scaling_mode: ScalingMode,
    pub attribution: Attribution,
    pub psi_a: f64,
    pub psi_b: f64,
    pub min_points: usize,
    pub geometry: Option<PathBuf>,
    pub deterministic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: PathBuf::from("surveys.csv"),
            out_dir: PathBuf::from("."),
            tol: 1e-10,
            max_iter: 100_000,
            seed: 42,
            grid_points: 50,
            q_lo: 0.02,
            q_hi: 0.98,
            grid_spacing: GridSpacing::Quantile,
            scaling_mode: ScalingMode::Unit2,
            attribution: Attribution::Origin,
            psi_a: DEFAULT_PSI_A,
            psi_b: DEFAULT_PSI_B,
            min_points: 3,
            geometry: None,
            deterministic: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.psi_a.is_nan() || self.psi_b.is_nan() || self.psi_a >= self.psi_b {
            return bad(format!(
                "psi_a ({}) must be below psi_b ({})",
                self.psi_a, self.psi_b
            ));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.grid_points < 2 {
            return bad(format!(
                "grid needs at least 2 points, got {}",
                self.grid_points
            ));
        }
        if !(0.0 < self.q_lo && self.q_lo < self.q_hi && self.q_hi < 1.0) {
            return bad(format!(
                "need 0 < q_lo < q_hi < 1, got {} and {}",
                self.q_lo, self.q_hi
            ));
        }
        if self.min_points < 3 {
            return bad(format!(
                "min_points must be at least 3, got {}",
                self.min_points
            ));
        }
        Ok(())
    }

    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
        }
    }

    /// Analysis parameters only; paths and the deterministic flag excluded.
    pub fn analysis_json(&self) -> Value {
        json!({
            "tol": self.tol,
            "max_iter": self.max_iter,
            "seed": self.seed,
            "grid_points": self.grid_points,
            "q_lo": self.q_lo,
            "q_hi": self.q_hi,
            "grid_spacing": self.grid_spacing,
            "scaling_mode": self.scaling_mode,
            "attribution": self.attribution,
            "psi_a": self.psi_a,
            "psi_b": self.psi_b,
            "min_points": self.min_points,
        })
    }

    /// SHA-256 of the analysis parameters, hex encoded.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.analysis_json().to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn timestamp(&self) -> u64 {
        if self.deterministic {
            0
        } else {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        }
    }
}

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    InputError = 2,
    SolverFailure = 3,
    NoValidFits = 4,
}

#[derive(Debug)]
pub struct CommandError {
    pub status: ExitStatus,
    pub message: String,
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        let status = if e.is_input_error() {
            ExitStatus::InputError
        } else {
            ExitStatus::SolverFailure
        };
        CommandError {
            status,
            message: e.to_string(),
        }
    }
}

pub type CommandResult = std::result::Result<(), CommandError>;

/// Files waiting to be committed to one directory.
#[derive(Debug, Default)]
pub struct StagedOutputs {
    files: Vec<(String, Vec<u8>)>,
}

impl StagedOutputs {
    pub fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|f| f.0.as_str())
    }

    /// Writes every file to a temp name, then renames them all into place.
    pub fn commit(self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let pid = std::process::id();
        let mut temps = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.{pid}.tmp"));
            if let Err(e) = fs::write(&tmp, bytes) {
                for (t, _) in &temps {
                    let _ = fs::remove_file(t);
                }
                let _ = fs::remove_file(&tmp);
                return Err(Error::io(tmp, e));
            }
            temps.push((tmp, dir.join(name)));
        }
        for (i, (tmp, dest)) in temps.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, dest) {
                for (t, _) in &temps[i..] {
                    let _ = fs::remove_file(t);
                }
                return Err(Error::io(dest, e));
            }
        }
        Ok(())
    }
}

pub fn load_surveys(cfg: &RunConfig) -> Result<(Vec<ManifestEntry>, Vec<Survey>)> {
    let manifest = load_manifest(&cfg.manifest)?;
    if manifest.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{}: manifest lists no surveys",
            cfg.manifest.display()
        )));
    }
    let surveys = manifest
        .par_iter()
        .map(load_survey)
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, surveys))
}

/// One ranking per survey, in input order. Surveys run in parallel.
pub fn rank_all(surveys: &[Survey], cfg: &RunConfig) -> Result<Vec<CentralityRanking>> {
    let opts = cfg.eigen_options();
    surveys
        .par_iter()
        .map(|s| rank_network(s.id(), &build_network(s), &opts, cfg.scaling_mode))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub manifest: Vec<ManifestEntry>,
    pub surveys: Vec<Survey>,
    pub validations: Vec<ValidationReport>,
    pub rankings: Vec<CentralityRanking>,
    pub national: NationalRanking,
}

pub fn analyze(cfg: &RunConfig) -> Result<Analysis> {
    cfg.validate()?;
    let (manifest, surveys) = load_surveys(cfg)?;
    let validations = surveys.iter().map(validate_survey).collect();
    let rankings = rank_all(&surveys, cfg)?;
    let national = national_ranking(&rankings)?;
    Ok(Analysis {
        manifest,
        surveys,
        validations,
        rankings,
        national,
    })
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub lognormal: Option<LogNormalFit>,
    pub zero_psi: usize,
    pub grid: Option<ThresholdGrid>,
    pub rows: Vec<SweepRow>,
    pub baseline: std::result::Result<ScalingFit, String>,
    pub warnings: Vec<String>,
}

impl SweepOutcome {
    pub fn any_complete_row(&self) -> bool {
        self.rows.iter().any(SweepRow::has_both_fits)
    }
}

pub fn run_sweep(a: &Analysis, cfg: &RunConfig) -> Result<SweepOutcome> {
    let (positive, zero_psi) = pooled_positive_psi(&a.rankings);
    let mut warnings = Vec::new();
    if zero_psi > 0 {
        warnings.push(format!(
            "{zero_psi} zones with psi = 0 excluded from the log-normal fit"
        ));
    }
    let baseline = baseline_fit(&a.surveys).map_err(|e| e.to_string());
    let (lognormal, grid, rows) = match fit_lognormal(&positive) {
        Ok(ln) => {
            let grid = build_grid(
                ln.mu,
                ln.sigma,
                cfg.grid_points,
                cfg.q_lo,
                cfg.q_hi,
                cfg.grid_spacing,
            )?;
            warnings.extend(grid.warnings.iter().cloned());
            let rows = sweep(
                &grid,
                &a.rankings,
                &a.surveys,
                cfg.min_points,
                cfg.attribution,
            )?;
            (Some(ln), Some(grid), rows)
        }
        Err(e) => {
            warnings.push(format!("no threshold grid: {e}"));
            (None, None, Vec::new())
        }
    };
    Ok(SweepOutcome {
        lognormal,
        zero_psi,
        grid,
        rows,
        baseline,
        warnings,
    })
}

/// Urban and rural fits at one fixed threshold.
#[derive(Debug, Clone)]
pub struct ThresholdFits {
    pub threshold: f64,
    pub urban: Option<ScalingFit>,
    pub rural: Option<ScalingFit>,
    pub flags: Vec<String>,
}

pub fn fits_at(a: &Analysis, cfg: &RunConfig, threshold: f64) -> Result<ThresholdFits> {
    let pairs = pair_by_survey(&a.rankings, &a.surveys)?;
    let parts = partitions_at(threshold, &pairs, cfg.attribution)?;
    let (urban, _, mut flags) = fit_regime(&parts, Regime::Urban, cfg.min_points);
    let (rural, _, rflags) = fit_regime(&parts, Regime::Rural, cfg.min_points);
    flags.extend(rflags);
    Ok(ThresholdFits {
        threshold,
        urban,
        rural,
        flags,
    })
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// `survey_id,zone_id,psi,lambda,scaling_mode,rank_national`, grouped by
/// survey in input order, zones in survey order.
pub fn rankings_csv(rankings: &[CentralityRanking], national: &NationalRanking) -> Result<String> {
    let ranks = national.rank_of();
    let mut rows = vec![[
        "survey_id",
        "zone_id",
        "psi",
        "lambda",
        "scaling_mode",
        "rank_national",
    ]
    .map(String::from)
    .to_vec()];
    for r in rankings {
        for (z, &psi) in r.zones.iter().zip(&r.psi) {
            let key = crate::ingest::ZoneRef::new(r.survey_id.clone(), z.clone())?;
            rows.push(vec![
                r.survey_id.clone(),
                z.clone(),
                fmt_num(psi),
                fmt_num(r.lambda),
                r.scaling_mode.as_str().to_string(),
                ranks[&key].to_string(),
            ]);
        }
    }
    csv_string(rows)
}

fn fit_fields(fit: Option<&ScalingFit>) -> [String; 5] {
    match fit {
        Some(f) => [
            fmt_num(f.beta),
            fmt_num(f.ci95.0),
            fmt_num(f.ci95.1),
            fmt_num(f.r2),
            fmt_num(f.adj_r2),
        ],
        None => Default::default(),
    }
}

/// `threshold,regime,beta,ci_lo,ci_hi,r2,adj_r2,n_points,flags`; the first
/// row is the baseline fit over survey totals (empty threshold).
pub fn sweep_csv(outcome: &SweepOutcome, n_surveys: usize) -> Result<String> {
    let mut rows = vec![[
        "threshold",
        "regime",
        "beta",
        "ci_lo",
        "ci_hi",
        "r2",
        "adj_r2",
        "n_points",
        "flags",
    ]
    .map(String::from)
    .to_vec()];
    let mut baseline = vec![String::new(), "baseline".into()];
    match &outcome.baseline {
        Ok(f) => {
            baseline.extend(fit_fields(Some(f)));
            baseline.push(f.n.to_string());
            baseline.push(String::new());
        }
        Err(e) => {
            baseline.extend(fit_fields(None));
            baseline.push(n_surveys.to_string());
            baseline.push(format!("baseline fit failed: {e}"));
        }
    }
    rows.push(baseline);
    for row in &outcome.rows {
        for (regime, fit, n) in [
            (Regime::Urban, row.urban_fit.as_ref(), row.n_urban_points),
            (Regime::Rural, row.rural_fit.as_ref(), row.n_rural_points),
        ] {
            let flags: Vec<&str> = row
                .flags
                .iter()
                .filter(|f| f.starts_with(regime.as_str()))
                .map(String::as_str)
                .collect();
            let mut r = vec![fmt_num(row.threshold), regime.as_str().to_string()];
            r.extend(fit_fields(fit));
            r.push(n.to_string());
            r.push(flags.join("; "));
            rows.push(r);
        }
    }
    csv_string(rows)
}

pub fn classification_csv(c: &ZoneClassification) -> Result<String> {
    let mut rows = vec![["survey_id", "zone_id", "psi", "class"]
        .map(String::from)
        .to_vec()];
    for z in &c.zones {
        rows.push(vec![
            z.survey_id.clone(),
            z.zone_id.clone(),
            fmt_num(z.psi),
            z.class.as_str().to_string(),
        ]);
    }
    csv_string(rows)
}

/// Per-survey population split at both thresholds plus a TOTAL row.
pub fn classification_summary_csv(split: &PopulationSplit) -> Result<String> {
    let mut rows = vec![[
        "survey_id",
        "rural_at_psi_a",
        "urban_at_psi_a",
        "rural_at_psi_b",
        "urban_at_psi_b",
        "n_rural",
        "n_urban",
        "n_central",
    ]
    .map(String::from)
    .to_vec()];
    for r in split.rows.iter().chain(std::iter::once(&split.total)) {
        rows.push(vec![
            r.survey_id.clone(),
            fmt_num(r.rural_at_a),
            fmt_num(r.urban_at_a),
            fmt_num(r.rural_at_b),
            fmt_num(r.urban_at_b),
            r.counts.rural.to_string(),
            r.counts.urban.to_string(),
            r.counts.central.to_string(),
        ]);
    }
    csv_string(rows)
}

fn property_string(v: Option<&Value>) -> Option<String> {
    match v? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Joins classified zones onto a zone-geometry FeatureCollection by
/// `zone_id` (and `survey_id` when the source feature carries one). Returns
/// the joined collection and the zones without geometry.
pub fn join_geometry(geometry: &Value, c: &ZoneClassification) -> Result<(Value, Vec<String>)> {
    let features = match (
        geometry.get("type").and_then(Value::as_str),
        geometry.get("features"),
    ) {
        (Some("FeatureCollection"), Some(Value::Array(f))) => f,
        _ => {
            return Err(Error::InvalidArgument(
                "geometry file is not a GeoJSON FeatureCollection".into(),
            ))
        }
    };
    let mut scoped: BTreeMap<(String, String), &Value> = BTreeMap::new();
    let mut unscoped: BTreeMap<String, Vec<&Value>> = BTreeMap::new();
    for f in features {
        let props = f.get("properties");
        let Some(zone) = property_string(props.and_then(|p| p.get("zone_id"))) else {
            continue;
        };
        match property_string(props.and_then(|p| p.get("survey_id"))) {
            Some(s) => {
                scoped.insert((s, zone), f);
            }
            None => unscoped.entry(zone).or_default().push(f),
        }
    }
    let mut out = Vec::new();
    let mut missing = Vec::new();
    for z in &c.zones {
        let src = scoped
            .get(&(z.survey_id.clone(), z.zone_id.clone()))
            .copied()
            .or_else(|| match unscoped.get(&z.zone_id) {
                Some(v) if v.len() == 1 => Some(v[0]),
                _ => None,
            });
        match src {
            Some(f) => out.push(json!({
                "type": "Feature",
                "geometry": f.get("geometry").cloned().unwrap_or(Value::Null),
                "properties": {
                    "survey_id": z.survey_id,
                    "zone_id": z.zone_id,
                    "psi": z.psi,
                    "class": z.class.as_str(),
                },
            })),
            None => missing.push(format!("{}/{}", z.survey_id, z.zone_id)),
        }
    }
    Ok((
        json!({ "type": "FeatureCollection", "features": out }),
        missing,
    ))
}

#[derive(Serialize)]
struct SurveyMeta<'a> {
    survey_id: &'a str,
    zones: usize,
    total_population: f64,
    total_trips: f64,
    lambda: f64,
    iterations: usize,
    residual: f64,
    warnings: Vec<String>,
}

pub fn run_meta_json(a: &Analysis, cfg: &RunConfig) -> Result<String> {
    let surveys: Vec<SurveyMeta> = a
        .surveys
        .iter()
        .zip(&a.rankings)
        .zip(&a.validations)
        .map(|((s, r), v)| SurveyMeta {
            survey_id: s.id(),
            zones: s.zone_count(),
            total_population: v.total_population,
            total_trips: v.total_trips,
            lambda: r.lambda,
            iterations: r.iterations,
            residual: r.residual,
            warnings: v.warnings.iter().chain(&r.warnings).cloned().collect(),
        })
        .collect();
    let meta = json!({
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "timestamp_unix": cfg.timestamp(),
        "config": cfg.analysis_json(),
        "config_hash": cfg.config_hash(),
        "scaling_mode": cfg.scaling_mode,
        "threshold_units": format!("psi ({} scaling)", cfg.scaling_mode.as_str()),
        "surveys": surveys,
    });
    Ok(serde_json::to_string_pretty(&meta)? + "\n")
}

pub fn sweep_meta_json(o: &SweepOutcome, cfg: &RunConfig) -> Result<String> {
    let meta = json!({
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "timestamp_unix": cfg.timestamp(),
        "config_hash": cfg.config_hash(),
        "scaling_mode": cfg.scaling_mode,
        "attribution": cfg.attribution,
        "lognormal": o.lognormal,
        "zero_psi_excluded": o.zero_psi,
        "grid": o.grid,
        "baseline": match &o.baseline { Ok(f) => json!(f), Err(e) => json!({ "error": e }) },
        "warnings": o.warnings,
    });
    Ok(serde_json::to_string_pretty(&meta)? + "\n")
}

fn fmt_fixed(x: f64, digits: usize) -> String {
    format!("{x:.digits$}")
}

fn fit_cells(f: Option<&ScalingFit>) -> [String; 5] {
    match f {
        Some(f) => [
            fmt_fixed(f.beta, 2),
            format!("({}, {})", fmt_fixed(f.ci95.0, 2), fmt_fixed(f.ci95.1, 2)),
            fmt_fixed(f.intercept, 2),
            fmt_fixed(f.adj_r2, 2),
            f.n.to_string(),
        ],
        None => [
            "n/a".into(),
            "n/a".into(),
            "n/a".into(),
            "n/a".into(),
            "0".into(),
        ],
    }
}

/// Human-readable summary: baseline, fit table at both thresholds,
/// population split, grid metadata and every warning.
pub fn render_report(
    a: &Analysis,
    cfg: &RunConfig,
    outcome: &SweepOutcome,
    at_a: &ThresholdFits,
    at_b: &ThresholdFits,
    split: &PopulationSplit,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Urban boundary scaling report\n");
    let _ = writeln!(s, "- tool: {TOOL_NAME} {TOOL_VERSION}");
    let _ = writeln!(s, "- config hash: `{}`", cfg.config_hash());
    let _ = writeln!(s, "- surveys: {}", a.surveys.len());
    let _ = writeln!(
        s,
        "- scaling mode: {} (thresholds are in psi units of this mode)",
        cfg.scaling_mode.as_str()
    );
    let _ = writeln!(s, "- trip attribution: {}", cfg.attribution.as_str());
    let _ = writeln!(
        s,
        "- thresholds: psi_a = {}, psi_b = {}\n",
        cfg.psi_a, cfg.psi_b
    );

    let _ = writeln!(s, "## Baseline (survey totals)\n");
    match &outcome.baseline {
        Ok(f) => {
            let _ = writeln!(
                s,
                "log10(T) = {:.4} + {:.4} log10(P); 95% CI [{:.4}, {:.4}]; R^2 = {:.4}; adj. R^2 = {:.4}; n = {}\n",
                f.intercept, f.beta, f.ci95.0, f.ci95.1, f.r2, f.adj_r2, f.n
            );
        }
        Err(e) => {
            let _ = writeln!(s, "baseline fit unavailable: {e}\n");
        }
    }
    let _ = writeln!(
        s,
        "Note: on the ten Chilean survey totals this baseline gives beta = 0.954 (95% CI 0.87 to 1.04). \
         A value of 0.93 quoted for the same fit is a rounding of that record, not a different model.\n"
    );

    let _ = writeln!(s, "## OLS fits at the thresholds of interest\n");
    let _ = writeln!(
        s,
        "| | psi_a rural | psi_a urban | psi_b rural | psi_b urban |"
    );
    let _ = writeln!(s, "|---|---|---|---|---|");
    let cells = [
        fit_cells(at_a.rural.as_ref()),
        fit_cells(at_a.urban.as_ref()),
        fit_cells(at_b.rural.as_ref()),
        fit_cells(at_b.urban.as_ref()),
    ];
    for (i, label) in ["Slope (beta)", "CI_beta", "Intercept", "Adj. R^2", "Points"]
        .iter()
        .enumerate()
    {
        let _ = writeln!(
            s,
            "| {label} | {} | {} | {} | {} |",
            cells[0][i], cells[1][i], cells[2][i], cells[3][i]
        );
    }
    s.push('\n');

    let _ = writeln!(s, "## Population of urban and rural aggregates\n");
    let _ = writeln!(
        s,
        "| Survey | psi_a rural | psi_a urban | psi_b rural | psi_b urban |"
    );
    let _ = writeln!(s, "|---|---|---|---|---|");
    for r in split.rows.iter().chain(std::iter::once(&split.total)) {
        let _ = writeln!(
            s,
            "| {} | {:.0} | {:.0} | {:.0} | {:.0} |",
            r.survey_id, r.rural_at_a, r.urban_at_a, r.rural_at_b, r.urban_at_b
        );
    }
    s.push('\n');

    let _ = writeln!(s, "## Threshold grid\n");
    match (&outcome.lognormal, &outcome.grid) {
        (Some(ln), Some(g)) => {
            let _ = writeln!(
                s,
                "- log-normal fit of pooled psi: mu = {:.4}, sigma = {:.4} over {} zones ({} zero-psi zones excluded)",
                ln.mu, ln.sigma, ln.n, outcome.zero_psi
            );
            let _ = writeln!(
                s,
                "- {} thresholds, {} spacing, levels {} to {}",
                g.values.len(),
                g.spacing.as_str(),
                cfg.q_lo,
                cfg.q_hi
            );
            if let (Some(first), Some(last)) = (g.values.first(), g.values.last()) {
                let _ = writeln!(s, "- range: {first:.4} to {last:.4}");
            }
            let complete = outcome.rows.iter().filter(|r| r.has_both_fits()).count();
            let _ = writeln!(
                s,
                "- rows with both regimes fitted: {complete} of {}\n",
                outcome.rows.len()
            );
        }
        _ => {
            let _ = writeln!(s, "- no grid could be built\n");
        }
    }

    let _ = writeln!(s, "## Warnings\n");
    let mut any = false;
    for v in &a.validations {
        for w in &v.warnings {
            let _ = writeln!(s, "- [{}] {w}", v.survey_id);
            any = true;
        }
    }
    for r in &a.rankings {
        for w in &r.warnings {
            let _ = writeln!(s, "- [{}] {w}", r.survey_id);
            any = true;
        }
    }
    for w in outcome
        .warnings
        .iter()
        .chain(&at_a.flags)
        .chain(&at_b.flags)
    {
        let _ = writeln!(s, "- {w}");
        any = true;
    }
    if !any {
        let _ = writeln!(s, "none");
    }
    s
}

fn announce(staged: &StagedOutputs, dir: &Path) {
    for n in staged.names() {
        println!("wrote {}", dir.join(n).display());
    }
}

pub fn cmd_rank(cfg: &RunConfig) -> CommandResult {
    let a = analyze(cfg)?;
    let mut out = StagedOutputs::default();
    out.add("rankings.csv", rankings_csv(&a.rankings, &a.national)?);
    out.add("run_meta.json", run_meta_json(&a, cfg)?);
    for r in &a.rankings {
        for w in &r.warnings {
            eprintln!("warning [{}]: {w}", r.survey_id);
        }
    }
    announce(&out, &cfg.out_dir);
    out.commit(&cfg.out_dir)?;
    Ok(())
}

pub fn cmd_sweep(cfg: &RunConfig) -> CommandResult {
    let a = analyze(cfg)?;
    let outcome = run_sweep(&a, cfg)?;
    let mut out = StagedOutputs::default();
    out.add("sweep.csv", sweep_csv(&outcome, a.surveys.len())?);
    out.add("sweep_meta.json", sweep_meta_json(&outcome, cfg)?);
    announce(&out, &cfg.out_dir);
    out.commit(&cfg.out_dir)?;
    if !outcome.any_complete_row() {
        return Err(CommandError {
            status: ExitStatus::NoValidFits,
            message: "no threshold produced both an urban and a rural fit".into(),
        });
    }
    Ok(())
}

pub fn cmd_classify(cfg: &RunConfig) -> CommandResult {
    cfg.validate()?;
    let geometry = match &cfg.geometry {
        Some(p) => {
            let text = fs::read(p).map_err(|e| Error::io(p, e))?;
            Some(serde_json::from_slice::<Value>(&text).map_err(Error::from)?)
        }
        None => None,
    };
    let a = analyze(cfg)?;
    let c = classify(cfg.psi_a, cfg.psi_b, &a.rankings)?;
    let split = population_split(&c, &a.rankings, &a.surveys, cfg.attribution)?;
    let mut out = StagedOutputs::default();
    out.add("classification.csv", classification_csv(&c)?);
    out.add(
        "classification_summary.csv",
        classification_summary_csv(&split)?,
    );
    if let Some(g) = geometry {
        let (joined, missing) = join_geometry(&g, &c)?;
        if !missing.is_empty() {
            eprintln!(
                "warning: {} zones have no geometry (e.g. {})",
                missing.len(),
                missing[0]
            );
        }
        out.add(
            "classification.geojson",
            serde_json::to_string_pretty(&joined).map_err(Error::from)? + "\n",
        );
    }
    announce(&out, &cfg.out_dir);
    out.commit(&cfg.out_dir)?;
    Ok(())
}

pub fn cmd_report(cfg: &RunConfig) -> CommandResult {
    let a = analyze(cfg)?;
    let outcome = run_sweep(&a, cfg)?;
    let at_a = fits_at(&a, cfg, cfg.psi_a)?;
    let at_b = fits_at(&a, cfg, cfg.psi_b)?;
    let c = classify(cfg.psi_a, cfg.psi_b, &a.rankings)?;
    let split = population_split(&c, &a.rankings, &a.surveys, cfg.attribution)?;
    let mut out = StagedOutputs::default();
    out.add(
        "report.md",
        render_report(&a, cfg, &outcome, &at_a, &at_b, &split),
    );
    announce(&out, &cfg.out_dir);
    out.commit(&cfg.out_dir)?;
    Ok(())
}

pub fn cmd_validate(cfg: &RunConfig) -> CommandResult {
    let (_, surveys) = load_surveys(cfg)?;
    let reports: Vec<ValidationReport> = surveys.iter().map(validate_survey).collect();
    for r in &reports {
        println!(
            "{}: {} zones, {} trip pairs, population {}, trips {}, {} warnings",
            r.survey_id,
            r.zone_count,
            r.trip_pairs,
            fmt_num(r.total_population),
            fmt_num(r.total_trips),
            r.warnings.len()
        );
        for w in &r.warnings {
            println!("  warning: {w}");
        }
    }
    let mut out = StagedOutputs::default();
    out.add(
        "validation.json",
        serde_json::to_string_pretty(&reports).map_err(Error::from)? + "\n",
    );
    out.commit(&cfg.out_dir)?;
    Ok(())
}

pub fn cmd_synth(params: &SynthParams, out_dir: &Path) -> CommandResult {
    let system = generate_system_detailed(params)?;
    write_fixture(out_dir, &system)?;
    println!(
        "wrote {} synthetic surveys to {}",
        system.len(),
        out_dir.display()
    );
    Ok(())
}
