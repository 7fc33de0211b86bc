//! Parsing and assembly of origin-destination survey inputs.
//!
//! Expansion factors are applied at parse time: every weight and population
//! held by a [`Survey`] is already an expanded count.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt_num;

const TRIP_HEADERS: &str = "origin,destination,weight | origin,destination,count,expansion_factor";
const POPULATION_HEADERS: &str = "zone,population | zone,count,expansion_factor";
const MANIFEST_HEADER: &str = "survey_id,trips_path,population_path,year";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ZoneRef {
    pub survey_id: String,
    pub zone_id: String,
}

impl ZoneRef {
    pub fn new(survey_id: impl Into<String>, zone_id: impl Into<String>) -> Result<Self> {
        let survey_id = survey_id.into();
        let zone_id = zone_id.into();
        if survey_id.is_empty() || zone_id.is_empty() {
            return Err(Error::InvalidZoneRef(format!(
                "empty identifier in ({survey_id:?}, {zone_id:?})"
            )));
        }
        Ok(ZoneRef { survey_id, zone_id })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub origin: ZoneRef,
    pub destination: ZoneRef,
    /// Expanded trips per day.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationRecord {
    pub zone: ZoneRef,
    pub population: f64,
}

/// One OD survey: sorted zone set, per-zone expanded population and the
/// sparse directed trip table.
#[derive(Debug, Clone, PartialEq)]
pub struct Survey {
    id: String,
    zones: Vec<String>,
    population: BTreeMap<String, f64>,
    directed_trips: BTreeMap<(String, String), f64>,
}

impl Survey {
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Zone ids in ascending order; position is the node index.
    pub fn zones(&self) -> &[String] {
        &self.zones
    }

    pub fn zone_count(&self) -> usize {
        self.zones.len()
    }

    pub fn zone_index(&self, zone_id: &str) -> Option<usize> {
        self.zones
            .binary_search_by(|z| z.as_str().cmp(zone_id))
            .ok()
    }

    /// Population of a zone; zones seen only in trips report 0.
    pub fn population(&self, zone_id: &str) -> Option<f64> {
        self.population.get(zone_id).copied()
    }

    /// Populations in zone order.
    pub fn population_vec(&self) -> Vec<f64> {
        self.zones.iter().map(|z| self.population[z]).collect()
    }

    /// Directed trips in ascending `(origin, destination)` order.
    pub fn directed_trips(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.directed_trips
            .iter()
            .map(|((o, d), w)| (o.as_str(), d.as_str(), *w))
    }

    pub fn trip_pair_count(&self) -> usize {
        self.directed_trips.len()
    }

    /// Sum of directed weights in sorted key order.
    pub fn total_trips(&self) -> f64 {
        self.directed_trips.values().sum()
    }

    /// Sum of zone populations in zone order.
    pub fn total_population(&self) -> f64 {
        self.zones.iter().map(|z| self.population[z]).sum()
    }

    pub fn write_trips_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["origin", "destination", "weight"])?;
        for ((o, d), weight) in &self.directed_trips {
            w.write_record([o.as_str(), d.as_str(), &fmt_num(*weight)])?;
        }
        w.flush().map_err(|e| Error::io("<trips csv>", e))?;
        Ok(())
    }

    /// Writes a row for every zone, including zero-population ones, so the
    /// zone set survives a round trip.
    pub fn write_population_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["zone", "population"])?;
        for z in &self.zones {
            w.write_record([z.as_str(), &fmt_num(self.population[z])])?;
        }
        w.flush().map_err(|e| Error::io("<population csv>", e))?;
        Ok(())
    }
}

fn reader<R: Read>(stream: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(stream)
}

fn parse_value(source: &str, line: u64, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| Error::MalformedRow {
        source_name: source.to_string(),
        line,
        message: format!("cannot parse {what} '{field}'"),
    })?;
    if !v.is_finite() {
        return Err(Error::MalformedRow {
            source_name: source.to_string(),
            line,
            message: format!("non-finite {what} '{field}'"),
        });
    }
    if v < 0.0 {
        return Err(Error::NegativeValue {
            source_name: source.to_string(),
            line,
            value: v,
        });
    }
    Ok(v)
}

fn zone_ref(source: &str, line: u64, survey_id: &str, zone: &str) -> Result<ZoneRef> {
    ZoneRef::new(survey_id, zone).map_err(|e| Error::MalformedRow {
        source_name: source.to_string(),
        line,
        message: e.to_string(),
    })
}

#[derive(Clone, Copy)]
enum Layout {
    Direct,
    Expanded,
}

fn read_header<R: Read>(
    rows: &mut csv::StringRecordsIter<'_, R>,
    source: &str,
    direct: &[&str],
    expanded: &[&str],
    expected: &'static str,
) -> Result<Layout> {
    let missing = || Error::MissingHeader {
        source_name: source.to_string(),
        expected,
    };
    let header = rows.next().ok_or_else(missing)??;
    let cols: Vec<&str> = header.iter().collect();
    if cols == direct {
        Ok(Layout::Direct)
    } else if cols == expanded {
        Ok(Layout::Expanded)
    } else {
        Err(missing())
    }
}

fn expect_len(source: &str, line: u64, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::MalformedRow {
            source_name: source.to_string(),
            line,
            message: format!("expected {want} fields, found {got}"),
        });
    }
    Ok(())
}

/// Parses a trips CSV. Rows with weight 0 are kept; they produce no edge.
pub fn parse_trips<R: Read>(stream: R, survey_id: &str) -> Result<Vec<TripRecord>> {
    let source = format!("trips[{survey_id}]");
    let mut rdr = reader(stream);
    let mut rows = rdr.records();
    let layout = read_header(
        &mut rows,
        &source,
        &["origin", "destination", "weight"],
        &["origin", "destination", "count", "expansion_factor"],
        TRIP_HEADERS,
    )?;
    let mut out = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let weight = match layout {
            Layout::Direct => {
                expect_len(&source, line, row.len(), 3)?;
                parse_value(&source, line, &row[2], "weight")?
            }
            Layout::Expanded => {
                expect_len(&source, line, row.len(), 4)?;
                let count = parse_value(&source, line, &row[2], "count")?;
                let factor = parse_value(&source, line, &row[3], "expansion_factor")?;
                count * factor
            }
        };
        out.push(TripRecord {
            origin: zone_ref(&source, line, survey_id, &row[0])?,
            destination: zone_ref(&source, line, survey_id, &row[1])?,
            weight,
        });
    }
    Ok(out)
}

pub fn parse_population<R: Read>(stream: R, survey_id: &str) -> Result<Vec<PopulationRecord>> {
    let source = format!("population[{survey_id}]");
    let mut rdr = reader(stream);
    let mut rows = rdr.records();
    let layout = read_header(
        &mut rows,
        &source,
        &["zone", "population"],
        &["zone", "count", "expansion_factor"],
        POPULATION_HEADERS,
    )?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let population = match layout {
            Layout::Direct => {
                expect_len(&source, line, row.len(), 2)?;
                parse_value(&source, line, &row[1], "population")?
            }
            Layout::Expanded => {
                expect_len(&source, line, row.len(), 3)?;
                let count = parse_value(&source, line, &row[1], "count")?;
                let factor = parse_value(&source, line, &row[2], "expansion_factor")?;
                count * factor
            }
        };
        let zone = zone_ref(&source, line, survey_id, &row[0])?;
        if !seen.insert(zone.zone_id.clone()) {
            return Err(Error::DuplicateZone {
                source_name: source,
                line,
                zone: zone.zone_id,
            });
        }
        out.push(PopulationRecord { zone, population });
    }
    Ok(out)
}

fn check_survey(expected: &str, r: &ZoneRef) -> Result<()> {
    if r.survey_id != expected {
        return Err(Error::MixedSurvey {
            expected: expected.to_string(),
            found: r.survey_id.clone(),
        });
    }
    Ok(())
}

/// Builds a [`Survey`]. Duplicate `(origin, destination)` rows are summed in
/// ascending weight order, so the result does not depend on row order.
pub fn assemble_survey(
    trips: &[TripRecord],
    populations: &[PopulationRecord],
    survey_id: &str,
) -> Result<Survey> {
    if survey_id.is_empty() {
        return Err(Error::InvalidZoneRef("empty survey id".into()));
    }
    let mut zones = BTreeSet::new();
    let mut grouped: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for t in trips {
        check_survey(survey_id, &t.origin)?;
        check_survey(survey_id, &t.destination)?;
        if !(t.weight >= 0.0 && t.weight.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "trip {} -> {} has invalid weight {}",
                t.origin.zone_id, t.destination.zone_id, t.weight
            )));
        }
        zones.insert(t.origin.zone_id.clone());
        zones.insert(t.destination.zone_id.clone());
        grouped
            .entry((t.origin.zone_id.clone(), t.destination.zone_id.clone()))
            .or_default()
            .push(t.weight);
    }
    let mut population = BTreeMap::new();
    for p in populations {
        check_survey(survey_id, &p.zone)?;
        if !(p.population >= 0.0 && p.population.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "zone {} has invalid population {}",
                p.zone.zone_id, p.population
            )));
        }
        if population
            .insert(p.zone.zone_id.clone(), p.population)
            .is_some()
        {
            return Err(Error::InvalidArgument(format!(
                "duplicate population record for zone '{}'",
                p.zone.zone_id
            )));
        }
        zones.insert(p.zone.zone_id.clone());
    }
    for z in &zones {
        population.entry(z.clone()).or_insert(0.0);
    }
    let directed_trips = grouped
        .into_iter()
        .map(|(k, mut ws)| {
            ws.sort_by(f64::total_cmp);
            (k, ws.into_iter().sum())
        })
        .collect();
    Ok(Survey {
        id: survey_id.to_string(),
        zones: zones.into_iter().collect(),
        population,
        directed_trips,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub survey_id: String,
    pub zone_count: usize,
    pub trip_pairs: usize,
    pub total_population: f64,
    pub total_trips: f64,
    /// Zones carrying trips but no surveyed inhabitants ("external"-style zones).
    pub zero_population_zones: Vec<String>,
    /// Zones with no trip of positive weight touching them.
    pub isolated_zones: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

pub fn validate_survey(s: &Survey) -> ValidationReport {
    let mut touched = BTreeSet::new();
    for (o, d, w) in s.directed_trips() {
        if w > 0.0 {
            touched.insert(o);
            touched.insert(d);
        }
    }
    let mut zero_pop = Vec::new();
    let mut isolated = Vec::new();
    let mut warnings = Vec::new();
    if s.total_trips() == 0.0 {
        warnings.push("survey has no trips".to_string());
    }
    for z in s.zones() {
        let has_trips = touched.contains(z.as_str());
        if s.population[z] == 0.0 {
            zero_pop.push(z.clone());
            if has_trips {
                warnings.push(format!(
                    "zero-population zone '{z}' (external-style: trips but no surveyed inhabitants)"
                ));
            } else {
                warnings.push(format!("zero-population zone '{z}'"));
            }
        }
        if !has_trips {
            isolated.push(z.clone());
            warnings.push(format!("isolated zone '{z}' (no trips)"));
        }
    }
    ValidationReport {
        survey_id: s.id.clone(),
        zone_count: s.zone_count(),
        trip_pairs: s.trip_pair_count(),
        total_population: s.total_population(),
        total_trips: s.total_trips(),
        zero_population_zones: zero_pop,
        isolated_zones: isolated,
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub survey_id: String,
    pub trips_path: PathBuf,
    pub population_path: PathBuf,
    pub year: Option<i32>,
}

/// Parses `surveys.csv`. Relative paths resolve against `base_dir`.
pub fn parse_manifest<R: Read>(stream: R, base_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let source = "manifest".to_string();
    let mut rdr = reader(stream);
    let mut rows = rdr.records();
    let missing = || Error::MissingHeader {
        source_name: source.clone(),
        expected: MANIFEST_HEADER,
    };
    let header = rows.next().ok_or_else(missing)??;
    if header.iter().collect::<Vec<_>>() != ["survey_id", "trips_path", "population_path", "year"] {
        return Err(missing());
    }
    let mut ids = BTreeSet::new();
    let mut out = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        expect_len(&source, line, row.len(), 4)?;
        let survey_id = row[0].to_string();
        if survey_id.is_empty() {
            return Err(Error::MalformedRow {
                source_name: source,
                line,
                message: "empty survey_id".into(),
            });
        }
        if !ids.insert(survey_id.clone()) {
            return Err(Error::DuplicateSurvey(survey_id));
        }
        let year = if row[3].is_empty() {
            None
        } else {
            Some(row[3].parse().map_err(|_| Error::MalformedRow {
                source_name: source.clone(),
                line,
                message: format!("cannot parse year '{}'", &row[3]),
            })?)
        };
        out.push(ManifestEntry {
            survey_id,
            trips_path: base_dir.join(&row[1]),
            population_path: base_dir.join(&row[2]),
            year,
        });
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(f, base)
}

pub fn load_survey(entry: &ManifestEntry) -> Result<Survey> {
    let tf = File::open(&entry.trips_path).map_err(|e| Error::io(&entry.trips_path, e))?;
    let trips = parse_trips(tf, &entry.survey_id)?;
    let pf =
        File::open(&entry.population_path).map_err(|e| Error::io(&entry.population_path, e))?;
    let pops = parse_population(pf, &entry.survey_id)?;
    assemble_survey(&trips, &pops, &entry.survey_id)
}
