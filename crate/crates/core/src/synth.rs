//! Synthetic multi-survey systems with planted urban/rural scaling, and dense
//! brute-force oracles for the eigen and modularity code paths.
//!
//! # Generator
//!
//! Every survey draws its population `P` log-uniformly from
//! `population_range`. With periphery zones present, 80% of `P` lives in the
//! core and 20% in the periphery (otherwise all of it is core). Zone
//! populations split each cluster by weights `U(0.5, 1.5)` and are rounded to
//! whole inhabitants.
//!
//! Core zones sit in two sub-centres at `(-1, 0)` and `(1, 0)` (alternating),
//! each within radius 0.3. Periphery zones sit on an annulus of radius 5 to 8.
//!
//! Cluster trip totals follow the planted laws on the rounded cluster
//! populations: `T_core = c * P_core^beta_urban` and
//! `T_per = c * P_per^beta_rural` with `c = 2.5` trips per inhabitant. Each
//! origin `i` emits its population share of its cluster total and spreads it
//! over destinations `j` in proportion to `P_j / (1 + d_ij^gravity_exponent)`
//! (a production-constrained gravity model, so pair flows scale as
//! `P_i P_j / (1 + d^g)`). Core origins only reach core zones; periphery
//! origins reach every zone. Pair weights are rounded to whole trips and
//! zero-weight pairs are omitted.
//!
//! The two core sub-centres give the modularity matrix a strong leading
//! direction that lives on the core, while the weakly connected periphery
//! gets scores several orders of magnitude lower.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::MobilityNetwork;
use crate::ingest::{assemble_survey, PopulationRecord, Survey, TripRecord, ZoneRef};
use crate::rng::SeededRng;

pub const TRIPS_PER_CAPITA: f64 = 2.5;
pub const CORE_SHARE: f64 = 0.8;
pub const DENSE_CAP: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthParams {
    pub n_surveys: usize,
    pub core_zones: usize,
    pub periphery_zones: usize,
    pub planted_beta_urban: f64,
    pub planted_beta_rural: f64,
    pub population_range: (f64, f64),
    pub gravity_exponent: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_surveys: 10,
            core_zones: 12,
            periphery_zones: 12,
            planted_beta_urban: 1.0,
            planted_beta_rural: 0.7,
            population_range: (2e5, 2e6),
            gravity_exponent: 2.0,
            seed: 42,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_surveys < 1 || self.core_zones < 1 {
            return bad("n_surveys and core_zones must be at least 1".into());
        }
        let (lo, hi) = self.population_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return bad(format!(
                "population range must satisfy 0 < lo < hi, got ({lo}, {hi})"
            ));
        }
        for b in [self.planted_beta_urban, self.planted_beta_rural] {
            if !(b > 0.0 && b < 2.0) {
                return bad(format!("planted exponents must lie in (0, 2), got {b}"));
            }
        }
        if !(self.gravity_exponent >= 0.0 && self.gravity_exponent.is_finite()) {
            return bad(format!(
                "gravity exponent must be >= 0, got {}",
                self.gravity_exponent
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ZoneRole {
    Core,
    Periphery,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthZone {
    pub zone_id: String,
    pub role: ZoneRole,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSurvey {
    pub survey: Survey,
    pub zones: Vec<SynthZone>,
}

pub fn survey_id(index: usize) -> String {
    format!("S{:02}", index + 1)
}

fn polar(rng: &mut SeededRng, cx: f64, r_lo: f64, r_hi: f64, sqrt_radius: bool) -> (f64, f64) {
    let u = rng.unit();
    let r = if sqrt_radius {
        r_lo + (r_hi - r_lo) * u.sqrt()
    } else {
        r_lo + (r_hi - r_lo) * u
    };
    let a = rng.uniform(0.0, std::f64::consts::TAU);
    (cx + r * a.cos(), r * a.sin())
}

fn split_population(rng: &mut SeededRng, total: f64, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.uniform(0.5, 1.5)).collect();
    let sum: f64 = w.iter().sum();
    w.iter().map(|wi| (total * wi / sum).round()).collect()
}

/// Surveys plus zone roles and coordinates.
pub fn generate_system_detailed(p: &SynthParams) -> Result<Vec<SynthSurvey>> {
    p.validate()?;
    let mut rng = SeededRng::new(p.seed);
    let (lo, hi) = p.population_range;
    let mut out = Vec::with_capacity(p.n_surveys);
    for s in 0..p.n_surveys {
        let sid = survey_id(s);
        let total = rng.uniform(lo.ln(), hi.ln()).exp();
        let core_share = if p.periphery_zones > 0 {
            CORE_SHARE
        } else {
            1.0
        };

        let mut zones = Vec::with_capacity(p.core_zones + p.periphery_zones);
        for i in 0..p.core_zones {
            let cx = if i % 2 == 0 { -1.0 } else { 1.0 };
            let (x, y) = polar(&mut rng, cx, 0.0, 0.3, true);
            zones.push(SynthZone {
                zone_id: format!("c{:03}", i + 1),
                role: ZoneRole::Core,
                x,
                y,
            });
        }
        for i in 0..p.periphery_zones {
            let (x, y) = polar(&mut rng, 0.0, 5.0, 8.0, false);
            zones.push(SynthZone {
                zone_id: format!("p{:03}", i + 1),
                role: ZoneRole::Periphery,
                x,
                y,
            });
        }
        let mut pop = split_population(&mut rng, core_share * total, p.core_zones);
        pop.extend(split_population(
            &mut rng,
            (1.0 - core_share) * total,
            p.periphery_zones,
        ));

        let nc = p.core_zones;
        let core_pop: f64 = pop[..nc].iter().sum();
        let per_pop: f64 = pop[nc..].iter().sum();
        let t_core = if core_pop > 0.0 {
            TRIPS_PER_CAPITA * core_pop.powf(p.planted_beta_urban)
        } else {
            0.0
        };
        let t_per = if per_pop > 0.0 {
            TRIPS_PER_CAPITA * per_pop.powf(p.planted_beta_rural)
        } else {
            0.0
        };

        let mut trips = Vec::new();
        for (i, zi) in zones.iter().enumerate() {
            let (emitted, reach) = match zi.role {
                ZoneRole::Core if core_pop > 0.0 => (t_core * pop[i] / core_pop, nc),
                ZoneRole::Periphery if per_pop > 0.0 => (t_per * pop[i] / per_pop, zones.len()),
                _ => continue,
            };
            let kernel: Vec<f64> = zones[..reach]
                .iter()
                .enumerate()
                .map(|(j, zj)| {
                    let d = ((zi.x - zj.x).powi(2) + (zi.y - zj.y).powi(2)).sqrt();
                    pop[j] / (1.0 + d.powf(p.gravity_exponent))
                })
                .collect();
            let ksum: f64 = kernel.iter().sum();
            if ksum <= 0.0 {
                continue;
            }
            for (j, kj) in kernel.iter().enumerate() {
                let w = (emitted * kj / ksum).round();
                if w > 0.0 {
                    trips.push(TripRecord {
                        origin: ZoneRef::new(&sid, &zi.zone_id)?,
                        destination: ZoneRef::new(&sid, &zones[j].zone_id)?,
                        weight: w,
                    });
                }
            }
        }
        let pops: Vec<PopulationRecord> = zones
            .iter()
            .zip(&pop)
            .map(|(z, &v)| {
                Ok(PopulationRecord {
                    zone: ZoneRef::new(&sid, &z.zone_id)?,
                    population: v,
                })
            })
            .collect::<Result<_>>()?;
        let survey = assemble_survey(&trips, &pops, &sid)?;
        out.push(SynthSurvey { survey, zones });
    }
    Ok(out)
}

pub fn generate_system(p: &SynthParams) -> Result<Vec<Survey>> {
    Ok(generate_system_detailed(p)?
        .into_iter()
        .map(|s| s.survey)
        .collect())
}

/// Writes `trips_<id>.csv`, `population_<id>.csv`, `surveys.csv` and a
/// point-geometry `zones.geojson` into `dir`.
pub fn write_fixture(dir: &Path, system: &[SynthSurvey]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = csv::Writer::from_writer(Vec::new());
    manifest.write_record(["survey_id", "trips_path", "population_path", "year"])?;
    let mut features = Vec::new();
    for s in system {
        let id = s.survey.id();
        let trips_name = format!("trips_{id}.csv");
        let pop_name = format!("population_{id}.csv");
        let mut buf = Vec::new();
        s.survey.write_trips_csv(&mut buf)?;
        let path = dir.join(&trips_name);
        fs::write(&path, buf).map_err(|e| Error::io(path, e))?;
        let mut buf = Vec::new();
        s.survey.write_population_csv(&mut buf)?;
        let path = dir.join(&pop_name);
        fs::write(&path, buf).map_err(|e| Error::io(path, e))?;
        manifest.write_record([id, &trips_name, &pop_name, ""])?;
        for z in &s.zones {
            features.push(json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [z.x, z.y] },
                "properties": { "survey_id": id, "zone_id": z.zone_id, "role": z.role },
            }));
        }
    }
    let bytes = manifest
        .into_inner()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let path = dir.join("surveys.csv");
    fs::write(&path, bytes).map_err(|e| Error::io(path, e))?;
    let geo = json!({ "type": "FeatureCollection", "features": features });
    let path = dir.join("zones.geojson");
    fs::write(&path, serde_json::to_vec_pretty(&geo)?).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Random survey with `n` zones: each unordered pair is linked with a
/// per-network probability drawn from `U(0.1, 1)`, directed weights
/// `U(0, 10)` per direction, self-loops with the same probability. At least
/// one trip is always present.
pub fn random_survey(seed: u64, n: usize) -> Survey {
    assert!(n >= 1);
    let mut rng = SeededRng::new(seed);
    let density = rng.uniform(0.1, 1.0);
    let id = format!("R{seed}");
    let zone = |i: usize| ZoneRef::new(id.as_str(), format!("z{i:03}")).expect("non-empty");
    let mut trips = Vec::new();
    for i in 0..n {
        for j in i..n {
            if rng.unit() < density {
                trips.push(TripRecord {
                    origin: zone(i),
                    destination: zone(j),
                    weight: rng.uniform(0.0, 10.0),
                });
                if i != j {
                    trips.push(TripRecord {
                        origin: zone(j),
                        destination: zone(i),
                        weight: rng.uniform(0.0, 10.0),
                    });
                }
            }
        }
    }
    if trips.is_empty() {
        trips.push(TripRecord {
            origin: zone(0),
            destination: zone(n - 1),
            weight: 1.0,
        });
    }
    let pops: Vec<_> = (0..n)
        .map(|i| PopulationRecord {
            zone: zone(i),
            population: 1.0,
        })
        .collect();
    assemble_survey(&trips, &pops, &id).expect("consistent ids")
}

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = DenseMatrix::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            m.data[i * n..(i + 1) * n].copy_from_slice(r);
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                d = d.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        d
    }

    fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn off_diagonal(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.get(i, j).powi(2);
                }
            }
        }
        s.sqrt()
    }
}

/// `B_ij = A_ij - k_i k_j / 2m`, materialized entry by entry.
pub fn dense_modularity(net: &MobilityNetwork, cap: usize) -> Result<DenseMatrix> {
    let n = net.len();
    if n > cap {
        return Err(Error::TooLarge { n, cap });
    }
    if net.two_m() <= 0.0 {
        return Err(Error::EmptyNetwork);
    }
    let k = net.strengths();
    let mut m = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, net.weight(i, j) - k[i] * k[j] / net.two_m());
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations, run until
/// the off-diagonal Frobenius norm is at most `1e-12 * ||M||_F`.
pub fn dense_eigenpairs(m: &DenseMatrix) -> Result<DenseEigen> {
    let n = m.dim();
    let scale = m.data.iter().fold(1.0f64, |a, x| a.max(x.abs()));
    let asym = m.max_asymmetry();
    if asym > 1e-10 * scale {
        return Err(Error::Asymmetric(asym));
    }
    let mut a = m.clone();
    // symmetrize exactly so rotations see one value per pair
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }
    let mut v = DenseMatrix::zeros(n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let target = 1e-12 * a.frobenius();
    for _sweep in 0..100 {
        if a.off_diagonal() <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let (apk, aqk) = (a.get(p, k), a.get(q, k));
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)));
    Ok(DenseEigen {
        values: order.iter().map(|&i| a.get(i, i)).collect(),
        vectors: order
            .iter()
            .map(|&c| (0..n).map(|r| v.get(r, c)).collect())
            .collect(),
    })
}
