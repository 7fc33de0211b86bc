//! Leading modularity eigenpair and zone centrality scores.
//!
//! `B` is indefinite, so power iteration runs on `B + sigma I` with
//! `sigma = shift_bound(B)`. Every eigenvalue of the shifted operator is then
//! non-negative and the largest one belongs to the most positive eigenvalue
//! of `B`. The eigenvalue estimate is the Rayleigh quotient `x^T B x`, which
//! equals `rho - sigma` without the cancellation.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{MobilityNetwork, ModularityOperator};
use crate::ingest::ZoneRef;
use crate::rng::SeededRng;

/// Residual floor relative to `2m`; below this the residual is rounding noise.
pub const RESIDUAL_FLOOR: f64 = 1e-15;

/// Eigenvalues at or below `DEGENERATE_LAMBDA * 2m` are treated as zero.
pub const DEGENERATE_LAMBDA: f64 = 1e-12;

const STALL_WINDOW: usize = 100;
const STALL_MIN_REDUCTION: f64 = 1e-3;
/// Consecutive non-improving windows before the iterate is declared stalled.
const STALL_PATIENCE: usize = 100;

pub const WARN_NEAR_DEGENERATE: &str = "near-degenerate leading eigenspace";
pub const WARN_NO_SIGNAL: &str = "degenerate: no community structure signal";
pub const WARN_EMPTY_NETWORK: &str = "degenerate: empty network (no trips)";

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-10,
            max_iter: 100_000,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub lambda: f64,
    /// Unit 2-norm, largest-magnitude component positive.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Set when convergence stalled before reaching the tolerance.
    pub near_degenerate: bool,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Most positive eigenvalue of `B` and its eigenvector, by shifted power
/// iteration from a seeded random start.
///
/// Zones with zero strength start (and stay) at exactly 0: their row and
/// column of `B` vanish, so that coordinate never mixes with the rest.
///
/// Converged when `||Bx - lambda x|| <= max(tol * |lambda|, 1e-15 * 2m)`.
/// The best residual seen so far is checked every 100 iterations; after 100
/// consecutive windows that each shrink it by less than 0.1% the iterate is
/// returned with `near_degenerate` set. Single windows are not enough, since
/// the residual of a converging iterate can rise for a while.
pub fn leading_eigenpair(op: &ModularityOperator<'_>, opts: &EigenOptions) -> Result<Eigenpair> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "leading_eigenpair on an empty network".into(),
        ));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let net = op.network();
    if net.two_m() <= 0.0 {
        return Err(Error::EmptyNetwork);
    }
    let sigma = op.shift_bound();
    let floor = RESIDUAL_FLOOR * net.two_m();

    let mut rng = SeededRng::new(opts.seed);
    let mut x: Vec<f64> = net
        .strengths()
        .iter()
        .map(|&k| {
            let u = rng.uniform(-1.0, 1.0);
            if k > 0.0 {
                u
            } else {
                0.0
            }
        })
        .collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);

    let mut bx = vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut checkpoint = f64::INFINITY;
    let mut slow_windows = 0usize;
    let mut iterations = 0usize;
    loop {
        op.apply_into(&x, &mut bx)?;
        iterations += 1;
        let lambda = dot(&x, &bx);
        let residual = bx
            .iter()
            .zip(&x)
            .map(|(b, v)| (b - lambda * v).powi(2))
            .sum::<f64>()
            .sqrt();

        let converged = residual <= (opts.tol * lambda.abs()).max(floor);
        best = best.min(residual);
        let stalled = iterations.is_multiple_of(STALL_WINDOW) && {
            if best > (1.0 - STALL_MIN_REDUCTION) * checkpoint {
                slow_windows += 1;
            } else {
                slow_windows = 0;
            }
            checkpoint = best;
            slow_windows >= STALL_PATIENCE
        };
        if converged || stalled {
            fix_sign(&mut x);
            return Ok(Eigenpair {
                lambda,
                vector: x,
                iterations,
                residual,
                near_degenerate: !converged,
            });
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual,
            });
        }

        // y = (B + sigma I) x
        for (b, v) in bx.iter_mut().zip(&x) {
            *b += sigma * v;
        }
        let ny = norm2(&bx);
        for (v, b) in x.iter_mut().zip(&bx) {
            *v = b / ny;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    /// `x` has unit 2-norm, `psi_i = |lambda x_i|`.
    #[default]
    Unit2,
    /// `x` rescaled so `sum |x_i| = 1`, hence `sum psi_i = |lambda|`.
    Unit1,
}

impl ScalingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScalingMode::Unit2 => "unit2",
            ScalingMode::Unit1 => "unit1",
        }
    }
}

impl std::str::FromStr for ScalingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit2" => Ok(ScalingMode::Unit2),
            "unit1" => Ok(ScalingMode::Unit1),
            other => Err(Error::InvalidArgument(format!(
                "unknown scaling mode '{other}'"
            ))),
        }
    }
}

/// `psi_i = |lambda| * |x_i|` with `x` rescaled per `mode`.
pub fn psi_scores(lambda: f64, x: &[f64], mode: ScalingMode) -> Vec<f64> {
    let scale = match mode {
        ScalingMode::Unit2 => 1.0,
        ScalingMode::Unit1 => {
            let l1: f64 = x.iter().map(|v| v.abs()).sum();
            if l1 > 0.0 {
                1.0 / l1
            } else {
                1.0
            }
        }
    };
    let lam = lambda.abs();
    x.iter().map(|v| lam * (v * scale).abs()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityRanking {
    pub survey_id: String,
    pub zones: Vec<String>,
    pub lambda: f64,
    pub x: Vec<f64>,
    pub psi: Vec<f64>,
    pub scaling_mode: ScalingMode,
    pub iterations: usize,
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl CentralityRanking {
    pub fn from_eigenpair(
        survey_id: &str,
        net: &MobilityNetwork,
        pair: Eigenpair,
        mode: ScalingMode,
    ) -> Self {
        let mut warnings = Vec::new();
        if pair.near_degenerate {
            warnings.push(WARN_NEAR_DEGENERATE.to_string());
        }
        let mut lambda = pair.lambda;
        if lambda <= DEGENERATE_LAMBDA * net.two_m() {
            // no positive modularity direction: clamp rounding noise to 0
            lambda = 0.0;
            warnings.push(WARN_NO_SIGNAL.to_string());
        }
        let psi = psi_scores(lambda, &pair.vector, mode);
        CentralityRanking {
            survey_id: survey_id.to_string(),
            zones: net.zones().to_vec(),
            lambda,
            x: pair.vector,
            psi,
            scaling_mode: mode,
            iterations: pair.iterations,
            residual: pair.residual,
            warnings,
        }
    }

    /// All-zero ranking for a network without trips.
    pub fn empty(survey_id: &str, net: &MobilityNetwork, mode: ScalingMode) -> Self {
        let n = net.len();
        CentralityRanking {
            survey_id: survey_id.to_string(),
            zones: net.zones().to_vec(),
            lambda: 0.0,
            x: vec![0.0; n],
            psi: vec![0.0; n],
            scaling_mode: mode,
            iterations: 0,
            residual: 0.0,
            warnings: vec![WARN_EMPTY_NETWORK.to_string()],
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.lambda == 0.0
    }
}

/// Eigenpair plus scores for one survey network. Networks without trips get
/// an all-zero ranking instead of an error.
pub fn rank_network(
    survey_id: &str,
    net: &MobilityNetwork,
    opts: &EigenOptions,
    mode: ScalingMode,
) -> Result<CentralityRanking> {
    if net.two_m() <= 0.0 {
        return Ok(CentralityRanking::empty(survey_id, net, mode));
    }
    let pair = leading_eigenpair(&net.modularity(), opts)?;
    Ok(CentralityRanking::from_eigenpair(
        survey_id, net, pair, mode,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedZone {
    pub zone: ZoneRef,
    pub psi: f64,
}

/// Zones of all surveys, descending by `psi`, ties by `(survey_id, zone_id)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NationalRanking {
    pub entries: Vec<RankedZone>,
}

impl NationalRanking {
    /// 1-based national rank of each `(survey_id, zone_id)`.
    pub fn rank_of(&self) -> std::collections::HashMap<ZoneRef, usize> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.zone.clone(), i + 1))
            .collect()
    }
}

pub fn national_ranking(rankings: &[CentralityRanking]) -> Result<NationalRanking> {
    let mut seen = std::collections::BTreeSet::new();
    let mut entries = Vec::new();
    for r in rankings {
        if !seen.insert(r.survey_id.as_str()) {
            return Err(Error::DuplicateSurvey(r.survey_id.clone()));
        }
        for (z, &psi) in r.zones.iter().zip(&r.psi) {
            entries.push(RankedZone {
                zone: ZoneRef::new(r.survey_id.clone(), z.clone())?,
                psi,
            });
        }
    }
    entries.sort_by(|a, b| match b.psi.total_cmp(&a.psi) {
        Ordering::Equal => a.zone.cmp(&b.zone),
        o => o,
    });
    Ok(NationalRanking { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_network;
    use crate::ingest::{assemble_survey, parse_trips, Survey};

    fn survey(id: &str, body: &str) -> Survey {
        let t = parse_trips(format!("origin,destination,weight\n{body}").as_bytes(), id).unwrap();
        assemble_survey(&t, &[], id).unwrap()
    }

    #[test]
    fn two_zone_kernel_vector() {
        let net = build_network(&survey("s", "z1,z2,3\nz2,z1,1\nz1,z1,2"));
        let p = leading_eigenpair(&net.modularity(), &EigenOptions::default()).unwrap();
        assert!(p.lambda.abs() < 1e-13, "{}", p.lambda);
        let h = 1.0 / 2f64.sqrt();
        assert!((p.vector[0] - h).abs() < 1e-12 && (p.vector[1] - h).abs() < 1e-12);
        assert!(!p.near_degenerate);
        let r = CentralityRanking::from_eigenpair("s", &net, p, ScalingMode::Unit2);
        assert_eq!(r.psi, [0.0, 0.0]);
        assert!(r.warnings.iter().any(|w| w == WARN_NO_SIGNAL));
    }

    #[test]
    fn planted_communities_positive_lambda() {
        let net = build_network(&survey("s", "a,b,5\nc,d,5\nb,c,1"));
        let p = leading_eigenpair(&net.modularity(), &EigenOptions::default()).unwrap();
        assert!(p.lambda > 0.0);
        let bx = net.modularity().matvec(&p.vector).unwrap();
        let res: f64 = bx
            .iter()
            .zip(&p.vector)
            .map(|(b, x)| (b - p.lambda * x).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(res <= 1e-10 * p.lambda.max(1.0));
        assert!((norm2(&p.vector) - 1.0).abs() < 1e-12);
        // the two communities get opposite signs
        assert!(p.vector[0] * p.vector[3] < 0.0);
    }

    #[test]
    fn weight_scaling_scales_lambda() {
        let a = build_network(&survey("s", "a,b,5\nc,d,5\nb,c,1"));
        let b = build_network(&survey("s", "a,b,50\nc,d,50\nb,c,10"));
        let pa = leading_eigenpair(&a.modularity(), &EigenOptions::default()).unwrap();
        let pb = leading_eigenpair(&b.modularity(), &EigenOptions::default()).unwrap();
        assert!((pb.lambda - 10.0 * pa.lambda).abs() <= 1e-9 * pb.lambda);
        for (x, y) in pa.vector.iter().zip(&pb.vector) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let net = build_network(&survey("s", "a,b,5\nc,d,5\nb,c,1\na,d,0.5\nc,c,2"));
        let o = EigenOptions::default();
        let p1 = leading_eigenpair(&net.modularity(), &o).unwrap();
        let p2 = leading_eigenpair(&net.modularity(), &o).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn isolated_zone_scores_zero() {
        let t = parse_trips(
            "origin,destination,weight\na,b,5\nc,d,5\nb,c,1".as_bytes(),
            "s",
        )
        .unwrap();
        let p = crate::ingest::parse_population("zone,population\ne,10".as_bytes(), "s").unwrap();
        let s = assemble_survey(&t, &p, "s").unwrap();
        let net = build_network(&s);
        let r = rank_network("s", &net, &EigenOptions::default(), ScalingMode::Unit2).unwrap();
        assert_eq!(r.psi[4], 0.0);
        assert!(r.psi[..4].iter().all(|&p| p > 0.0));
    }

    #[test]
    fn errors() {
        let empty = build_network(&assemble_survey(&[], &[], "e").unwrap());
        assert!(leading_eigenpair(&empty.modularity(), &EigenOptions::default()).is_err());
        let zero = build_network(&survey("s", "a,b,0"));
        assert!(matches!(
            leading_eigenpair(&zero.modularity(), &EigenOptions::default()).unwrap_err(),
            Error::EmptyNetwork
        ));
        let r = rank_network("s", &zero, &EigenOptions::default(), ScalingMode::Unit2).unwrap();
        assert_eq!(r.psi, [0.0, 0.0]);
        assert_eq!(r.warnings, [WARN_EMPTY_NETWORK]);

        let net = build_network(&survey("s", "a,b,5\nc,d,5\nb,c,1\nd,a,0.3"));
        let opts = EigenOptions {
            max_iter: 2,
            ..Default::default()
        };
        assert!(matches!(
            leading_eigenpair(&net.modularity(), &opts).unwrap_err(),
            Error::NoConvergence { iterations: 2, .. }
        ));
    }

    #[test]
    fn psi_modes() {
        assert_eq!(
            psi_scores(0.0, &[0.6, -0.8], ScalingMode::Unit2),
            [0.0, 0.0]
        );
        let p = psi_scores(-2.0, &[0.6, -0.8], ScalingMode::Unit2);
        assert!((p[0] - 1.2).abs() < 1e-15 && (p[1] - 1.6).abs() < 1e-15);
        let p = psi_scores(2.0, &[0.6, -0.8], ScalingMode::Unit1);
        assert!((p.iter().sum::<f64>() - 2.0).abs() < 1e-15);
        let x = [0.1, 0.7, -0.2];
        let perm = [x[2], x[0], x[1]];
        let a = psi_scores(3.0, &x, ScalingMode::Unit2);
        let b = psi_scores(3.0, &perm, ScalingMode::Unit2);
        assert_eq!([a[2], a[0], a[1]], b[..]);
    }

    fn ranking(id: &str, zones: &[(&str, f64)]) -> CentralityRanking {
        CentralityRanking {
            survey_id: id.into(),
            zones: zones.iter().map(|z| z.0.to_string()).collect(),
            lambda: 1.0,
            x: vec![0.0; zones.len()],
            psi: zones.iter().map(|z| z.1).collect(),
            scaling_mode: ScalingMode::Unit2,
            iterations: 0,
            residual: 0.0,
            warnings: vec![],
        }
    }

    fn order(n: &NationalRanking) -> Vec<String> {
        n.entries.iter().map(|e| e.zone.zone_id.clone()).collect()
    }

    #[test]
    fn national_merge() {
        let n = national_ranking(&[
            ranking("s1", &[("a", 3.0), ("b", 1.0)]),
            ranking("s2", &[("c", 2.0)]),
        ])
        .unwrap();
        assert_eq!(order(&n), ["a", "c", "b"]);
        assert_eq!(n.rank_of()[&ZoneRef::new("s1", "b").unwrap()], 3);

        let n = national_ranking(&[
            ranking("s2", &[("y", 0.0), ("x", 0.0)]),
            ranking("s1", &[("z", 0.0), ("q", 1.0)]),
        ])
        .unwrap();
        assert_eq!(order(&n), ["q", "z", "x", "y"]);

        let n = national_ranking(&[ranking("s", &[("a", 1.0), ("b", 5.0), ("c", 2.0)])]).unwrap();
        assert_eq!(order(&n), ["b", "c", "a"]);

        assert!(matches!(
            national_ranking(&[ranking("s", &[]), ranking("s", &[])]).unwrap_err(),
            Error::DuplicateSurvey(_)
        ));
    }
}
