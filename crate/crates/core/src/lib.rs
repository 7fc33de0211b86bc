//! Functional urban boundaries from origin-destination mobility surveys.
//!
//! The pipeline: parse surveys ([`ingest`]), build the undirected mobility
//! network and its modularity operator ([`graph`]), rank zones by the leading
//! modularity eigenvector ([`spectral`]), sweep centrality thresholds to split
//! every survey into urban and rural clusters ([`sweep`]) and fit log-log
//! scaling of trips against population per cluster ([`fit`]). [`synth`]
//! generates planted test systems and dense oracles; [`report`] drives the
//! whole run and writes every output file.

pub mod error;
pub mod fit;
pub mod graph;
pub mod ingest;
pub mod report;
pub mod rng;
pub mod spectral;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};
pub use fit::{baseline_fit, loglog_ols, ScalingFit, ScalingPoint};
pub use graph::{build_network, MobilityNetwork, ModularityOperator};
pub use ingest::{
    assemble_survey, parse_population, parse_trips, validate_survey, Survey, ZoneRef,
};
pub use report::{ExitStatus, RunConfig};
pub use spectral::{
    leading_eigenpair, national_ranking, CentralityRanking, EigenOptions, ScalingMode,
};
pub use sweep::{
    build_grid, classify, fit_lognormal, partition_at, sweep, Attribution, ThresholdGrid,
};
pub use synth::{generate_system, SynthParams};

/// Formats a number for file output: integral values below 1e15 print as
/// integers, everything else with 17 significant digits. Both forms parse
/// back to the identical `f64`.
pub fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.16e}")
    }
}
