use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use urbanbound::report::{
    cmd_classify, cmd_rank, cmd_report, cmd_sweep, cmd_synth, cmd_validate, CommandResult,
    DEFAULT_PSI_A, DEFAULT_PSI_B,
};
use urbanbound::sweep::GridSpacing;
use urbanbound::{Attribution, RunConfig, ScalingMode, SynthParams};

/// Spectral urban boundaries and trip-scaling fits from origin-destination surveys.
#[derive(Parser)]
#[command(name = "urbanbound", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank zones by spectral centrality (rankings.csv, run_meta.json)
    Rank(RunArgs),
    /// Fit urban and rural scaling over a threshold grid (sweep.csv, sweep_meta.json)
    Sweep(RunArgs),
    /// Classify zones as rural / urban / central (classification*.csv, optional GeoJSON)
    Classify(RunArgs),
    /// Write a markdown summary of the whole analysis (report.md)
    Report(RunArgs),
    /// Check survey inputs and print a summary (validation.json)
    Validate(RunArgs),
    /// Generate a synthetic survey system with planted exponents
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Manifest CSV: survey_id,trips_path,population_path[,year]
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 50)]
    grid_points: usize,
    #[arg(long, default_value_t = 0.02)]
    q_lo: f64,
    #[arg(long, default_value_t = 0.98)]
    q_hi: f64,
    /// quantile | log-even
    #[arg(long, default_value = "quantile")]
    grid_spacing: GridSpacing,
    /// unit2 | unit1
    #[arg(long, default_value = "unit2")]
    scaling_mode: ScalingMode,
    /// origin | split
    #[arg(long, default_value = "origin")]
    attribution: Attribution,
    #[arg(long, default_value_t = DEFAULT_PSI_A)]
    psi_a: f64,
    #[arg(long, default_value_t = DEFAULT_PSI_B)]
    psi_b: f64,
    #[arg(long, default_value_t = 3)]
    min_points: usize,
    /// GeoJSON FeatureCollection with zone_id (and optionally survey_id) properties
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// Zero timestamps so repeated runs are byte-identical
    #[arg(long)]
    deterministic: bool,
}

impl From<RunArgs> for RunConfig {
    fn from(a: RunArgs) -> Self {
        RunConfig {
            manifest: a.manifest,
            out_dir: a.out,
            tol: a.tol,
            max_iter: a.max_iter,
            seed: a.seed,
            grid_points: a.grid_points,
            q_lo: a.q_lo,
            q_hi: a.q_hi,
            grid_spacing: a.grid_spacing,
            scaling_mode: a.scaling_mode,
            attribution: a.attribution,
            psi_a: a.psi_a,
            psi_b: a.psi_b,
            min_points: a.min_points,
            geometry: a.geometry,
            deterministic: a.deterministic,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    surveys: usize,
    #[arg(long, default_value_t = 12)]
    core_zones: usize,
    #[arg(long, default_value_t = 12)]
    periphery_zones: usize,
    #[arg(long, default_value_t = 1.0)]
    beta_urban: f64,
    #[arg(long, default_value_t = 0.7)]
    beta_rural: f64,
    #[arg(long, default_value_t = 2e5)]
    pop_min: f64,
    #[arg(long, default_value_t = 2e6)]
    pop_max: f64,
    #[arg(long, default_value_t = 2.0)]
    gravity: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: CommandResult = match cli.command {
        Command::Rank(a) => cmd_rank(&a.into()),
        Command::Sweep(a) => cmd_sweep(&a.into()),
        Command::Classify(a) => cmd_classify(&a.into()),
        Command::Report(a) => cmd_report(&a.into()),
        Command::Validate(a) => cmd_validate(&a.into()),
        Command::Synth(a) => {
            let params = SynthParams {
                n_surveys: a.surveys,
                core_zones: a.core_zones,
                periphery_zones: a.periphery_zones,
                planted_beta_urban: a.beta_urban,
                planted_beta_rural: a.beta_rural,
                population_range: (a.pop_min, a.pop_max),
                gravity_exponent: a.gravity,
                seed: a.seed,
            };
            cmd_synth(&params, &a.out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status as u8)
        }
    }
}
