//! `goreg`: generalized-odds regression pipeline driver.
//!
//! Every flag mirrors a key in the TOML config file; flags win. Configuration
//! errors exit with code 2, data/runtime errors with code 1.

mod commands;
mod config;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use goreg_core::error::Error;
use goreg_core::evalcv::ModelKind;
use goreg_core::ingest::CsvFormat;

use commands::PlotKind;
use config::{override_field, PipelineConfig};

#[derive(Parser)]
#[command(name = "goreg", version, about = "Scalar-on-generalized-odds regression")]
struct Cli {
    /// TOML configuration file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: ConfigOverrides,

    #[command(subcommand)]
    command: Command,
}

/// Flags mirroring the config file, usable with any subcommand.
#[derive(Args)]
struct ConfigOverrides {
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long = "d-max", global = true)]
    d_max: Option<f64>,
    #[arg(long, global = true)]
    degree: Option<usize>,
    #[arg(long = "interior-knots", global = true)]
    interior_knots: Option<usize>,
    #[arg(long, global = true)]
    cap: Option<f64>,
    #[arg(long = "denom-floor", global = true)]
    denom_floor: Option<f64>,
    #[arg(long = "drop-zeros", global = true)]
    drop_zeros: bool,
    #[arg(long, global = true)]
    penalty: Option<String>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long = "alpha-mix", global = true)]
    alpha_mix: Option<f64>,
    #[arg(long = "a-scad", global = true)]
    a_scad: Option<f64>,
    #[arg(long = "gamma-mcp", global = true)]
    gamma_mcp: Option<f64>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    #[arg(long = "inner-folds", global = true)]
    inner_folds: Option<usize>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    #[arg(long = "n-lambda", global = true)]
    n_lambda: Option<usize>,
    #[arg(long = "lambda-ratio", global = true)]
    lambda_ratio: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Read minute-level activity CSV, apply wear-time QC, write subjects.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// `wide` (subject_id,day,MIN1..MIN1440) or `long` (subject_id,day,minute,count).
        #[arg(long, default_value = "wide")]
        format: String,
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the synthetic tail-signal benchmark.
    Synth {
        /// TOML scenario file; defaults are used when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Optional ground-truth JSON output.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Export gridded odds objects as long-format CSV.
    Odds {
        #[arg(long)]
        subjects: PathBuf,
        #[arg(long)]
        index: usize,
        #[arg(long = "subject-id")]
        subject_id: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the standardized feature design and write the binary container.
    Features {
        #[arg(long)]
        subjects: PathBuf,
        #[arg(long)]
        index: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a penalized model on a stored design.
    Fit {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated nested cross-validation of one model.
    Cv {
        #[arg(long)]
        subjects: PathBuf,
        /// mean | survival | odds1 | odds2 | odds4
        #[arg(long)]
        model: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Figure-ready long CSV: density | odds1 | odds2 | residual_life.
    Plotdata {
        #[arg(long)]
        subjects: PathBuf,
        #[arg(long)]
        kind: String,
        #[arg(long = "subject-id")]
        subject_id: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn effective_config(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let o = &cli.overrides;
    override_field!(cfg,
        grid_points: o.grid,
        d_max: o.d_max,
        degree: o.degree,
        interior_knots: o.interior_knots,
        cap: o.cap,
        denom_floor: o.denom_floor,
        penalty: o.penalty.clone(),
        lambda: o.lambda,
        alpha_mix: o.alpha_mix,
        a_scad: o.a_scad,
        gamma_mcp: o.gamma_mcp,
        folds: o.folds,
        inner_folds: o.inner_folds,
        replications: o.reps,
        n_lambda: o.n_lambda,
        lambda_ratio: o.lambda_ratio,
        seed: o.seed,
    );
    if o.drop_zeros {
        cfg.drop_zeros = true;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = effective_config(cli)?;
    match &cli.command {
        Command::Ingest { input, format, outcomes, out } => {
            let format = match format.as_str() {
                "wide" => CsvFormat::Wide,
                "long" => CsvFormat::Long,
                other => {
                    return Err(Error::Config(format!("format must be wide or long, got {other}")))
                }
            };
            commands::run_ingest(&cfg, input, format, outcomes, out)
        }
        Command::Synth { scenario, out, truth } => commands::run_synth(
            &cfg,
            scenario.as_deref(),
            cfg.seed,
            out,
            truth.as_deref(),
        ),
        Command::Odds { subjects, index, subject_id, out } => {
            commands::run_odds(&cfg, subjects, *index, subject_id.as_deref(), out)
        }
        Command::Features { subjects, index, out } => {
            commands::run_features(&cfg, subjects, *index, out)
        }
        Command::Fit { design, out } => commands::run_fit(&cfg, design, out),
        Command::Cv { subjects, model, out } => {
            let model: ModelKind = model.parse()?;
            commands::run_cv(&cfg, subjects, model, out)
        }
        Command::Plotdata { subjects, kind, subject_id, out } => {
            let kind: PlotKind = kind.parse()?;
            commands::run_plotdata(&cfg, subjects, kind, subject_id.as_deref(), out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
