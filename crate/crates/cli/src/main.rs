use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use namepop::{ESemantics, Mode, ModelKind, Target, UniquenessStrategy};
use serde::Serialize;

mod commands;
mod manifest;

/// Personal-name popularity estimation and name-based record linkage.
#[derive(Debug, Parser)]
#[command(name = "namepop", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic population and its record mentions.
    Synth(SynthArgs),
    /// Parse, normalize and deduplicate a record file.
    Ingest(IngestArgs),
    /// Split a person set into train and test halves by hashed person id.
    Split(SplitArgs),
    /// Fit one model file per requested kind.
    Fit(FitArgs),
    /// RMSE of estimated against actual counts, per frequency bucket.
    Evaluate(EvaluateArgs),
    /// Link records at one uniqueness threshold.
    Link(LinkArgs),
    /// Precision and recall over a grid of thresholds, as CSV and SVG.
    Sweep(SweepArgs),
    /// Export frequency spectra, optionally with LNRE growth predictions.
    Spectrum(SpectrumArgs),
    /// Export count tables for full names, components and pairs.
    Counts(CountsArgs),
}

#[derive(Debug, Args, Serialize)]
struct OutDir {
    /// Directory receiving outputs and `manifest.jsonl`.
    #[arg(long, env = "NAMEPOP_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Tsv,
    Csv,
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    /// TOML file with synthesis parameters; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    persons: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Coupling κ between first and last names, in [0, 1].
    #[arg(long)]
    coupling: Option<f64>,
    /// Geometric parameter of the records-per-person distribution.
    #[arg(long)]
    records_p: Option<f64>,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args, Serialize)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
    #[arg(long, default_value = "triple")]
    mode: Mode,
    /// Input has no header row; columns are then positional.
    #[arg(long)]
    no_header: bool,
    /// Column names or 0-based indices for `id,tin,first,middle,last`;
    /// `-` marks an absent tin or middle column.
    #[arg(long)]
    columns: Option<String>,
    /// Skip malformed rows instead of failing on the first one.
    #[arg(long)]
    lenient: bool,
    /// Suffix rewrite rules, one `pattern->replacement` per line.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args, Serialize)]
struct SplitArgs {
    /// Person set written by `ingest`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "triple")]
    mode: Mode,
    /// Expected share of persons in the training half.
    #[arg(long, default_value_t = 0.5)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args, Serialize)]
struct Smoothing {
    /// α of the pseudo-Laplace model IX.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 3)]
    katz_cutoff: u64,
    #[arg(long, default_value = "unseen", value_parser = parse_e_semantics)]
    e_semantics: ESemantics,
}

fn parse_e_semantics(s: &str) -> Result<ESemantics, namepop::Error> {
    s.parse()
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    /// Training person set.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "triple")]
    mode: Mode,
    /// Comma-separated kinds (I..IX) or `all`.
    #[arg(long, default_value = "all", value_parser = parse_kinds)]
    models: KindList,
    #[command(flatten)]
    smoothing: Smoothing,
    /// Size |S| of the population the estimates are for; defaults to twice
    /// the training size.
    #[arg(long)]
    population: Option<u64>,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Clone, Serialize)]
struct KindList(Vec<ModelKind>);

fn parse_kinds(s: &str) -> Result<KindList, namepop::Error> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(KindList(ModelKind::ALL.to_vec()));
    }
    let mut kinds = s.split(',').map(|k| k.trim().parse()).collect::<Result<Vec<ModelKind>, _>>()?;
    kinds.sort();
    kinds.dedup();
    Ok(KindList(kinds))
}

#[derive(Debug, Args, Serialize)]
struct EvaluateArgs {
    /// Model files written by `fit`.
    #[arg(long = "model", required = true, num_args = 1..)]
    models: Vec<PathBuf>,
    /// Test person set.
    #[arg(long)]
    test: PathBuf,
    /// Lower bounds of the count buckets.
    #[arg(long, value_delimiter = ',', default_value = "1,2,6,21,101")]
    buckets: Vec<u64>,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args, Serialize)]
struct Linking {
    /// Normalized records written by `ingest`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "poisson-conditional")]
    strategy: UniquenessStrategy,
    /// Size |S| of the population behind the records; defaults to the
    /// population the model was fitted for.
    #[arg(long)]
    population: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
struct LinkArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    linking: Linking,
    #[arg(long)]
    threshold: f64,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    #[arg(long = "model", required = true, num_args = 1..)]
    models: Vec<PathBuf>,
    #[command(flatten)]
    linking: Linking,
    /// Threshold grid `lo:hi:step`.
    #[arg(long, default_value = "0:1:0.05")]
    grid: String,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args, Serialize)]
struct SpectrumArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "triple")]
    mode: Mode,
    /// Distributions to export; all of them for the mode by default.
    #[arg(long, value_delimiter = ',')]
    target: Vec<Target>,
    /// Sample sizes at which to predict growth from an LNRE fit.
    #[arg(long, value_delimiter = ',')]
    predict: Vec<u64>,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args, Serialize)]
struct CountsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "triple")]
    mode: Mode,
    #[command(flatten)]
    out: OutDir,
}

const EXIT_INPUT: u8 = 2;
const EXIT_COMPUTE: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Split(a) => commands::split(a),
        Command::Fit(a) => commands::fit(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Link(a) => commands::link(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Counts(a) => commands::counts(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<namepop::Error>() {
            return if err.is_input_error() { EXIT_INPUT } else { EXIT_COMPUTE };
        }
        if cause.is::<manifest::InputMissing>() || cause.is::<toml::de::Error>() {
            return EXIT_INPUT;
        }
        if let Some(failed) = cause.downcast_ref::<commands::ModelsFailed>() {
            return if failed.input { EXIT_INPUT } else { EXIT_COMPUTE };
        }
    }
    EXIT_COMPUTE
}
