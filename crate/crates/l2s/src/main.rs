//! `l2s` command-line tool.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use l2s::config::RunConfig;
use l2s::error::{Error, Result};
use l2s::metrics;
use l2s::mixture::MixtureWeights;
use l2s::pipeline::run_pipeline;
use l2s::sim::ResponseSurface;

#[derive(Parser)]
#[command(name = "l2s", version, about = "Long-to-short dynamic data reweighting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct FormatArg {
    /// Output format.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run the reweighting pipeline and write its log.
    Run {
        /// Run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed (and the L2S_SEED environment variable).
        #[arg(long)]
        seed: Option<u64>,
        /// Pin a fixed mixture "A1:A2" instead of reweighting dynamically.
        #[arg(long, value_name = "A1:A2")]
        r#static: Option<String>,
        /// Where to write the run log (line-delimited JSON).
        #[arg(long, default_value = "runlog.jsonl")]
        out: PathBuf,
    },
    /// Summarize a results file per dataset.
    Metrics {
        /// Results file (line-delimited JSON records).
        results: PathBuf,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Count thinking-pattern keywords over a results file.
    Keywords {
        results: PathBuf,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Per-dataset and average compression of one results file versus another.
    CompressRate {
        /// Results of the original model.
        original: PathBuf,
        /// Results of the compressed model.
        current: PathBuf,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Emit the simulator response surface over an exposure grid.
    Simulate {
        /// Optional config supplying [surface] parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Grid points per exposure axis.
        #[arg(long, default_value_t = 25)]
        points: usize,
        /// Largest exposure on each axis.
        #[arg(long, default_value_t = 3.0)]
        max_exposure: f64,
    },
}

fn parse_static(raw: &str) -> Result<MixtureWeights> {
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "static mixture must look like A1:A2, got {raw:?}"
        )));
    }
    let weights = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("bad weight {p:?}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    MixtureWeights::new(weights)
}

fn cmd_run(
    config_path: &Path,
    seed: Option<u64>,
    static_raw: Option<&str>,
    out: &Path,
) -> Result<()> {
    let mut config = RunConfig::load(config_path)?;
    config.run.seed = config.resolve_seed(seed)?;
    if let Some(raw) = static_raw {
        config.run.static_alpha = Some(parse_static(raw)?.as_slice().to_vec());
    }
    let log = run_pipeline(&config)?;
    log.write_to(out)?;
    println!("{}", serde_json::to_string(&log.summary)?);
    Ok(())
}

fn cmd_metrics(results: &Path, format: Format) -> Result<()> {
    let records = metrics::read_records(results)?;
    let summaries = metrics::summarize(&records);
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&summaries)?),
        Format::Text => print!("{}", metrics::render_summary_table(&summaries)),
    }
    Ok(())
}

fn cmd_keywords(results: &Path, format: Format) -> Result<()> {
    let records = metrics::read_records(results)?;
    let texts: Vec<&str> = records.iter().map(|r| r.output_text.as_str()).collect();
    let profile = metrics::keyword_frequency(&texts);
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&profile)?),
        Format::Text => print!("{}", metrics::render_keyword_table(&profile)),
    }
    Ok(())
}

fn cmd_compress_rate(original: &Path, current: &Path, format: Format) -> Result<()> {
    let orig = metrics::summarize(&metrics::read_records(original)?);
    let cur = metrics::summarize(&metrics::read_records(current)?);
    let report = metrics::compression_report(&orig, &cur)?;
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        Format::Text => print!("{}", metrics::render_compression_table(&report)),
    }
    Ok(())
}

fn cmd_simulate(config: Option<&Path>, points: usize, max_exposure: f64) -> Result<()> {
    let surface = match config {
        Some(path) => RunConfig::load(path)?.surface,
        None => ResponseSurface::default(),
    };
    surface.validate()?;
    if points < 2 || !max_exposure.is_finite() || max_exposure <= 0.0 {
        return Err(Error::InvalidArgument(
            "need at least 2 grid points and a positive max exposure".into(),
        ));
    }
    for i in 0..points {
        for j in 0..points {
            let e1 = max_exposure * i as f64 / (points - 1) as f64;
            let e2 = max_exposure * j as f64 / (points - 1) as f64;
            let (tokens, accuracy) = surface.response(e1, e2);
            println!(
                "{}",
                serde_json::json!({
                    "exposure_sys1": e1,
                    "exposure_sys2": e2,
                    "mean_tokens": tokens,
                    "mean_accuracy": accuracy,
                })
            );
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Run {
            config,
            seed,
            r#static,
            out,
        } => cmd_run(config, *seed, r#static.as_deref(), out),
        Command::Metrics { results, format } => cmd_metrics(results, format.format),
        Command::Keywords { results, format } => cmd_keywords(results, format.format),
        Command::CompressRate {
            original,
            current,
            format,
        } => cmd_compress_rate(original, current, format.format),
        Command::Simulate {
            config,
            points,
            max_exposure,
        } => cmd_simulate(config.as_deref(), *points, *max_exposure),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // One machine-parseable line on stderr.
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.to_string(), "kind": e.kind() })
            );
            ExitCode::FAILURE
        }
    }
}
