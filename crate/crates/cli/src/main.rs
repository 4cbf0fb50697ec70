use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use lspie_cli::config::{toy_sample_rate, Enhancement, InputSource, RunConfig};
use lspie_cli::pipeline::{default_output_dir, reproduce_paper, run_experiment, RunReport};
use lspie_core::{
    generate_signal, ClusterBackend, LspieError, MetricRegistry, ModelKind, SignalKind, Similarity,
};

#[derive(Parser)]
#[command(
    name = "lspie",
    version,
    about = "Latent-space enhancement of Hankelised time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Write one of the built-in test signals as a `time,value` CSV.
    Generate {
        #[arg(long, default_value = "pure_sine")]
        signal: SignalKind,
        #[arg(long, default_value_t = 4000)]
        n_samples: usize,
        #[arg(long)]
        sample_rate: Option<f64>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Run one experiment; flags override values from `--config`.
    Run(RunArgs),
    /// Run both toy signals with PCA and ICA and write all tables and figures.
    ReproducePaper {
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List the registered ranking metrics.
    ListMetrics,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in signal to analyse.
    #[arg(long, conflicts_with = "input")]
    signal: Option<SignalKind>,
    /// CSV file with one column per channel.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Treat the first CSV column as time stamps.
    #[arg(long, requires = "input")]
    time_column: bool,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    metric: Option<String>,
    /// Comma-separated steps: rank, scale, cluster:K, condense.
    #[arg(long, value_delimiter = ',')]
    enhance: Option<Vec<Enhancement>>,
    #[arg(long)]
    filter: Option<Switch>,
    #[arg(long)]
    filter_order: Option<usize>,
    #[arg(long)]
    filter_cutoff: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    min_members: Option<usize>,
    #[arg(long)]
    similarity: Option<Similarity>,
    #[arg(long)]
    backend: Option<ClusterBackend>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(signal) = self.signal {
            cfg.input = InputSource::Builtin {
                signal,
                n_samples: 4000,
                sample_rate: toy_sample_rate(),
            };
        }
        if let Some(csv) = self.input {
            cfg.input = InputSource::Csv {
                csv,
                time_column: self.time_column,
                sample_rate: 1.0,
            };
        }
        macro_rules! set {
            ($($field:expr => $value:expr),* $(,)?) => {
                $(if let Some(v) = $value { $field = v; })*
            };
        }
        set! {
            cfg.window => self.window,
            cfg.model => self.model,
            cfg.k => self.k,
            cfg.metric => self.metric,
            cfg.enhancements => self.enhance,
            cfg.filter.order => self.filter_order,
            cfg.filter.cutoff => self.filter_cutoff,
            cfg.seed => self.seed,
            cfg.cluster.eps => self.eps,
            cfg.cluster.min_members => self.min_members,
            cfg.cluster.similarity => self.similarity,
            cfg.cluster.backend => self.backend,
        }
        if let Some(s) = self.filter {
            cfg.filter.enabled = matches!(s, Switch::On);
        }
        if self.output_dir.is_some() {
            cfg.output_dir = self.output_dir;
        }
        Ok(cfg)
    }
}

fn summarise(report: &RunReport) {
    let cfg = &report.config;
    println!(
        "{} k={} -> {}{}",
        cfg.model,
        cfg.k,
        report.output_dir.display(),
        if report.converged {
            ""
        } else {
            " (did not converge)"
        }
    );
    for row in &report.metric_table {
        println!(
            "  L{:<2} {} = {:.6}  score = {:.6}",
            row.index + 1,
            row.name,
            row.theta,
            row.score
        );
    }
    if let Some(k) = report.condensed_k {
        println!("  condensed to K = {k}");
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let registry = MetricRegistry::with_builtins();
    match cli.command {
        Command::Generate {
            signal,
            n_samples,
            sample_rate,
            output,
        } => {
            let series = generate_signal(
                signal,
                n_samples,
                sample_rate.unwrap_or_else(toy_sample_rate),
            )?;
            series.write_csv(&output)?;
            println!("wrote {}", output.display());
        }
        Command::Run(args) => {
            let report = run_experiment(&args.into_config()?, &registry)?;
            summarise(&report);
        }
        Command::ReproducePaper { output_dir, seed } => {
            let root = output_dir.unwrap_or_else(default_output_dir);
            let reports = reproduce_paper(&root, seed, &registry)
                .with_context(|| format!("reproducing into {}", root.display()))?;
            for r in &reports {
                summarise(r);
            }
        }
        Command::ListMetrics => {
            for name in registry.names() {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let invalid = err.chain().any(|e| {
                matches!(
                    e.downcast_ref::<LspieError>(),
                    Some(LspieError::InvalidArgument(_) | LspieError::Rank { .. })
                )
            });
            if invalid {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
