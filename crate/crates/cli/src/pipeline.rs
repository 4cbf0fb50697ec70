//! End-to-end experiment runs: load or generate a signal, embed, fit,
//! enhance, and write CSV tables, SVG panels and a JSON report.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use lspie_core::enhance::{cluster_directions, condense_directions};
use lspie_core::matrix_io::write_matrix_csv;
use lspie_core::{
    apply_condense_filter, fit_ica, fit_pca, generate_signal, hankelise, rank, scale,
    stack_channels, standardise, CondensedModel, DMatrix, LatentModel, MetricRegistry,
    MetricVector, ModelKind, SignalKind, StandardiseMode, TimeSeries,
};
use serde::Serialize;

use crate::config::{toy_sample_rate, Enhancement, InputSource, RunConfig};
use crate::svg::{render_panel, Curve};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub name: String,
    pub index: usize,
    pub theta: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterRow {
    pub original_index: usize,
    pub cluster_id: usize,
    pub sign: i8,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub output_dir: PathBuf,
    pub converged: bool,
    /// One row per latent direction, in final (ranked) order.
    pub metric_table: Vec<MetricRow>,
    /// `permutation[position] = index in the fitted model`.
    pub permutation: Vec<usize>,
    pub clusters: Option<Vec<ClusterRow>>,
    pub condensed_k: Option<usize>,
    pub condensed_metric_table: Option<Vec<MetricRow>>,
    pub files: Vec<PathBuf>,
    pub timing_seconds: f64,
}

fn metric_rows(m: &MetricVector) -> Vec<MetricRow> {
    m.values
        .iter()
        .zip(&m.scores)
        .enumerate()
        .map(|(index, (&theta, &score))| MetricRow {
            name: m.metric_name.clone(),
            index,
            theta,
            score,
        })
        .collect()
}

/// Loads the configured input as one series per channel.
pub fn load_input(input: &InputSource) -> anyhow::Result<Vec<TimeSeries>> {
    match input {
        InputSource::Builtin {
            signal,
            n_samples,
            sample_rate,
        } => Ok(vec![generate_signal(*signal, *n_samples, *sample_rate)?]),
        InputSource::Csv {
            csv,
            time_column,
            sample_rate,
        } => read_channels(csv, *time_column, *sample_rate),
    }
}

/// Reads a CSV with one column per channel. A first row that does not parse
/// as numbers is treated as a header.
pub fn read_channels(
    path: &Path,
    time_column: bool,
    sample_rate: f64,
) -> anyhow::Result<Vec<TimeSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if line == 0 => continue,
            Err(e) => bail!("{}: row {}: {e}", path.display(), line + 1),
        }
    }
    let width = rows.first().map_or(0, Vec::len);
    let first_channel = usize::from(time_column);
    if width <= first_channel {
        bail!("{}: no data columns", path.display());
    }
    let rate = if time_column {
        if rows.len() < 2 {
            bail!("{}: need two rows to infer the sample rate", path.display());
        }
        let dt = rows[1][0] - rows[0][0];
        if !(dt > 0.0) {
            bail!("{}: time column must increase", path.display());
        }
        1.0 / dt
    } else {
        sample_rate
    };
    let t0 = if time_column {
        rows.first().map_or(0.0, |r| r[0])
    } else {
        0.0
    };
    (first_channel..width)
        .map(|c| {
            Ok(TimeSeries::new(
                rows.iter().map(|r| r[c]).collect(),
                rate,
                t0,
            )?)
        })
        .collect()
}

fn scaled_rows(loadings: &DMatrix<f64>, factors: &[f64]) -> DMatrix<f64> {
    let mut out = loadings.clone();
    for (i, f) in factors.iter().enumerate() {
        out.row_mut(i).scale_mut(*f);
    }
    out
}

fn curves(rows: &DMatrix<f64>, prefix: &str) -> Vec<Curve> {
    rows.row_iter()
        .enumerate()
        .map(|(i, r)| Curve {
            label: format!("{prefix}{}", i + 1),
            values: r.iter().copied().collect(),
        })
        .collect()
}

fn describe_input(input: &InputSource) -> String {
    match input {
        InputSource::Builtin {
            signal: SignalKind::PureSine,
            ..
        } => "sin(2πt)".into(),
        InputSource::Builtin {
            signal: SignalKind::DecreasingFreq,
            ..
        } => "sin(2πt^0.85)".into(),
        InputSource::Csv { csv, .. } => csv.display().to_string(),
    }
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn matrix(&mut self, name: &str, m: &DMatrix<f64>) -> anyhow::Result<()> {
        let p = self.path(name);
        write_matrix_csv(&p, m, None)?;
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> anyhow::Result<()> {
        let p = self.path(name);
        std::fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
    }

    fn rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> anyhow::Result<()> {
        let p = self.path(name);
        let mut w =
            csv::Writer::from_path(&p).with_context(|| format!("writing {}", p.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn default_output_dir() -> PathBuf {
    PathBuf::from("lspie_out").join(chrono::Local::now().format("%Y%m%d-%H%M%S").to_string())
}

/// Runs one configured experiment and writes its outputs.
pub fn run_experiment(config: &RunConfig, registry: &MetricRegistry) -> anyhow::Result<RunReport> {
    let started = Instant::now();
    config.validate(registry).context("stage `config`")?;
    let output_dir = config.output_dir.clone().unwrap_or_else(default_output_dir);

    let channels = load_input(&config.input).context("stage `load`")?;
    let embedded = channels
        .iter()
        .map(|c| hankelise(c, config.window))
        .collect::<Result<Vec<_>, _>>()
        .context("stage `hankelise`")?;
    let stacked = stack_channels(&embedded).context("stage `hankelise`")?;
    let x = standardise(&stacked, StandardiseMode::Center).context("stage `standardise`")?;
    let fitted = match config.model {
        ModelKind::Pca => fit_pca(&x, config.k),
        ModelKind::Ica => fit_ica(&x, config.k, &config.ica.options(config.seed)?),
    }
    .context("stage `fit`")?;

    let mut current: LatentModel = fitted.clone();
    let mut factors = vec![1.0; config.k];
    let mut permutation: Vec<usize> = (0..config.k).collect();
    let mut condensed: Option<CondensedModel> = None;
    for step in &config.enhancements {
        match *step {
            Enhancement::Rank => {
                let r = rank(&current, &config.metric, registry, &x.data, config.order)
                    .context("stage `rank`")?;
                factors = r.permutation.iter().map(|&i| factors[i]).collect();
                permutation = r.permutation.iter().map(|&i| permutation[i]).collect();
                current = r.base;
            }
            Enhancement::Scale => {
                let s = scale(
                    &current,
                    &config.metric,
                    registry,
                    &x.data,
                    config.scale_mode,
                )
                .context("stage `scale`")?;
                factors = s.scale_factors;
            }
            Enhancement::Cluster(k) => {
                let dirs = scaled_rows(&current.loadings, &factors);
                let c = cluster_directions(
                    &dirs,
                    Some(&current.scores),
                    k,
                    config.cluster.similarity,
                    config.cluster.backend,
                )
                .context("stage `cluster`")?;
                condensed = Some(
                    apply_condense_filter(&c, config.filter.spec().as_ref())
                        .context("stage `filter`")?,
                );
            }
            Enhancement::Condense => {
                let dirs = scaled_rows(&current.loadings, &factors);
                let c = condense_directions(
                    &dirs,
                    Some(&current.scores),
                    config.cluster.similarity,
                    config.cluster.eps,
                    config.cluster.min_members,
                )
                .context("stage `condense`")?;
                condensed = Some(
                    apply_condense_filter(&c, config.filter.spec().as_ref())
                        .context("stage `filter`")?,
                );
            }
        }
    }

    let metric = registry
        .evaluate(&config.metric, &current, &x.data)
        .context("stage `metrics`")?;
    let condensed_metric = match &condensed {
        Some(c) => {
            let as_model = c.as_latent_model(&current, &x.data)?;
            Some(
                registry
                    .evaluate(&config.metric, &as_model, &x.data)
                    .context("stage `metrics`")?,
            )
        }
        None => None,
    };

    std::fs::create_dir_all(&output_dir)
        .with_context(|| format!("creating {}", output_dir.display()))?;
    let mut w = Writer {
        dir: output_dir.clone(),
        files: Vec::new(),
    };
    let display = scaled_rows(&current.loadings, &factors);
    let metric_table = metric_rows(&metric);
    let result: anyhow::Result<()> = (|| {
        w.matrix("loadings.csv", &display)?;
        w.matrix("scores.csv", &current.scores)?;
        w.rows("metrics.csv", &metric_table)?;
        w.text("model.json", &current.to_json()?)?;

        let source = describe_input(&config.input);
        let kind = config.model.to_string().to_uppercase();
        w.text(
            "01_latent_directions.svg",
            &render_panel(
                &format!("{source} · {kind} · normalised latent directions"),
                &curves(&fitted.loadings, "L"),
            ),
        )?;
        let enhanced = config
            .enhancements
            .iter()
            .filter(|e| matches!(e, Enhancement::Rank | Enhancement::Scale))
            .map(ToString::to_string)
            .collect::<Vec<_>>();
        if !enhanced.is_empty() {
            w.text(
                "02_enhanced.svg",
                &render_panel(
                    &format!(
                        "{source} · {kind} · {} by {}",
                        enhanced.join(" + "),
                        config.metric
                    ),
                    &curves(&display, "L"),
                ),
            )?;
        }
        if let Some(c) = &condensed {
            let rows: Vec<ClusterRow> = c
                .assignments()
                .into_iter()
                .map(|(i, cluster_id, sign)| ClusterRow {
                    original_index: permutation[i],
                    cluster_id,
                    sign,
                })
                .collect();
            w.rows("clusters.csv", &rows)?;
            w.matrix("condensed_loadings.csv", &c.merged_loadings)?;
            w.rows(
                "condensed_metrics.csv",
                &metric_rows(condensed_metric.as_ref().expect("computed with condensed")),
            )?;
            w.text(
                "03_condensed.svg",
                &render_panel(
                    &format!("{source} · {kind} · condensed to K = {}", c.k()),
                    &curves(&c.merged_loadings, "C"),
                ),
            )?;
        }
        Ok(())
    })();
    result.context("stage `write`")?;

    let report_path = w.path("report.json");
    let mut report = RunReport {
        config: RunConfig {
            output_dir: Some(output_dir.clone()),
            ..config.clone()
        },
        output_dir,
        converged: fitted.converged,
        metric_table,
        permutation,
        clusters: condensed.as_ref().map(|c| {
            c.assignments()
                .into_iter()
                .map(|(i, cluster_id, sign)| ClusterRow {
                    original_index: i,
                    cluster_id,
                    sign,
                })
                .collect()
        }),
        condensed_k: condensed.as_ref().map(CondensedModel::k),
        condensed_metric_table: condensed_metric.as_ref().map(metric_rows),
        files: w.files.clone(),
        timing_seconds: 0.0,
    };
    if let Some(rows) = report.clusters.as_mut() {
        for r in rows.iter_mut() {
            r.original_index = report.permutation[r.original_index];
        }
    }
    report.timing_seconds = started.elapsed().as_secs_f64();
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", report_path.display()))?;
    Ok(report)
}

/// Configuration of one of the two toy experiments.
pub fn toy_config(
    signal: SignalKind,
    model: ModelKind,
    seed: u64,
    output_dir: PathBuf,
) -> RunConfig {
    RunConfig {
        input: InputSource::Builtin {
            signal,
            n_samples: 4000,
            sample_rate: toy_sample_rate(),
        },
        window: 300,
        model,
        k: 8,
        metric: "variance_explained".into(),
        enhancements: vec![Enhancement::Rank, Enhancement::Scale, Enhancement::Condense],
        seed,
        output_dir: Some(output_dir),
        ..RunConfig::default()
    }
}

/// Both toy signals with both models, run in parallel, one subdirectory each.
pub fn reproduce_paper(
    output_root: &Path,
    seed: u64,
    registry: &MetricRegistry,
) -> anyhow::Result<Vec<RunReport>> {
    let configs: Vec<RunConfig> = [SignalKind::PureSine, SignalKind::DecreasingFreq]
        .into_iter()
        .flat_map(|signal| {
            [ModelKind::Pca, ModelKind::Ica]
                .into_iter()
                .map(move |model| {
                    toy_config(
                        signal,
                        model,
                        seed,
                        output_root.join(format!("{signal}_{model}")),
                    )
                })
        })
        .collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| s.spawn(move || run_experiment(cfg, registry)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    })
}
