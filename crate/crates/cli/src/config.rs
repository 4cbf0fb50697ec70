//! Run configuration: a TOML document whose keys mirror the CLI flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use lspie_core::{
    ClusterBackend, Contrast, FilterMode, FilterSpec, IcaOptions, MetricRegistry, ModelKind,
    RankOrder, ScaleMode, SignalKind, Similarity,
};
use serde::{Deserialize, Serialize};

/// Sampling rate of the built-in experiments, samples per second.
pub fn toy_sample_rate() -> f64 {
    4000.0 / (12.0 * std::f64::consts::PI)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSource {
    Builtin {
        signal: SignalKind,
        #[serde(default = "default_n_samples")]
        n_samples: usize,
        #[serde(default = "toy_sample_rate")]
        sample_rate: f64,
    },
    Csv {
        csv: PathBuf,
        /// First column holds time stamps rather than a channel.
        #[serde(default)]
        time_column: bool,
        /// Used when there is no time column.
        #[serde(default = "default_csv_rate")]
        sample_rate: f64,
    },
}

fn default_n_samples() -> usize {
    4000
}

fn default_csv_rate() -> f64 {
    1.0
}

impl Default for InputSource {
    fn default() -> Self {
        InputSource::Builtin {
            signal: SignalKind::PureSine,
            n_samples: default_n_samples(),
            sample_rate: toy_sample_rate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Enhancement {
    Rank,
    Scale,
    Cluster(usize),
    Condense,
}

impl std::str::FromStr for Enhancement {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let s = s.trim();
        Ok(match s {
            "rank" => Enhancement::Rank,
            "scale" => Enhancement::Scale,
            "condense" => Enhancement::Condense,
            _ => match s
                .strip_prefix("cluster:")
                .or_else(|| s.strip_prefix("cluster="))
            {
                Some(k) => Enhancement::Cluster(
                    k.parse()
                        .with_context(|| format!("bad cluster count in `{s}`"))?,
                ),
                None => bail!("unknown enhancement `{s}` (rank, scale, cluster:K, condense)"),
            },
        })
    }
}

impl std::fmt::Display for Enhancement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Enhancement::Rank => f.write_str("rank"),
            Enhancement::Scale => f.write_str("scale"),
            Enhancement::Cluster(k) => write!(f, "cluster:{k}"),
            Enhancement::Condense => f.write_str("condense"),
        }
    }
}

impl Serialize for Enhancement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Enhancement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub enabled: bool,
    pub order: usize,
    pub cutoff: f64,
    pub mode: FilterMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let spec = FilterSpec::default();
        FilterConfig {
            enabled: true,
            order: spec.order,
            cutoff: spec.cutoff,
            mode: spec.mode,
        }
    }
}

impl FilterConfig {
    pub fn spec(&self) -> Option<FilterSpec> {
        self.enabled.then_some(FilterSpec {
            order: self.order,
            cutoff: self.cutoff,
            mode: self.mode,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub similarity: Similarity,
    pub backend: ClusterBackend,
    pub eps: f64,
    pub min_members: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            similarity: Similarity::AbsCosine,
            backend: ClusterBackend::Agglomerative,
            eps: 0.2,
            min_members: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcaConfig {
    pub contrast: String,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub whiten: bool,
}

impl Default for IcaConfig {
    fn default() -> Self {
        let d = IcaOptions::default();
        IcaConfig {
            contrast: "logcosh".into(),
            alpha: 1.0,
            tol: d.tol,
            max_iter: d.max_iter,
            whiten: d.whiten,
        }
    }
}

impl IcaConfig {
    pub fn options(&self, seed: u64) -> anyhow::Result<IcaOptions> {
        let contrast = match self.contrast.as_str() {
            "logcosh" => Contrast::LogCosh { alpha: self.alpha },
            "cube" => Contrast::Cube,
            other => bail!("unknown ICA contrast `{other}` (logcosh, cube)"),
        };
        Ok(IcaOptions {
            contrast,
            tol: self.tol,
            max_iter: self.max_iter,
            seed,
            whiten: self.whiten,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSource,
    pub window: usize,
    pub model: ModelKind,
    pub k: usize,
    pub metric: String,
    pub enhancements: Vec<Enhancement>,
    pub order: RankOrder,
    pub scale_mode: ScaleMode,
    pub filter: FilterConfig,
    pub cluster: ClusterConfig,
    pub ica: IcaConfig,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: InputSource::default(),
            window: 300,
            model: ModelKind::Pca,
            k: 8,
            metric: "variance_explained".into(),
            enhancements: vec![Enhancement::Rank, Enhancement::Scale],
            order: RankOrder::Descending,
            scale_mode: ScaleMode::Multiply,
            filter: FilterConfig::default(),
            cluster: ClusterConfig::default(),
            ica: IcaConfig::default(),
            seed: 0,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self, registry: &MetricRegistry) -> anyhow::Result<()> {
        let grouping = self
            .enhancements
            .iter()
            .filter(|e| matches!(e, Enhancement::Cluster(_) | Enhancement::Condense))
            .count();
        if grouping > 1 {
            bail!("at most one of cluster and condense may be requested");
        }
        if !registry.contains(&self.metric) {
            bail!(
                "unknown metric `{}` (available: {})",
                self.metric,
                registry.names().join(", ")
            );
        }
        if let Some(spec) = self.filter.spec() {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn has_condensing(&self) -> bool {
        self.enhancements
            .iter()
            .any(|e| matches!(e, Enhancement::Cluster(_) | Enhancement::Condense))
    }
}
