//! Per-direction metrics and the scaling scores derived from them.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;

use crate::error::{LspieError, Result};
use crate::linalg;
use crate::lvm::{encode, LatentModel};

/// Offset added after shifting negative metric values so the smallest
/// direction keeps a positive weight.
pub const SHIFT_EPS: f64 = 1e-12;

/// `E[log cosh ν]` for a standard normal `ν`.
const GAUSSIAN_LOGCOSH: f64 = 0.374_567_207_491_438;

/// Metric values `θ_i` for each latent direction together with the scaling
/// scores `s_i = θ_i / Σ θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricVector {
    pub metric_name: String,
    pub values: Vec<f64>,
    pub scores: Vec<f64>,
    pub source_model_id: String,
}

impl MetricVector {
    /// Builds the vector and its scaling scores.
    ///
    /// Negative values are shifted by `-min(θ) + SHIFT_EPS` before
    /// normalising. An all-zero metric gets uniform scores.
    pub fn new(
        metric_name: impl Into<String>,
        values: Vec<f64>,
        source_model_id: impl Into<String>,
    ) -> Result<Self> {
        let metric_name = metric_name.into();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LspieError::DegenerateData(format!(
                "metric `{metric_name}` is not finite for direction {i}"
            )));
        }
        let scores = scaling_scores(&values);
        Ok(Self {
            metric_name,
            values,
            scores,
            source_model_id: source_model_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn permuted(&self, order: &[usize]) -> MetricVector {
        MetricVector {
            metric_name: self.metric_name.clone(),
            values: order.iter().map(|&i| self.values[i]).collect(),
            scores: order.iter().map(|&i| self.scores[i]).collect(),
            source_model_id: self.source_model_id.clone(),
        }
    }
}

pub fn scaling_scores(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = if min < 0.0 {
        values.iter().map(|v| v - min + SHIFT_EPS).collect()
    } else {
        values.to_vec()
    };
    let total: f64 = shifted.iter().sum();
    if total > 0.0 {
        shifted.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / values.len() as f64; values.len()]
    }
}

/// Fraction of the total variance of `x` carried by each score column.
pub fn variance_explained(model: &LatentModel, x: &DMatrix<f64>) -> Result<MetricVector> {
    let total = linalg::total_variance(x);
    if !(total > 0.0) {
        return Err(LspieError::DegenerateData(
            "data has zero total variance".into(),
        ));
    }
    let scores = encode(model, x)?;
    let values = scores
        .column_iter()
        .map(|c| linalg::sample_variance(c.iter().copied()) / total)
        .collect();
    MetricVector::new("variance_explained", values, model.id())
}

/// Absolute excess kurtosis of each score column of the fitted model.
pub fn kurtosis(model: &LatentModel) -> Result<MetricVector> {
    let values = moment_metric(&model.scores, |m2, _, m4| (m4 / (m2 * m2) - 3.0).abs())?;
    MetricVector::new("kurtosis", values, model.id())
}

/// `(m2, m3, m4)` central moments, population normalisation.
fn central_moments(col: &[f64]) -> (f64, f64, f64) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in col {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (m2 / n, m3 / n, m4 / n)
}

fn moment_metric(scores: &DMatrix<f64>, f: impl Fn(f64, f64, f64) -> f64) -> Result<Vec<f64>> {
    if scores.nrows() < 4 {
        return Err(LspieError::DegenerateData(format!(
            "moment metrics need at least 4 samples, got {}",
            scores.nrows()
        )));
    }
    scores
        .column_iter()
        .enumerate()
        .map(|(j, c)| {
            let col: Vec<f64> = c.iter().copied().collect();
            let (m2, m3, m4) = central_moments(&col);
            if !(m2 > 0.0) {
                return Err(LspieError::DegenerateData(format!(
                    "score column {j} has zero variance"
                )));
            }
            Ok(f(m2, m3, m4))
        })
        .collect()
}

fn skewness_values(scores: &DMatrix<f64>) -> Result<Vec<f64>> {
    moment_metric(scores, |m2, m3, _| (m3 / m2.powf(1.5)).abs())
}

/// `(E[G(y)] - E[G(ν)])²` with `G = log cosh` on standardised scores.
fn negentropy_values(scores: &DMatrix<f64>) -> Result<Vec<f64>> {
    if scores.nrows() < 4 {
        return Err(LspieError::DegenerateData(
            "negentropy needs at least 4 samples".into(),
        ));
    }
    scores
        .column_iter()
        .enumerate()
        .map(|(j, c)| {
            let col: Vec<f64> = c.iter().copied().collect();
            let (m2, _, _) = central_moments(&col);
            if !(m2 > 0.0) {
                return Err(LspieError::DegenerateData(format!(
                    "score column {j} has zero variance"
                )));
            }
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let sd = m2.sqrt();
            let e = col.iter().map(|v| logcosh((v - mean) / sd)).sum::<f64>() / col.len() as f64;
            Ok((e - GAUSSIAN_LOGCOSH).powi(2))
        })
        .collect()
}

fn logcosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// A metric maps a model and the standardised data it was fitted on to one
/// finite value per latent direction.
pub type MetricFn = Arc<dyn Fn(&LatentModel, &DMatrix<f64>) -> Result<Vec<f64>> + Send + Sync>;

/// Named metrics. Insertion only; lookups are concurrent.
pub struct MetricRegistry {
    entries: RwLock<BTreeMap<String, MetricFn>>,
}

impl Default for MetricRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl std::fmt::Debug for MetricRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricRegistry")
            .field("names", &self.names())
            .finish()
    }
}

impl MetricRegistry {
    pub fn empty() -> Self {
        Self {
            entries: RwLock::new(BTreeMap::new()),
        }
    }

    /// Registry holding `variance_explained`, `kurtosis`, `skewness` and
    /// `negentropy_proxy`.
    pub fn with_builtins() -> Self {
        let reg = Self::empty();
        let builtins: [(&str, MetricFn); 4] = [
            (
                "variance_explained",
                Arc::new(|m, x| variance_explained(m, x).map(|v| v.values)),
            ),
            (
                "kurtosis",
                Arc::new(|m, x| {
                    moment_metric(&encode(m, x)?, |m2, _, m4| (m4 / (m2 * m2) - 3.0).abs())
                }),
            ),
            ("skewness", Arc::new(|m, x| skewness_values(&encode(m, x)?))),
            (
                "negentropy_proxy",
                Arc::new(|m, x| negentropy_values(&encode(m, x)?)),
            ),
        ];
        for (name, f) in builtins {
            reg.register(name, f).expect("builtin names are distinct");
        }
        reg
    }

    pub fn register(&self, name: impl Into<String>, metric: MetricFn) -> Result<()> {
        let name = name.into();
        let mut entries = self.entries.write().unwrap_or_else(|e| e.into_inner());
        if entries.contains_key(&name) {
            return Err(LspieError::Conflict(name));
        }
        entries.insert(name, metric);
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .contains_key(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.entries
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect()
    }

    pub fn evaluate(
        &self,
        name: &str,
        model: &LatentModel,
        x: &DMatrix<f64>,
    ) -> Result<MetricVector> {
        let metric = self
            .entries
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(name)
            .cloned()
            .ok_or_else(|| LspieError::UnknownMetric(name.to_string()))?;
        let values = metric(model, x)?;
        if values.len() != model.k {
            return Err(LspieError::ContractViolation {
                metric: name.to_string(),
                expected: model.k,
                got: values.len(),
            });
        }
        MetricVector::new(name, values, model.id())
    }
}
