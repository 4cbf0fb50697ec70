//! The four enhancements: latent ranking, latent scaling, latent clustering
//! and latent condensing.

mod cluster;

pub use cluster::{
    apply_condense_filter, cluster, cluster_directions, condense, condense_directions,
    distance_matrix, ClusterBackend, CondenseMethod, CondensedModel, Similarity,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LspieError, Result};
use crate::lvm::LatentModel;
use crate::metrics::{MetricRegistry, MetricVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankOrder {
    #[default]
    Descending,
    Ascending,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedModel {
    /// The input model with its directions reordered.
    pub base: LatentModel,
    pub metric: MetricVector,
    /// `permutation[new] = old`.
    pub permutation: Vec<usize>,
    pub order: RankOrder,
}

/// Reorders the directions of `model` by the named metric.
pub fn rank(
    model: &LatentModel,
    metric: &str,
    registry: &MetricRegistry,
    x: &DMatrix<f64>,
    order: RankOrder,
) -> Result<RankedModel> {
    let values = registry.evaluate(metric, model, x)?;
    Ok(rank_by(model, values, order))
}

/// Ranks by precomputed metric values. Ties keep their original order.
pub fn rank_by(model: &LatentModel, metric: MetricVector, order: RankOrder) -> RankedModel {
    let permutation = sort_permutation(&metric.values, order);
    RankedModel {
        base: model.permuted(&permutation),
        metric: metric.permuted(&permutation),
        permutation,
        order,
    }
}

pub fn sort_permutation(values: &[f64], order: RankOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let c = values[a].total_cmp(&values[b]);
        match order {
            RankOrder::Ascending => c,
            RankOrder::Descending => c.reverse(),
        }
    });
    idx
}

/// How scaling scores are applied to the directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// `L̃ = s · L`: prominent directions stay long, minor ones shrink.
    #[default]
    Multiply,
    /// `L̃ = L / s`, the literal published operator.
    Divide,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledModel {
    pub base: LatentModel,
    /// `k × n`, row `i` parallel to `base.loadings` row `i`.
    pub scaled_loadings: DMatrix<f64>,
    /// Multiplier applied to each direction.
    pub scale_factors: Vec<f64>,
    pub metric: MetricVector,
    pub mode: ScaleMode,
}

impl ScaledModel {
    /// The base model with its loadings replaced by the scaled ones, so that
    /// clustering sums the weighted directions.
    pub fn as_latent_model(&self) -> LatentModel {
        LatentModel {
            loadings: self.scaled_loadings.clone(),
            direction_norms: self.scaled_loadings.row_iter().map(|r| r.norm()).collect(),
            ..self.base.clone()
        }
    }
}

/// Rescales every direction by its scaling score for the named metric.
pub fn scale(
    model: &LatentModel,
    metric: &str,
    registry: &MetricRegistry,
    x: &DMatrix<f64>,
    mode: ScaleMode,
) -> Result<ScaledModel> {
    let values = registry.evaluate(metric, model, x)?;
    scale_by(model, values, mode)
}

pub fn scale_by(model: &LatentModel, metric: MetricVector, mode: ScaleMode) -> Result<ScaledModel> {
    if metric.values.iter().all(|&v| v == 0.0) {
        return Err(LspieError::DegenerateData(format!(
            "metric `{}` is zero for every direction",
            metric.metric_name
        )));
    }
    let scale_factors: Vec<f64> = match mode {
        ScaleMode::Multiply => metric.scores.clone(),
        ScaleMode::Divide => {
            if let Some(i) = metric.scores.iter().position(|&s| s == 0.0) {
                return Err(LspieError::DegenerateData(format!(
                    "scaling score of direction {i} is zero, cannot divide"
                )));
            }
            metric.scores.iter().map(|s| 1.0 / s).collect()
        }
    };
    let mut scaled_loadings = model.loadings.clone();
    for (i, f) in scale_factors.iter().enumerate() {
        scaled_loadings.row_mut(i).scale_mut(*f);
    }
    Ok(ScaledModel {
        base: model.clone(),
        scaled_loadings,
        scale_factors,
        metric,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::lvm::fit_pca_centered;
    use proptest::prelude::*;

    fn model(k: usize) -> LatentModel {
        let x = DMatrix::from_fn(k + 3, k, |i, j| ((i * 5 + j * 3) as f64 * 0.9).sin());
        fit_pca_centered(&x, k).unwrap()
    }

    fn mv(values: &[f64], m: &LatentModel) -> MetricVector {
        MetricVector::new("test", values.to_vec(), m.id()).unwrap()
    }

    #[test]
    fn rank_sorts_descending() {
        let m = model(3);
        let r = rank_by(&m, mv(&[0.2, 0.5, 0.3], &m), RankOrder::Descending);
        assert_eq!(r.permutation, vec![1, 2, 0]);
        assert_eq!(r.metric.values, vec![0.5, 0.3, 0.2]);
        assert_eq!(r.base.loadings.row(0), m.loadings.row(1));
        let r = rank_by(&m, mv(&[0.2, 0.5, 0.3], &m), RankOrder::Ascending);
        assert_eq!(r.permutation, vec![0, 2, 1]);
    }

    #[test]
    fn ties_keep_original_order() {
        assert_eq!(
            sort_permutation(&[1.0, 2.0, 1.0, 2.0], RankOrder::Descending),
            vec![1, 3, 0, 2]
        );
    }

    #[test]
    fn pca_is_already_ranked_by_variance() {
        let x = DMatrix::from_fn(20, 5, |i, j| {
            ((i * 7 + j * 11) as f64 * 0.37).cos() * (j + 1) as f64
        });
        let mut xc = x.clone();
        for j in 0..5 {
            let mu = x.column(j).mean();
            xc.column_mut(j).add_scalar_mut(-mu);
        }
        let m = fit_pca_centered(&xc, 4).unwrap();
        let reg = MetricRegistry::with_builtins();
        let r = rank(&m, "variance_explained", &reg, &xc, RankOrder::Descending).unwrap();
        assert_eq!(r.permutation, vec![0, 1, 2, 3]);
        assert!(matches!(
            rank(&m, "missing", &reg, &xc, RankOrder::Descending),
            Err(LspieError::UnknownMetric(_))
        ));
    }

    #[test]
    fn scale_examples() {
        let m = model(3);
        let s = scale_by(&m, mv(&[0.5, 0.3, 0.2], &m), ScaleMode::Multiply).unwrap();
        for (i, want) in [0.5, 0.3, 0.2].iter().enumerate() {
            assert!((s.scaled_loadings.row(i).norm() - want).abs() < 1e-10);
        }
        let d = scale_by(&m, mv(&[0.5, 0.3, 0.2], &m), ScaleMode::Divide).unwrap();
        assert!((d.scaled_loadings.row(2).norm() - 5.0).abs() < 1e-10);

        let one = model(1);
        let s = scale_by(&one, mv(&[0.7], &one), ScaleMode::Multiply).unwrap();
        assert_eq!(s.scale_factors, vec![1.0]);
        assert_eq!(s.scaled_loadings, one.loadings);

        assert!(matches!(
            scale_by(&m, mv(&[0.0, 0.0, 0.0], &m), ScaleMode::Multiply),
            Err(LspieError::DegenerateData(_))
        ));
        assert!(scale_by(&m, mv(&[0.0, 1.0, 0.0], &m), ScaleMode::Divide).is_err());
    }

    proptest! {
        #[test]
        fn rank_invariants(values in proptest::collection::vec(0.0f64..1.0, 1..8)) {
            let m = model(values.len());
            let r = rank_by(&m, mv(&values, &m), RankOrder::Descending);
            prop_assert!(r.metric.values.windows(2).all(|w| w[0] >= w[1]));
            let mut seen = r.permutation.clone();
            seen.sort();
            prop_assert_eq!(seen, (0..values.len()).collect::<Vec<_>>());
            let again = rank_by(&r.base, r.metric.clone(), RankOrder::Descending);
            prop_assert_eq!(again.permutation, (0..values.len()).collect::<Vec<_>>());
        }

        #[test]
        fn scale_keeps_directions(values in proptest::collection::vec(0.01f64..1.0, 1..8)) {
            let m = model(values.len());
            let s = scale_by(&m, mv(&values, &m), ScaleMode::Multiply).unwrap();
            for i in 0..values.len() {
                let a: Vec<f64> = s.scaled_loadings.row(i).iter().copied().collect();
                prop_assert!((linalg::cosine(&a, &m.loading(i)).abs() - 1.0).abs() < 1e-12);
            }
            let top = linalg::argmax_abs(s.metric.values.iter());
            let norms: Vec<f64> = s.scaled_loadings.row_iter().map(|r| r.norm()).collect();
            prop_assert_eq!(linalg::argmax_abs(norms.iter()), top);
        }
    }
}
