//! Latent clustering (fixed K) and latent condensing (K found by density).
//!
//! Directions are compared with a sign-invariant distance, grouped, and each
//! group is summed after flipping members to agree in sign with the
//! group's longest member.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LspieError, Result};
use crate::linalg;
use crate::lvm::LatentModel;
use crate::postfilter::{apply_filter, FilterSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    /// `1 - |cos|` between loadings.
    #[default]
    AbsCosine,
    /// `1 - |corr|` between score columns.
    ScoreCorrelation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterBackend {
    /// Complete-linkage agglomerative clustering.
    #[default]
    Agglomerative,
    /// Spherical k-means with sign-invariant assignment.
    KMeans,
}

impl std::str::FromStr for Similarity {
    type Err = LspieError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs_cosine" => Ok(Self::AbsCosine),
            "score_correlation" => Ok(Self::ScoreCorrelation),
            other => invalid(format!("unknown similarity `{other}`")),
        }
    }
}

impl std::str::FromStr for ClusterBackend {
    type Err = LspieError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "agglomerative" => Ok(Self::Agglomerative),
            "k_means" => Ok(Self::KMeans),
            other => invalid(format!("unknown clustering backend `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CondenseMethod {
    Lc,
    Lcon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondensedModel {
    /// Member indices per cluster, ascending, clusters ordered by their
    /// smallest member.
    pub clusters: Vec<Vec<usize>>,
    /// `K × n`, row `k` is the signed sum of the members of cluster `k`.
    pub merged_loadings: DMatrix<f64>,
    /// `±1` per member, aligned with `clusters`.
    pub member_signs: Vec<Vec<f64>>,
    pub filter_applied: bool,
    pub method: CondenseMethod,
    /// Number of directions that were clustered.
    pub n_directions: usize,
}

impl CondensedModel {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    /// `(original_index, cluster_id, sign)` sorted by original index.
    pub fn assignments(&self) -> Vec<(usize, usize, i8)> {
        let mut rows: Vec<(usize, usize, i8)> = self
            .clusters
            .iter()
            .zip(&self.member_signs)
            .enumerate()
            .flat_map(|(c, (members, signs))| {
                members
                    .iter()
                    .zip(signs)
                    .map(move |(&i, &s)| (i, c, if s < 0.0 { -1 } else { 1 }))
            })
            .collect();
        rows.sort();
        rows
    }

    pub fn merged_norms(&self) -> Vec<f64> {
        self.merged_loadings.row_iter().map(|r| r.norm()).collect()
    }

    /// A model whose directions are the unit merged loadings, scored by plain
    /// projection of `x`.
    pub fn as_latent_model(&self, base: &LatentModel, x: &DMatrix<f64>) -> Result<LatentModel> {
        if x.ncols() != self.merged_loadings.ncols() {
            return invalid(format!(
                "data has {} columns, condensed directions have {}",
                x.ncols(),
                self.merged_loadings.ncols()
            ));
        }
        let norms = self.merged_norms();
        let mut loadings = self.merged_loadings.clone();
        for (i, n) in norms.iter().enumerate() {
            if *n > 0.0 {
                loadings.row_mut(i).unscale_mut(*n);
            }
        }
        let scores = x * loadings.transpose();
        Ok(LatentModel {
            kind: base.kind,
            filters: loadings.clone(),
            loadings,
            scores,
            eigenvalues: None,
            mean: base.mean.clone(),
            whitening_transform: base.whitening_transform.clone(),
            k: self.k(),
            seed: base.seed,
            direction_norms: norms,
            converged: base.converged,
            n_iter: base.n_iter,
        })
    }
}

/// Vectors compared by the chosen similarity: loadings rows, or centered
/// score columns (so that cosine equals correlation).
fn feature_vectors(
    loadings: &DMatrix<f64>,
    scores: Option<&DMatrix<f64>>,
    similarity: Similarity,
) -> Result<Vec<Vec<f64>>> {
    match similarity {
        Similarity::AbsCosine => Ok(loadings
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()),
        Similarity::ScoreCorrelation => {
            let scores = scores
                .filter(|s| s.nrows() >= 2 && s.ncols() == loadings.nrows())
                .ok_or_else(|| {
                    LspieError::InvalidArgument(
                        "score correlation needs a score column per direction".into(),
                    )
                })?;
            Ok(scores
                .column_iter()
                .map(|c| {
                    let mu = c.mean();
                    c.iter().map(|v| v - mu).collect()
                })
                .collect())
        }
    }
}

fn abs_cos_distance(a: &[f64], b: &[f64]) -> f64 {
    (1.0 - linalg::cosine(a, b).abs()).max(0.0)
}

/// Pairwise sign-invariant distances in `[0, 1]`.
pub fn distance_matrix(
    loadings: &DMatrix<f64>,
    scores: Option<&DMatrix<f64>>,
    similarity: Similarity,
) -> Result<DMatrix<f64>> {
    let f = feature_vectors(loadings, scores, similarity)?;
    let m = f.len();
    Ok(DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            0.0
        } else {
            abs_cos_distance(&f[i], &f[j])
        }
    }))
}

fn agglomerative(dist: &DMatrix<f64>, k: usize) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = (0..dist.nrows()).map(|i| vec![i]).collect();
    while clusters.len() > k {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let linkage = clusters[a]
                    .iter()
                    .flat_map(|&i| clusters[b].iter().map(move |&j| dist[(i, j)]))
                    .fold(0.0, f64::max);
                if linkage < best.0 {
                    best = (linkage, a, b);
                }
            }
        }
        let (_, a, b) = best;
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
    }
    clusters
}

fn kmeans(features: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    let m = features.len();
    let unit = |v: &[f64]| -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            v.iter().map(|x| x / n).collect()
        } else {
            v.to_vec()
        }
    };
    // farthest-point seeding from direction 0
    let mut centroids = vec![unit(&features[0])];
    while centroids.len() < k {
        let next = (0..m)
            .max_by(|&a, &b| {
                let da = centroids
                    .iter()
                    .map(|c| abs_cos_distance(&features[a], c))
                    .fold(f64::INFINITY, f64::min);
                let db = centroids
                    .iter()
                    .map(|c| abs_cos_distance(&features[b], c))
                    .fold(f64::INFINITY, f64::min);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .unwrap_or(0);
        centroids.push(unit(&features[next]));
    }
    let mut assign = vec![usize::MAX; m];
    for _ in 0..100 {
        let mut next_assign: Vec<usize> = features
            .iter()
            .map(|f| {
                (0..k)
                    .min_by(|&a, &b| {
                        abs_cos_distance(f, &centroids[a])
                            .total_cmp(&abs_cos_distance(f, &centroids[b]))
                            .then(a.cmp(&b))
                    })
                    .unwrap()
            })
            .collect();
        // refill empty clusters with the worst-fitting point
        for c in 0..k {
            if !next_assign.contains(&c) {
                let worst = (0..m)
                    .filter(|&i| next_assign.iter().filter(|&&a| a == next_assign[i]).count() > 1)
                    .max_by(|&a, &b| {
                        abs_cos_distance(&features[a], &centroids[next_assign[a]])
                            .total_cmp(&abs_cos_distance(&features[b], &centroids[next_assign[b]]))
                    });
                if let Some(w) = worst {
                    next_assign[w] = c;
                }
            }
        }
        if next_assign == assign {
            break;
        }
        assign = next_assign;
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<usize> = (0..m).filter(|&i| assign[i] == c).collect();
            let Some(&anchor) = members.first() else {
                continue;
            };
            let mut sum = vec![0.0; features[anchor].len()];
            for &i in &members {
                let sign = if linalg::cosine(&features[i], centroid) < 0.0 {
                    -1.0
                } else {
                    1.0
                };
                let u = unit(&features[i]);
                for (s, v) in sum.iter_mut().zip(&u) {
                    *s += sign * v;
                }
            }
            *centroid = unit(&sum);
        }
    }
    (0..k)
        .map(|c| (0..m).filter(|&i| assign[i] == c).collect())
        .filter(|v: &Vec<usize>| !v.is_empty())
        .collect()
}

/// DBSCAN over a precomputed distance matrix. A point is core when at least
/// `min_members` points (itself included) lie within `eps`. Noise points come
/// back as singleton clusters.
fn dbscan(dist: &DMatrix<f64>, eps: f64, min_members: usize) -> Vec<Vec<usize>> {
    let m = dist.nrows();
    let neighbours: Vec<Vec<usize>> = (0..m)
        .map(|i| (0..m).filter(|&j| dist[(i, j)] <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|n| n.len() >= min_members).collect();
    let mut label: Vec<Option<usize>> = vec![None; m];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for start in 0..m {
        if label[start].is_some() || !core[start] {
            continue;
        }
        let id = clusters.len();
        let mut members = Vec::new();
        let mut stack = vec![start];
        label[start] = Some(id);
        while let Some(p) = stack.pop() {
            members.push(p);
            if !core[p] {
                continue;
            }
            for &q in &neighbours[p] {
                if label[q].is_none() {
                    label[q] = Some(id);
                    stack.push(q);
                }
            }
        }
        clusters.push(members);
    }
    for (i, l) in label.iter().enumerate() {
        if l.is_none() {
            clusters.push(vec![i]);
        }
    }
    clusters
}

fn canonical_order(mut clusters: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for c in clusters.iter_mut() {
        c.sort_unstable();
    }
    clusters.sort_by_key(|c| c[0]);
    clusters
}

fn merge(
    loadings: &DMatrix<f64>,
    clusters: Vec<Vec<usize>>,
    method: CondenseMethod,
) -> CondensedModel {
    let clusters = canonical_order(clusters);
    let n = loadings.ncols();
    let mut merged = DMatrix::zeros(clusters.len(), n);
    let mut member_signs = Vec::with_capacity(clusters.len());
    for (c, members) in clusters.iter().enumerate() {
        let anchor = *members
            .iter()
            .max_by(|&&a, &&b| {
                loadings
                    .row(a)
                    .norm()
                    .total_cmp(&loadings.row(b).norm())
                    .then(b.cmp(&a))
            })
            .expect("clusters are non-empty");
        let signs: Vec<f64> = members
            .iter()
            .map(|&i| {
                if loadings.row(i).dot(&loadings.row(anchor)) < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            })
            .collect();
        for (&i, &s) in members.iter().zip(&signs) {
            let row = loadings.row(i) * s;
            let mut target = merged.row_mut(c);
            target += row;
        }
        member_signs.push(signs);
    }
    CondensedModel {
        clusters,
        merged_loadings: merged,
        member_signs,
        filter_applied: false,
        method,
        n_directions: loadings.nrows(),
    }
}

/// Latent clustering of a model's directions into exactly `k` groups.
pub fn cluster(
    model: &LatentModel,
    k: usize,
    similarity: Similarity,
    backend: ClusterBackend,
) -> Result<CondensedModel> {
    cluster_directions(&model.loadings, Some(&model.scores), k, similarity, backend)
}

pub fn cluster_directions(
    loadings: &DMatrix<f64>,
    scores: Option<&DMatrix<f64>>,
    k: usize,
    similarity: Similarity,
    backend: ClusterBackend,
) -> Result<CondensedModel> {
    let m = loadings.nrows();
    if k == 0 || k > m {
        return invalid(format!("cluster count {k} outside 1..={m}"));
    }
    let clusters = match backend {
        ClusterBackend::Agglomerative => {
            agglomerative(&distance_matrix(loadings, scores, similarity)?, k)
        }
        ClusterBackend::KMeans => kmeans(&feature_vectors(loadings, scores, similarity)?, k),
    };
    Ok(merge(loadings, clusters, CondenseMethod::Lc))
}

/// Latent condensing: the number of groups follows from density clustering
/// of the pairwise distances.
pub fn condense(
    model: &LatentModel,
    similarity: Similarity,
    eps: f64,
    min_members: usize,
) -> Result<CondensedModel> {
    condense_directions(
        &model.loadings,
        Some(&model.scores),
        similarity,
        eps,
        min_members,
    )
}

pub fn condense_directions(
    loadings: &DMatrix<f64>,
    scores: Option<&DMatrix<f64>>,
    similarity: Similarity,
    eps: f64,
    min_members: usize,
) -> Result<CondensedModel> {
    if !(eps > 0.0) {
        return invalid(format!("eps must be positive, got {eps}"));
    }
    if min_members == 0 {
        return invalid("min_members must be at least 1");
    }
    if loadings.nrows() == 0 {
        return invalid("no directions to condense");
    }
    let dist = distance_matrix(loadings, scores, similarity)?;
    Ok(merge(
        loadings,
        dbscan(&dist, eps, min_members),
        CondenseMethod::Lcon,
    ))
}

/// Filters every merged direction. `None` leaves the model untouched.
pub fn apply_condense_filter(
    condensed: &CondensedModel,
    filter: Option<&FilterSpec>,
) -> Result<CondensedModel> {
    let Some(spec) = filter else {
        return Ok(condensed.clone());
    };
    let mut out = condensed.clone();
    for (i, row) in condensed.merged_loadings.row_iter().enumerate() {
        let values: Vec<f64> = row.iter().copied().collect();
        let filtered = apply_filter(&values, spec)?;
        for (j, v) in filtered.into_iter().enumerate() {
            out.merged_loadings[(i, j)] = v;
        }
    }
    out.filter_applied = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rows(r: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(r.len(), r[0].len(), |i, j| r[i][j])
    }

    #[test]
    fn duplicates_cluster_together() {
        let l = rows(&[&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        for backend in [ClusterBackend::Agglomerative, ClusterBackend::KMeans] {
            let c = cluster_directions(&l, None, 2, Similarity::AbsCosine, backend).unwrap();
            assert_eq!(c.clusters, vec![vec![0, 1], vec![2]], "{backend:?}");
            assert_eq!(
                c.merged_loadings.row(0).iter().copied().collect::<Vec<_>>(),
                vec![2.0, 0.0, 0.0]
            );
        }
    }

    #[test]
    fn k_equal_m_is_identity() {
        let l = rows(&[&[1.0, 0.2], &[0.3, 1.0], &[-0.5, 0.5]]);
        let c = cluster_directions(
            &l,
            None,
            3,
            Similarity::AbsCosine,
            ClusterBackend::Agglomerative,
        )
        .unwrap();
        assert_eq!(c.clusters, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(c.merged_loadings, l);
        assert!(cluster_directions(
            &l,
            None,
            4,
            Similarity::AbsCosine,
            ClusterBackend::Agglomerative
        )
        .is_err());
        assert!(cluster_directions(
            &l,
            None,
            0,
            Similarity::AbsCosine,
            ClusterBackend::Agglomerative
        )
        .is_err());
    }

    #[test]
    fn antiparallel_pair_condenses_with_alignment() {
        let l = rows(&[&[0.6, 0.8, 0.0], &[-0.6, -0.8, 0.0], &[0.0, 0.0, 1.0]]);
        let c = condense_directions(&l, None, Similarity::AbsCosine, 0.1, 1).unwrap();
        assert_eq!(c.clusters, vec![vec![0, 1], vec![2]]);
        assert_eq!(c.member_signs[0], vec![1.0, -1.0]);
        let merged: Vec<f64> = c.merged_loadings.row(0).iter().copied().collect();
        assert!((merged[0] - 1.2).abs() < 1e-12 && (merged[1] - 1.6).abs() < 1e-12);
        assert_eq!(c.assignments(), vec![(0, 0, 1), (1, 0, -1), (2, 1, 1)]);
    }

    #[test]
    fn orthogonal_directions_stay_apart() {
        let l = DMatrix::identity(5, 5);
        let c = condense_directions(&l, None, Similarity::AbsCosine, 0.1, 1).unwrap();
        assert_eq!(c.k(), 5);
    }

    #[test]
    fn dbscan_noise_points_are_singletons() {
        let l = rows(&[&[1.0, 0.0], &[0.99, 0.05], &[0.0, 1.0]]);
        let c = condense_directions(&l, None, Similarity::AbsCosine, 0.05, 2).unwrap();
        assert_eq!(c.clusters, vec![vec![0, 1], vec![2]]);
        assert!(condense_directions(&l, None, Similarity::AbsCosine, 0.0, 1).is_err());
        assert!(condense_directions(&l, None, Similarity::AbsCosine, 0.1, 0).is_err());
    }

    #[test]
    fn score_correlation_uses_scores() {
        let l = DMatrix::identity(3, 3);
        let s = rows(&[
            &[1.0, -2.0, 0.0],
            &[2.0, -4.0, 1.0],
            &[3.0, -6.0, 0.0],
            &[4.0, -8.0, -1.0],
        ]);
        let c = condense_directions(&l, Some(&s), Similarity::ScoreCorrelation, 0.01, 1).unwrap();
        assert_eq!(c.clusters, vec![vec![0, 1], vec![2]]);
        assert!(condense_directions(&l, None, Similarity::ScoreCorrelation, 0.1, 1).is_err());
    }

    #[test]
    fn filter_off_and_constant_direction() {
        let l = DMatrix::from_element(2, 64, 0.125);
        let c = cluster_directions(
            &l,
            None,
            1,
            Similarity::AbsCosine,
            ClusterBackend::Agglomerative,
        )
        .unwrap();
        assert_eq!(apply_condense_filter(&c, None).unwrap(), c);
        let f = apply_condense_filter(&c, Some(&FilterSpec::default())).unwrap();
        assert!(f.filter_applied);
        assert!((f.merged_loadings.clone() - c.merged_loadings.clone()).amax() < 1e-9);
    }

    #[test]
    fn filter_removes_dither() {
        let n = 2000;
        let spec = FilterSpec {
            cutoff: 0.02,
            ..FilterSpec::default()
        };
        let slow: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 0.002 * i as f64).sin())
            .collect();
        let dither = |i: usize| 0.3 * (2.0 * std::f64::consts::PI * 0.2 * i as f64).sin();
        let l = DMatrix::from_fn(1, n, |_, j| slow[j] + dither(j));
        let c = cluster_directions(
            &l,
            None,
            1,
            Similarity::AbsCosine,
            ClusterBackend::Agglomerative,
        )
        .unwrap();
        let f = apply_condense_filter(&c, Some(&spec)).unwrap();
        let resid: f64 = (100..n - 100)
            .map(|j| (f.merged_loadings[(0, j)] - slow[j]).abs())
            .fold(0.0, f64::max);
        assert!(resid <= 0.01 * 0.3, "{resid}");
    }

    fn random_rows(seed: u64, m: usize, n: usize) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    proptest! {
        #[test]
        fn partitions_are_exact(seed in any::<u64>(), m in 1usize..9, k_frac in 0.0f64..1.0, eps in 0.001f64..1.2) {
            let l = random_rows(seed, m, 4);
            let k = 1 + ((m - 1) as f64 * k_frac) as usize;
            let check = |c: &CondensedModel| {
                let mut all: Vec<usize> = c.clusters.iter().flatten().copied().collect();
                all.sort();
                all == (0..m).collect::<Vec<_>>()
            };
            for backend in [ClusterBackend::Agglomerative, ClusterBackend::KMeans] {
                let c = cluster_directions(&l, None, k, Similarity::AbsCosine, backend).unwrap();
                prop_assert!(check(&c));
                if backend == ClusterBackend::Agglomerative {
                    prop_assert_eq!(c.k(), k);
                }
            }
            let c = condense_directions(&l, None, Similarity::AbsCosine, eps, 1).unwrap();
            prop_assert!(check(&c));
            prop_assert!(c.k() <= m);
        }

        #[test]
        fn condense_k_monotone_in_eps(seed in any::<u64>(), m in 1usize..9, min_members in 1usize..3) {
            let l = random_rows(seed, m, 3);
            let mut last = usize::MAX;
            for step in 1..=60 {
                let eps = step as f64 * 0.02;
                let k = condense_directions(&l, None, Similarity::AbsCosine, eps, min_members).unwrap().k();
                prop_assert!(k <= last);
                last = k;
            }
            prop_assert_eq!(condense_directions(&l, None, Similarity::AbsCosine, 1.0, 1).unwrap().k(), 1);
            prop_assert_eq!(condense_directions(&l, None, Similarity::AbsCosine, 1e-9, 1).unwrap().k(), m);
        }

        #[test]
        fn aligned_sum_is_long(seed in any::<u64>(), m in 2usize..6) {
            // members within a narrow cone, random signs
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let l = DMatrix::from_fn(m, 4, |_, j| if j == 0 { 1.0 } else { rng.random::<f64>() * 0.1 });
            let mut l = l;
            for i in 0..m {
                if rng.random::<bool>() {
                    l.row_mut(i).neg_mut();
                }
                let s = 0.5 + rng.random::<f64>();
                l.row_mut(i).scale_mut(s);
            }
            let c = cluster_directions(&l, None, 1, Similarity::AbsCosine, ClusterBackend::Agglomerative).unwrap();
            let max_member = l.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
            prop_assert!(c.merged_norms()[0] >= max_member);
        }
    }
}
