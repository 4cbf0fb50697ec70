//! Linear latent variable models: PCA and FastICA.
//!
//! Both models expose the same surface. `loadings` are unit-norm latent
//! directions in the column space of the fitted data, `filters` project data
//! onto them (`scores = X · filtersᵀ`) and `decode` rebuilds data as
//! `scores · loadings`. For PCA the filters and loadings coincide. For ICA the
//! loadings are the unit mixing patterns and the filters are the matching
//! rows of the unmixing matrix, rescaled so that each score column is the
//! coordinate of the data along its loading.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LspieError, Result};
use crate::linalg;
use crate::signals::{Standardisation, TrajectoryMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Pca,
    Ica,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Pca => "pca",
            Self::Ica => "ica",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = LspieError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(Self::Pca),
            "ica" => Ok(Self::Ica),
            other => invalid(format!("unknown model `{other}`")),
        }
    }
}

/// A fitted linear latent variable model.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    pub kind: ModelKind,
    /// `k × n`, one latent direction per row.
    pub loadings: DMatrix<f64>,
    /// `k × n`; `scores = X · filtersᵀ`.
    pub filters: DMatrix<f64>,
    /// `m × k` scores of the training data.
    pub scores: DMatrix<f64>,
    /// PCA only: the leading `k` covariance eigenvalues, descending.
    pub eigenvalues: Option<Vec<f64>>,
    /// Column means removed before fitting.
    pub mean: Vec<f64>,
    /// `n_raw × n` whitening applied before fitting, if any.
    pub whitening_transform: Option<DMatrix<f64>>,
    pub k: usize,
    pub seed: Option<u64>,
    pub direction_norms: Vec<f64>,
    pub converged: bool,
    pub n_iter: usize,
}

impl LatentModel {
    pub fn n_features(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn loading(&self, i: usize) -> Vec<f64> {
        self.loadings.row(i).iter().copied().collect()
    }

    /// Stable identifier derived from the model contents.
    pub fn id(&self) -> String {
        // FNV-1a over the loading bits, stable across platforms and runs.
        let mut h: u64 = 0xcbf29ce484222325;
        for v in self.loadings.iter() {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        format!("{}-k{}-{h:016x}", self.kind, self.k)
    }

    /// Reorders the directions; `order[new] = old`.
    pub fn permuted(&self, order: &[usize]) -> LatentModel {
        let pick_rows =
            |m: &DMatrix<f64>| DMatrix::from_fn(order.len(), m.ncols(), |i, j| m[(order[i], j)]);
        LatentModel {
            loadings: pick_rows(&self.loadings),
            filters: pick_rows(&self.filters),
            scores: DMatrix::from_fn(self.scores.nrows(), order.len(), |i, j| {
                self.scores[(i, order[j])]
            }),
            eigenvalues: self
                .eigenvalues
                .as_ref()
                .map(|e| order.iter().map(|&i| e[i]).collect()),
            direction_norms: order.iter().map(|&i| self.direction_norms[i]).collect(),
            k: order.len(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|source| LspieError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LspieError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// On-disk layout of a fitted model. Training scores are not stored.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    kind: ModelKind,
    k: usize,
    seed: Option<u64>,
    loadings: Vec<Vec<f64>>,
    filters: Vec<Vec<f64>>,
    eigenvalues: Option<Vec<f64>>,
    mean: Vec<f64>,
    whitening_transform: Option<Vec<Vec<f64>>>,
    direction_norms: Vec<f64>,
    converged: bool,
    n_iter: usize,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return invalid("ragged matrix in model file");
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl From<&LatentModel> for ModelFile {
    fn from(m: &LatentModel) -> Self {
        ModelFile {
            kind: m.kind,
            k: m.k,
            seed: m.seed,
            loadings: rows_of(&m.loadings),
            filters: rows_of(&m.filters),
            eigenvalues: m.eigenvalues.clone(),
            mean: m.mean.clone(),
            whitening_transform: m.whitening_transform.as_ref().map(rows_of),
            direction_norms: m.direction_norms.clone(),
            converged: m.converged,
            n_iter: m.n_iter,
        }
    }
}

impl TryFrom<ModelFile> for LatentModel {
    type Error = LspieError;

    fn try_from(f: ModelFile) -> Result<Self> {
        let loadings = from_rows(&f.loadings)?;
        let filters = from_rows(&f.filters)?;
        if loadings.nrows() != f.k || filters.shape() != loadings.shape() {
            return invalid("model file dimensions disagree with k");
        }
        Ok(LatentModel {
            kind: f.kind,
            scores: DMatrix::zeros(0, f.k),
            loadings,
            filters,
            eigenvalues: f.eigenvalues,
            mean: f.mean,
            whitening_transform: f
                .whitening_transform
                .as_deref()
                .map(from_rows)
                .transpose()?,
            k: f.k,
            seed: f.seed,
            direction_norms: f.direction_norms,
            converged: f.converged,
            n_iter: f.n_iter,
        })
    }
}

fn check_k(x: &DMatrix<f64>, k: usize) -> Result<()> {
    if k == 0 {
        return invalid("need at least one latent direction");
    }
    let available = x.nrows().min(x.ncols());
    if k > available {
        return Err(LspieError::Rank {
            requested: k,
            available,
        });
    }
    Ok(())
}

fn standardised_parts(x: &TrajectoryMatrix) -> Result<(Vec<f64>, Option<DMatrix<f64>>)> {
    match &x.standardisation {
        Standardisation::Raw => Err(LspieError::State(
            "model fitting needs centered or whitened data".into(),
        )),
        Standardisation::Centered { column_means } => Ok((column_means.clone(), None)),
        Standardisation::Whitened {
            column_means,
            transform,
        } => Ok((column_means.clone(), Some(transform.clone()))),
    }
}

/// PCA on a standardised trajectory matrix.
pub fn fit_pca(x: &TrajectoryMatrix, k: usize) -> Result<LatentModel> {
    let (mean, whitening) = standardised_parts(x)?;
    let mut model = fit_pca_centered(&x.data, k)?;
    model.mean = mean;
    model.whitening_transform = whitening;
    Ok(model)
}

/// PCA on a matrix whose columns are already zero-mean.
pub fn fit_pca_centered(x: &DMatrix<f64>, k: usize) -> Result<LatentModel> {
    check_k(x, k)?;
    let (values, axes) = linalg::principal_axes(x, k);
    let eigenvalues = values[..k].iter().map(|v| v.max(0.0)).collect();
    let scores = x * axes.transpose();
    Ok(LatentModel {
        kind: ModelKind::Pca,
        filters: axes.clone(),
        loadings: axes,
        scores,
        eigenvalues: Some(eigenvalues),
        mean: vec![0.0; x.ncols()],
        whitening_transform: None,
        k,
        seed: None,
        direction_norms: vec![1.0; k],
        converged: true,
        n_iter: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contrast {
    /// `G(u) = log cosh(a u) / a`
    LogCosh { alpha: f64 },
    /// `G(u) = u⁴ / 4`
    Cube,
}

impl Contrast {
    /// Returns `(g(u), g'(u))`.
    fn eval(self, u: f64) -> (f64, f64) {
        match self {
            Contrast::LogCosh { alpha } => {
                let t = (alpha * u).tanh();
                (t, alpha * (1.0 - t * t))
            }
            Contrast::Cube => (u * u * u, 3.0 * u * u),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcaOptions {
    pub contrast: Contrast,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Whiten internally. When false the input must already be whitened and
    /// its first `k` columns are used as the white signal space.
    pub whiten: bool,
}

impl Default for IcaOptions {
    fn default() -> Self {
        IcaOptions {
            contrast: Contrast::LogCosh { alpha: 1.0 },
            tol: 1e-4,
            max_iter: 200,
            seed: 0,
            whiten: true,
        }
    }
}

/// FastICA with symmetric decorrelation.
pub fn fit_ica(x: &TrajectoryMatrix, k: usize, opts: &IcaOptions) -> Result<LatentModel> {
    let (mean, outer_whitening) = standardised_parts(x)?;
    if !opts.whiten && outer_whitening.is_none() {
        return Err(LspieError::State(
            "ICA without internal whitening needs whitened input".into(),
        ));
    }
    let mut model = fit_ica_centered(&x.data, k, opts)?;
    model.mean = mean;
    model.whitening_transform = outer_whitening;
    Ok(model)
}

/// FastICA on a matrix whose columns are already zero-mean.
pub fn fit_ica_centered(x: &DMatrix<f64>, k: usize, opts: &IcaOptions) -> Result<LatentModel> {
    check_k(x, k)?;
    if !(opts.tol > 0.0) {
        return invalid(format!("tol must be positive, got {}", opts.tol));
    }
    if opts.max_iter == 0 {
        return invalid("max_iter must be at least 1");
    }
    let n = x.ncols();

    // White basis: rows of `to_white` map data to unit-variance coordinates,
    // rows of `from_white` map them back.
    let (to_white, from_white) = if opts.whiten {
        let (values, axes) = linalg::principal_axes(x, k);
        // Only guards against zero or negative round-off eigenvalues; tiny
        // but positive directions are whitened at their own scale.
        let floor = f64::EPSILON * f64::EPSILON * values[0].max(f64::MIN_POSITIVE);
        let sd: Vec<f64> = values[..k].iter().map(|&v| v.max(floor).sqrt()).collect();
        let to = DMatrix::from_fn(k, n, |i, j| axes[(i, j)] / sd[i]);
        let from = DMatrix::from_fn(k, n, |i, j| axes[(i, j)] * sd[i]);
        (to, from)
    } else {
        let basis = DMatrix::<f64>::identity(k, n);
        (basis.clone(), basis)
    };
    let z = x * to_white.transpose();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let init = DMatrix::from_fn(k, k, |_, _| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelation(init);
    let m = z.nrows() as f64;
    let mut converged = false;
    let mut n_iter = 0;
    for it in 0..opts.max_iter {
        n_iter = it + 1;
        let y = &z * w.transpose();
        let mut g = y.clone();
        let mut g_prime_mean = DVector::zeros(k);
        for j in 0..k {
            let mut acc = 0.0;
            for i in 0..y.nrows() {
                let (gv, gp) = opts.contrast.eval(y[(i, j)]);
                g[(i, j)] = gv;
                acc += gp;
            }
            g_prime_mean[j] = acc / m;
        }
        let mut next = g.tr_mul(&z) / m;
        for i in 0..k {
            let scale = g_prime_mean[i];
            for j in 0..k {
                next[(i, j)] -= scale * w[(i, j)];
            }
        }
        let next = symmetric_decorrelation(next);
        let lim = (0..k)
            .map(|i| (1.0 - next.row(i).dot(&w.row(i)).abs()).abs())
            .fold(0.0, f64::max);
        w = next;
        if lim < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "FastICA did not converge in {} iterations (tol {})",
            opts.max_iter,
            opts.tol
        );
    }

    let mut patterns = &w * &from_white;
    let mut filters = &w * &to_white;
    for i in 0..k {
        let norm = patterns.row(i).norm();
        let norm = if norm > 0.0 { norm } else { 1.0 };
        patterns.row_mut(i).unscale_mut(norm);
        filters.row_mut(i).scale_mut(norm);
        if linalg::canonicalise_sign_row(&mut patterns, i) {
            filters.row_mut(i).neg_mut();
        }
    }
    let scores = x * filters.transpose();
    Ok(LatentModel {
        kind: ModelKind::Ica,
        loadings: patterns,
        filters,
        scores,
        eigenvalues: None,
        mean: vec![0.0; n],
        whitening_transform: None,
        k,
        seed: Some(opts.seed),
        direction_norms: vec![1.0; k],
        converged,
        n_iter,
    })
}

/// `(W Wᵀ)^{-1/2} W`
fn symmetric_decorrelation(w: DMatrix<f64>) -> DMatrix<f64> {
    linalg::inv_sqrt_spd(&w * w.transpose()) * w
}

/// Projects standardised data onto the model directions.
pub fn encode(model: &LatentModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != model.filters.ncols() {
        return invalid(format!(
            "data has {} columns, model expects {}",
            x.ncols(),
            model.filters.ncols()
        ));
    }
    Ok(x * model.filters.transpose())
}

/// Rebuilds data from scores, optionally from a subset of directions.
///
/// With `restore_mean` the output is mapped back to raw column space
/// (undoing any whitening and adding the column means).
pub fn decode(
    model: &LatentModel,
    scores: &DMatrix<f64>,
    subset: Option<&[usize]>,
    restore_mean: bool,
) -> Result<DMatrix<f64>> {
    let idx: Vec<usize> = match subset {
        Some(s) => s.to_vec(),
        None => (0..model.k).collect(),
    };
    if let Some(&bad) = idx.iter().find(|&&i| i >= model.k) {
        return invalid(format!("direction index {bad} out of range 0..{}", model.k));
    }
    if scores.ncols() != idx.len() {
        return invalid(format!(
            "scores have {} columns, expected {}",
            scores.ncols(),
            idx.len()
        ));
    }
    let loadings = DMatrix::from_fn(idx.len(), model.loadings.ncols(), |i, j| {
        model.loadings[(idx[i], j)]
    });
    let mut out = scores * loadings;
    if restore_mean {
        if let Some(t) = &model.whitening_transform {
            // t is n_raw × r with orthogonal columns; its pseudo-inverse maps back.
            let pinv = t.clone().pseudo_inverse(1e-12).map_err(|e| {
                LspieError::DegenerateData(format!("whitening transform not invertible: {e}"))
            })?;
            out *= pinv;
        }
        if out.ncols() != model.mean.len() {
            return invalid("model mean does not match decoded width");
        }
        for (j, mu) in model.mean.iter().enumerate() {
            out.column_mut(j).add_scalar_mut(*mu);
        }
    }
    Ok(out)
}
