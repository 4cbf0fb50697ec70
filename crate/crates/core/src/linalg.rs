//! Small dense helpers shared by the standardisation and model-fitting code.

use nalgebra::{DMatrix, DVector};

pub(crate) fn column_means(x: &DMatrix<f64>) -> Vec<f64> {
    let m = x.nrows() as f64;
    x.column_iter().map(|c| c.sum() / m).collect()
}

/// Sample variance with the `m - 1` denominator.
pub(crate) fn sample_variance(values: impl ExactSizeIterator<Item = f64> + Clone) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
}

/// Sum of the per-column sample variances, i.e. the trace of the covariance.
pub(crate) fn total_variance(x: &DMatrix<f64>) -> f64 {
    x.column_iter()
        .map(|c| sample_variance(c.iter().copied()))
        .sum()
}

/// Symmetric eigendecomposition sorted by descending eigenvalue. Eigenvectors
/// are the columns of the returned matrix.
pub(crate) fn sym_eigen_desc(a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = a.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Principal axes of the covariance `XᵀX/(m-1)` of centered data.
///
/// Uses whichever of the `n×n` covariance or the `m×m` Gram matrix is
/// smaller. Returns the leading `min(m, n)` eigenvalues (descending) and the
/// first `k` axes as orthonormal rows of a `k×n` matrix.
pub(crate) fn principal_axes(x: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let (m, n) = x.shape();
    let denom = (m.max(2) - 1) as f64;
    let mut axes = DMatrix::zeros(k, n);
    let values = if n <= m {
        let cov = x.tr_mul(x) / denom;
        let (values, vectors) = sym_eigen_desc(cov);
        for i in 0..k {
            axes.set_row(i, &vectors.column(i).transpose());
        }
        values
    } else {
        let gram = x * x.transpose() / denom;
        let (values, vectors) = sym_eigen_desc(gram);
        for i in 0..k {
            let v: DVector<f64> = x.tr_mul(&vectors.column(i));
            axes.set_row(i, &v.transpose());
        }
        values
    };
    orthonormalise_rows(&mut axes);
    for i in 0..k {
        canonicalise_sign_row(&mut axes, i);
    }
    (values, axes)
}

/// Modified Gram-Schmidt over the rows, in order. Rows that collapse (null
/// directions) are replaced by the first canonical basis vector that survives
/// projection, so the result is always an orthonormal set.
pub(crate) fn orthonormalise_rows(rows: &mut DMatrix<f64>) {
    let (k, n) = rows.shape();
    let mut next_basis = 0usize;
    for i in 0..k {
        let mut v: DVector<f64> = rows.row(i).transpose();
        let original = v.norm();
        project_out(&mut v, rows, i);
        let mut norm = v.norm();
        while !(norm > 1e-8 * original.max(f64::MIN_POSITIVE)) || original == 0.0 {
            if next_basis >= n {
                break;
            }
            v = DVector::zeros(n);
            v[next_basis] = 1.0;
            next_basis += 1;
            project_out(&mut v, rows, i);
            norm = v.norm();
            if norm > 1e-6 {
                break;
            }
        }
        if norm > 0.0 {
            v /= norm;
        }
        rows.set_row(i, &v.transpose());
    }
}

fn project_out(v: &mut DVector<f64>, rows: &DMatrix<f64>, upto: usize) {
    for _ in 0..2 {
        for j in 0..upto {
            let r = rows.row(j);
            let d = r.dot(&v.transpose());
            *v -= r.transpose() * d;
        }
    }
}

/// Index of the entry with the largest magnitude (first one on ties).
pub(crate) fn argmax_abs<'a>(values: impl Iterator<Item = &'a f64>) -> usize {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v.abs() > best_abs {
            best_abs = v.abs();
            best = i;
        }
    }
    best
}

/// Flips row `i` so that its largest-magnitude entry is positive. Returns
/// whether a flip happened.
pub(crate) fn canonicalise_sign_row(rows: &mut DMatrix<f64>, i: usize) -> bool {
    let j = argmax_abs(rows.row(i).iter());
    if rows[(i, j)] < 0.0 {
        rows.row_mut(i).neg_mut();
        true
    } else {
        false
    }
}

/// Inverse square root of a symmetric positive definite matrix.
pub(crate) fn inv_sqrt_spd(a: DMatrix<f64>) -> DMatrix<f64> {
    let (values, vectors) = sym_eigen_desc(a);
    let n = values.len();
    let scale = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        values
            .iter()
            .map(|&v| 1.0 / v.max(f64::MIN_POSITIVE).sqrt()),
    ));
    &vectors * scale * vectors.transpose()
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
pub(crate) fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let ca: Vec<f64> = a.iter().map(|x| x - ma).collect();
    let cb: Vec<f64> = b.iter().map(|x| x - mb).collect();
    cosine(&ca, &cb)
}
