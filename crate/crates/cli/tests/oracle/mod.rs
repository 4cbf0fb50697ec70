//! Independent reference computations used to check the library.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

/// Sample covariance `XᵀX / (m - 1)` of already-centered rows.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = rows.len();
    let n = rows[0].len();
    let mut c = vec![vec![0.0; n]; n];
    for r in rows {
        for i in 0..n {
            for j in 0..n {
                c[i][j] += r[i] * r[j];
            }
        }
    }
    for row in &mut c {
        for v in row.iter_mut() {
            *v /= (m - 1) as f64;
        }
    }
    c
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

pub fn abs_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).abs()
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Correlation between `y` and its least-squares fit `a sin + b cos + c` at
/// frequency `f` (cycles per sample).
pub fn sinusoid_fit_corr(y: &[f64], f: f64) -> f64 {
    let basis = |i: usize| {
        let w = 2.0 * PI * f * i as f64;
        [w.sin(), w.cos(), 1.0]
    };
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (i, &v) in y.iter().enumerate() {
        let b = basis(i);
        for r in 0..3 {
            aty[r] += b[r] * v;
            for c in 0..3 {
                ata[r][c] += b[r] * b[c];
            }
        }
    }
    let coef = solve3(ata, aty);
    let fit: Vec<f64> = (0..y.len())
        .map(|i| {
            let b = basis(i);
            coef[0] * b[0] + coef[1] * b[1] + coef[2] * b[2]
        })
        .collect();
    pearson(y, &fit).abs()
}

/// Best single-frequency sinusoid fit over a frequency grid refined by
/// golden-section search. Returns `(frequency, |corr|)`.
pub fn best_sinusoid_fit(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let lo = 0.5 / n;
    let step = 0.05 / n;
    let (mut best_f, mut best_c) = (lo, 0.0);
    let mut f = lo;
    while f < 0.5 {
        let c = sinusoid_fit_corr(y, f);
        if c > best_c {
            best_f = f;
            best_c = c;
        }
        f += step;
    }
    let (mut a, mut b) = ((best_f - step).max(1e-9), (best_f + step).min(0.5));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if sinusoid_fit_corr(y, x1) > sinusoid_fit_corr(y, x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let f = 0.5 * (a + b);
    let c = sinusoid_fit_corr(y, f);
    if c > best_c {
        (f, c)
    } else {
        (best_f, best_c)
    }
}

/// Magnitude of an order-`order` digital Butterworth low-pass obtained by the
/// prewarped bilinear transform, at normalised frequency `f`.
pub fn butterworth_magnitude(order: usize, cutoff: f64, f: f64) -> f64 {
    let r = (PI * f).tan() / (PI * cutoff).tan();
    1.0 / (1.0 + r.powi(2 * order as i32)).sqrt()
}
