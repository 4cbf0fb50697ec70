//! Test signals, Hankel trajectory matrices and standardisation.

use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LspieError, Result};
use crate::linalg;

/// Relative eigenvalue threshold below which a covariance direction is null.
pub const NULL_EIGEN_RTOL: f64 = 1e-10;

/// A uniformly sampled scalar channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    /// Samples per second.
    pub sample_rate: f64,
    /// Time of the first sample in seconds.
    pub t0: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, sample_rate: f64, t0: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return invalid(format!("sample rate must be positive, got {sample_rate}"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("sample {i} is not finite"));
        }
        Ok(Self {
            values,
            sample_rate,
            t0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.sample_rate
    }

    /// Writes a two-column `time,value` CSV with header.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |source| LspieError::Csv {
            path: path.display().to_string(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["time", "value"]).map_err(csv_err)?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([self.time(i).to_string(), v.to_string()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|source| LspieError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Reads a `time,value` CSV as written by [`TimeSeries::write_csv`]. The
    /// sample rate is recovered from the first two time stamps.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let csv_err = |source| LspieError::Csv {
            path: path.display().to_string(),
            source,
        };
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() < 2 {
                return invalid(format!("{}: expected two columns", path.display()));
            }
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| {
                    LspieError::InvalidArgument(format!(
                        "{}: bad number `{s}`: {e}",
                        path.display()
                    ))
                })
            };
            times.push(parse(&rec[0])?);
            values.push(parse(&rec[1])?);
        }
        if times.len() < 2 {
            return invalid(format!("{}: need at least two samples", path.display()));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return invalid(format!("{}: time column must increase", path.display()));
        }
        TimeSeries::new(values, 1.0 / dt, times[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    /// `sin(2πt)`
    PureSine,
    /// `sin(2πt^0.85)`, a tone whose frequency falls over time.
    DecreasingFreq,
}

impl std::str::FromStr for SignalKind {
    type Err = LspieError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure_sine" => Ok(Self::PureSine),
            "decreasing_freq" => Ok(Self::DecreasingFreq),
            other => invalid(format!("unknown signal kind `{other}`")),
        }
    }
}

impl std::fmt::Display for SignalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PureSine => "pure_sine",
            Self::DecreasingFreq => "decreasing_freq",
        })
    }
}

pub fn generate_signal(kind: SignalKind, n_samples: usize, sample_rate: f64) -> Result<TimeSeries> {
    if n_samples < 2 {
        return invalid(format!("need at least 2 samples, got {n_samples}"));
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return invalid(format!("sample rate must be positive, got {sample_rate}"));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let values = (0..n_samples)
        .map(|i| {
            let t = i as f64 / sample_rate;
            match kind {
                SignalKind::PureSine => (tau * t).sin(),
                SignalKind::DecreasingFreq => (tau * t.powf(0.85)).sin(),
            }
        })
        .collect();
    TimeSeries::new(values, sample_rate, 0.0)
}

/// How a trajectory matrix has been prepared for model fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum Standardisation {
    Raw,
    Centered {
        column_means: Vec<f64>,
    },
    /// `data = (raw - column_means) · transform`, with `transform` of shape
    /// `n × r` where `r` is the number of retained directions.
    Whitened {
        column_means: Vec<f64>,
        transform: DMatrix<f64>,
    },
}

impl Standardisation {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Raw => "raw",
            Self::Centered { .. } => "centered",
            Self::Whitened { .. } => "whitened",
        }
    }

    pub fn column_means(&self) -> Option<&[f64]> {
        match self {
            Self::Raw => None,
            Self::Centered { column_means } | Self::Whitened { column_means, .. } => {
                Some(column_means)
            }
        }
    }

    pub fn whitening_transform(&self) -> Option<&DMatrix<f64>> {
        match self {
            Self::Whitened { transform, .. } => Some(transform),
            _ => None,
        }
    }
}

/// Hankel embedding of one or more channels.
///
/// Rows are lag positions: row `i` of a single channel holds
/// `x[i], x[i+1], ..., x[i+n-1]`, so `window` is the number of rows per
/// channel. Stacked channels occupy consecutive row ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMatrix {
    pub data: DMatrix<f64>,
    pub window: usize,
    pub source_len: usize,
    pub standardisation: Standardisation,
    pub channels: Vec<Range<usize>>,
}

impl TrajectoryMatrix {
    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_raw(&self) -> bool {
        matches!(self.standardisation, Standardisation::Raw)
    }

    /// Largest spread (max - min) along any anti-diagonal of any channel.
    /// Zero for an untouched Hankel matrix.
    pub fn anti_diagonal_spread(&self) -> f64 {
        let mut worst = 0.0f64;
        for rows in &self.channels {
            let m = rows.len();
            let n = self.n_cols();
            for d in 0..(m + n - 1) {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for i in d.saturating_sub(n - 1)..=d.min(m - 1) {
                    let v = self.data[(rows.start + i, d - i)];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                worst = worst.max(hi - lo);
            }
        }
        worst
    }

    /// Writes the matrix as plain headerless CSV.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::matrix_io::write_matrix_csv(path, &self.data, None)
    }
}

pub fn hankelise(series: &TimeSeries, window: usize) -> Result<TrajectoryMatrix> {
    let len = series.len();
    if window < 2 || window + 1 > len {
        return invalid(format!(
            "window {window} out of range [2, {}] for a series of length {len}",
            len.saturating_sub(1)
        ));
    }
    let cols = len - window + 1;
    let data = DMatrix::from_fn(window, cols, |i, j| series.values[i + j]);
    Ok(TrajectoryMatrix {
        data,
        window,
        source_len: len,
        standardisation: Standardisation::Raw,
        channels: vec![0..window],
    })
}

/// Diagonal averaging: `out[k]` is the mean of the entries with `i + j = k`.
pub fn dehankelise(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (m, n) = matrix.shape();
    if m == 0 || n == 0 {
        return invalid("cannot dehankelise an empty matrix");
    }
    let mut sums = vec![0.0; m + n - 1];
    let mut counts = vec![0usize; m + n - 1];
    for j in 0..n {
        for i in 0..m {
            sums[i + j] += matrix[(i, j)];
            counts[i + j] += 1;
        }
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .map(|(s, c)| s / c as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardiseMode {
    Center,
    /// Center then decorrelate to unit covariance. With `drop_null` the null
    /// directions of a rank-deficient covariance are discarded instead of
    /// raising [`LspieError::DegenerateRank`].
    Whiten {
        drop_null: bool,
    },
}

pub fn standardise(matrix: &TrajectoryMatrix, mode: StandardiseMode) -> Result<TrajectoryMatrix> {
    if !matrix.is_raw() {
        return Err(LspieError::State(format!(
            "matrix is already {}",
            matrix.standardisation.name()
        )));
    }
    if matrix.n_rows() < 2 {
        return invalid("need at least two rows to standardise");
    }
    let column_means = linalg::column_means(&matrix.data);
    let mut centered = matrix.data.clone();
    for (j, mean) in column_means.iter().enumerate() {
        centered.column_mut(j).add_scalar_mut(-mean);
    }
    let (data, standardisation) = match mode {
        StandardiseMode::Center => (centered, Standardisation::Centered { column_means }),
        StandardiseMode::Whiten { drop_null } => {
            let (m, n) = centered.shape();
            let full = m.min(n);
            let (values, axes) = linalg::principal_axes(&centered, full);
            let max = values.first().copied().unwrap_or(0.0).max(0.0);
            let keep: Vec<usize> = (0..full)
                .filter(|&i| max > 0.0 && values[i] > NULL_EIGEN_RTOL * max)
                .collect();
            let null_directions: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
            if !null_directions.is_empty() && !drop_null {
                return Err(LspieError::DegenerateRank { null_directions });
            }
            if keep.is_empty() {
                return Err(LspieError::DegenerateData("zero covariance".into()));
            }
            let transform = DMatrix::from_fn(n, keep.len(), |r, c| {
                axes[(keep[c], r)] / values[keep[c]].sqrt()
            });
            (
                &centered * &transform,
                Standardisation::Whitened {
                    column_means,
                    transform,
                },
            )
        }
    };
    Ok(TrajectoryMatrix {
        data,
        window: matrix.window,
        source_len: matrix.source_len,
        standardisation,
        channels: matrix.channels.clone(),
    })
}

/// Row-wise concatenation of per-channel trajectory matrices.
///
/// Raw and centered inputs can be stacked; stacked centered matrices carry
/// the row-weighted mean of the channel means, which is exactly the column
/// mean of the stacked raw data.
pub fn stack_channels(channels: &[TrajectoryMatrix]) -> Result<TrajectoryMatrix> {
    let first = match channels {
        [] => return invalid("no channels to stack"),
        [only] => return Ok(only.clone()),
        [first, ..] => first,
    };
    let n = first.n_cols();
    for (c, ch) in channels.iter().enumerate() {
        if ch.n_cols() != n {
            return invalid(format!(
                "channel {c} has {} columns, expected {n}",
                ch.n_cols()
            ));
        }
        if ch.standardisation.name() != first.standardisation.name() {
            return invalid(format!(
                "channel {c} is {}, expected {}",
                ch.standardisation.name(),
                first.standardisation.name()
            ));
        }
    }
    if matches!(first.standardisation, Standardisation::Whitened { .. }) {
        return invalid("whitened channels carry separate transforms and cannot be stacked");
    }
    let total_rows: usize = channels.iter().map(|c| c.n_rows()).sum();
    let mut data = DMatrix::zeros(total_rows, n);
    let mut ranges = Vec::new();
    let mut offset = 0;
    for ch in channels {
        for r in &ch.channels {
            ranges.push(offset + r.start..offset + r.end);
        }
        data.rows_mut(offset, ch.n_rows()).copy_from(&ch.data);
        offset += ch.n_rows();
    }
    let standardisation = match &first.standardisation {
        Standardisation::Raw => Standardisation::Raw,
        _ => {
            let mut means = vec![0.0; n];
            for ch in channels {
                let w = ch.n_rows() as f64 / total_rows as f64;
                for (acc, m) in means
                    .iter_mut()
                    .zip(ch.standardisation.column_means().unwrap())
                {
                    *acc += w * m;
                }
            }
            Standardisation::Centered {
                column_means: means,
            }
        }
    };
    Ok(TrajectoryMatrix {
        data,
        window: first.window,
        source_len: first.source_len,
        standardisation,
        channels: ranges,
    })
}
