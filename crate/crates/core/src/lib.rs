//! Latent-space perspicacity and interpretation enhancement.
//!
//! Fits linear latent variable models (PCA and FastICA) to Hankelised time
//! series and then ranks, scales, clusters and condenses the resulting latent
//! directions so that they are easier to read.
//!
//! The usual flow is
//!
//! 1. [`signals::generate_signal`] or [`signals::TimeSeries::read_csv`]
//! 2. [`signals::hankelise`] then [`signals::standardise`]
//! 3. [`lvm::fit_pca`] or [`lvm::fit_ica`]
//! 4. [`enhance::rank`], [`enhance::scale`], [`enhance::cluster`] /
//!    [`enhance::condense`], optionally followed by
//!    [`enhance::apply_condense_filter`].

pub mod enhance;
pub mod error;
pub(crate) mod linalg;
pub mod lvm;
pub mod matrix_io;
pub mod metrics;
pub mod postfilter;
pub mod signals;

pub use enhance::{
    apply_condense_filter, cluster, condense, rank, scale, ClusterBackend, CondenseMethod,
    CondensedModel, RankOrder, RankedModel, ScaleMode, ScaledModel, Similarity,
};
pub use error::{LspieError, Result};
pub use lvm::{decode, encode, fit_ica, fit_pca, Contrast, IcaOptions, LatentModel, ModelKind};
pub use metrics::{MetricFn, MetricRegistry, MetricVector};
pub use postfilter::{apply_filter, design_butterworth, FilterMode, FilterSpec, Sos};
pub use signals::{
    dehankelise, generate_signal, hankelise, stack_channels, standardise, SignalKind,
    Standardisation, StandardiseMode, TimeSeries, TrajectoryMatrix,
};

pub use nalgebra::DMatrix;
