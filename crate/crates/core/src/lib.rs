//! Model-based clustering of curves with regression mixtures.
//!
//! Curves are modelled as draws from a mixture of polynomial, spline or
//! B-spline regressions with Gaussian noise. [`em_standard`] fits a fixed
//! number of components; [`em_robust`] starts from one component per curve
//! and prunes its way down to a data-driven count.

pub mod basis;
pub mod cli;
pub mod dataset;
pub mod em_robust;
pub mod em_standard;
pub mod metrics;
pub mod mixture_model;
pub mod simulators;
pub mod trace;
pub mod wls;

pub use basis::{BasisFamily, DesignSpec};
pub use dataset::{Curve, Dataset, Layout};
pub use em_robust::{fit_robust, RobustConfig, RobustFit};
pub use em_standard::{fit_em, EmConfig, EmFit};
pub use mixture_model::{RegressionMixture, Responsibilities};
pub use trace::FitTrace;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] dataset::DataError),
    #[error(transparent)]
    Basis(#[from] basis::BasisError),
    #[error(transparent)]
    Model(#[from] mixture_model::ModelError),
    #[error(transparent)]
    Em(#[from] em_standard::EmError),
    #[error(transparent)]
    Robust(#[from] em_robust::RobustError),
    #[error(transparent)]
    Sim(#[from] simulators::SimError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}
