//! Finite-size secure key rates for continuous-variable QKD with single,
//! double and modified double-modulation channel estimation.
//!
//! * [`model`]: channel, source and protocol parameters, fiber mapping.
//! * [`secrecy`]: covariance matrices, Holevo bound, key rates.
//! * [`estimation`]: estimators, analytic variances, confidence bounds.
//! * [`montecarlo`]: sampling of the link and empirical estimator statistics.
//! * [`optimizer`]: parameter optimisation and the scaling fits built on it.

pub mod error;
pub mod estimation;
pub mod model;
pub mod montecarlo;
pub mod optimizer;
pub mod normal;
pub mod search;
pub mod secrecy;

pub use error::{Error, Result};
pub use estimation::{ConfidenceBounds, EstimationScheme, SampleSet, SchemeKind, VarianceModel};
pub use model::{ChannelParams, FiberModel, ModulationParams, ProtocolParams, SourceParams};
pub use secrecy::{KeyRateOptions, KeyRateReport};
