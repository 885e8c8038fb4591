//! Continuous-time diffusion models on 2D point clouds.
//!
//! The crate covers the variance-preserving cosine schedule, the four
//! prediction targets (data `x`, noise `eps`, velocity `v`, score `s`) and
//! the conversions between them, NELBO / weighted / rescaled loss integrands,
//! the closed-form forward posterior, a small fully-connected denoiser with
//! hand-written gradients, an Adam training loop, ancestral sampling and
//! moment-based evaluation.

pub mod datasets;
pub mod denoiser;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod forward;
pub mod io;
pub mod losses;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod targetspace;
pub mod trainer;

pub use datasets::{DatasetKind, GeneratorParams, PointCloud};
pub use denoiser::{Architecture, DenoiserModel, Gradients};
pub use error::{Error, Result};
pub use losses::{LossForm, LossSample};
pub use rng::RngState;
pub use sampler::SampleConfig;
pub use schedule::{ScheduleValues, TimePoint, TransitionCoeffs};
pub use targetspace::{Prediction, TargetSpace};
pub use trainer::{RunRecord, TrainConfig};
