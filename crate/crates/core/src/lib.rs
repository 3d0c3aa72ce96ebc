//! Multi-view representation learning with soft decorrelation.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense row-major matrices, GEMM, symmetric eigensolvers and
//!   whitening.
//! * [`nn`]: a small feed-forward engine (affine, ReLU, batch norm) with
//!   hand-written backpropagation and SGD with momentum.
//! * [`decorr`]: the stochastic decorrelation loss (SDL) with its decayed
//!   covariance accumulator, plus DeCov, DeCovL1, DeCovGC and XCov.
//! * [`cca`]: Soft CCA training, the closed-form linear CCA oracle, the
//!   exact (whitening) decorrelation kernel and the evaluators.
//! * [`fae`]: the factorisation autoencoder with a pluggable decorrelation
//!   term, disentanglement evaluation and style transfer.
//! * [`data`]: IDX loading, left/right view construction, synthetic
//!   correlated views and deterministic mini-batching.
//! * [`gradcheck`]: central finite-difference checks for every analytic
//!   gradient in the crate.

pub mod cca;
pub mod data;
pub mod decorr;
mod error;
pub mod fae;
pub mod gradcheck;
pub mod linalg;
pub mod nn;
pub mod rng;

pub use cca::{
    CorrelationReport, CrossViewReport, LinearCcaModel, SoftCcaConfig, SoftCcaModel, SoftCcaTrainer,
};
pub use data::{BatchPlan, PairedDataset};
pub use decorr::{DecorrVariant, SdlState, SignMatrix};
pub use error::{Error, Result};
pub use fae::{FaeConfig, FaeModel, FaeTrainer};
pub use linalg::Matrix;
pub use nn::{ForwardTrace, LayerSpec, MlpModel, Mode, Sgd};
