//! Latent attribute interaction models for evolving networks.
//!
//! Nodes carry soft binary attributes that drift over time, and each
//! attribute has a 2x2 matrix saying how strongly each combination of
//! attribute values between two nodes encourages an edge. The crate
//! covers:
//!
//! - [`model`]: the generative model and a sampler for synthetic data;
//! - [`autodiff`]: a small reverse-mode tape with Adam and a
//!   finite-difference checker;
//! - [`gru`]: the recurrent cell that produces variational parameters;
//! - [`inference`]: the ELBO, training, forecasting and embeddings;
//! - [`eval`]: AUC, the Beta-Bernoulli baseline and spectral communities;
//! - [`experiment`]: the rolling forecast protocol;
//! - [`io`] and [`cli`]: file formats and the `dlaim` command.

pub mod autodiff;
pub mod cli;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod gru;
pub mod inference;
pub mod io;
pub mod model;

pub use error::{Error, Result};
