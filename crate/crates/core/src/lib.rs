//! Evidential probe networks for graph neural networks.
//!
//! A pre-trained GCN classifier is paired with a small probe that predicts the
//! total evidence of a Dirichlet opinion per node. The crate covers the special
//! functions behind the evidential losses, a tiny reverse-mode training core,
//! the GCN backbone and logit baselines, the probe with its regularizers, graph
//! propagation of opinions, detection metrics, and closed-form checks on a
//! Gaussian latent world.

pub mod config;
pub mod diff;
pub mod edl;
pub mod epn;
pub mod error;
pub mod eval;
pub mod gnn;
pub mod graph;
pub mod linalg;
pub mod pipeline;
pub mod propagation;
pub mod specfun;
pub mod theory;

pub use error::{Error, Result};
