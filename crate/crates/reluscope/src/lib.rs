//! Train small dense ReLU networks and analyze them as piecewise-linear
//! objects.
//!
//! The crate has three tiers:
//!
//! - numeric substrate: [`matrix`] (dense f64 matrices) and [`rng`] (seeded
//!   ChaCha8 stream with Box–Muller Gaussians);
//! - the model and its instruments: [`network`] (ReLU MLP with exact
//!   backprop), [`optim`] (Adadelta, batching policies, checkpointed
//!   training), [`pwl`] (exact piecewise-linear extraction and the 1-D
//!   target generators), [`analysis`] (dead-neuron census, sum-of-squares
//!   size metric, noise/signal training decomposition);
//! - the harness: [`config`], [`experiments`], [`heatmap`], and the
//!   `reluscope` CLI for running the five built-in experiments and dumping
//!   CSV/SVG artifacts.
//!
//! Everything is deterministic given a seed: reruns with identical configs
//! produce byte-identical output files. Trials fan out across threads when
//! the `parallel` feature (default) is enabled; results do not depend on
//! the schedule.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod heatmap;
pub mod matrix;
pub mod network;
pub mod optim;
pub mod parallel;
pub mod pwl;
pub mod rng;
mod util;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use network::MlpNetwork;
pub use rng::RngStream;
