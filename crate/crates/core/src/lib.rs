//! Latent space item response modeling with automated interpretation of the
//! interaction map.
//!
//! The crate fits a two-dimensional latent space item response model (LSIRM)
//! to binary response matrices by Metropolis-Hastings-within-Gibbs, removes
//! the rigid-motion non-identifiability of the latent positions with two-step
//! Procrustes matching, and clusters the item map by fitting an ensemble of
//! Neyman-Scott point processes with a birth-death sampler. Cluster counts,
//! center locations, and memberships come with uncertainty quantification
//! from the ensemble; group comparisons are reported as center-distance and
//! membership tables.
//!
//! Modules follow the pipeline order:
//!
//! * [`data`] / [`config`] - input loading, dichotomization, run configuration
//! * [`lsirm`] - model evaluation and posterior sampling
//! * [`align`] - Procrustes alignment within and across groups
//! * [`diagnostics`] - R-hat and posterior predictive checks
//! * [`ns`] - Neyman-Scott ensemble clustering of item positions
//! * [`synth`] - forward simulators used as recovery oracles
//! * [`report`] / [`plot`] - tables, summaries, and SVG rendering
//! * [`persist`] / [`pipeline`] - artifact round-tripping and orchestration

pub mod align;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod latent;
pub mod lsirm;
pub mod ns;
pub mod persist;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
