//! Multi-criteria counterfactual generation for auditing black-box
//! classifiers.
//!
//! The toolkit trains a small attribute-conditioned generative stack
//! (encoder, decoder, critic with a shared attribute-classifier trunk) on an
//! annotated dataset, then searches the space of attribute perturbations with
//! NSGA-II to find counterfactual images that trade off plausibility,
//! adversarial power against an audited target model, and change intensity.
//! Post-hoc analyses (luminance maps, SSIM, attribute co-occurrence bias
//! tables) turn the resulting Pareto fronts into audit reports.

pub mod analysis;
pub mod checks;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod ganstack;
pub mod moea;
pub mod numcore;
pub mod objectives;
pub mod rng;

pub use cli::run;
pub use error::{Error, Result};
