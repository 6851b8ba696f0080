//! Building blocks for a signal-processing agent.
//!
//! - [`planner`]: request decomposition, complexity tiers and retrieval-backed
//!   planning over a [`retrieval`] index.
//! - [`codec`]: lossless text compression from next-token ranks of a
//!   [`provider::TokenPredictor`], stored in a checksummed container.
//! - [`optimizer`]: differential evolution, simulated annealing and a hybrid
//!   loop that alternates model proposals with DE steps.
//! - [`dsp`] and [`detector`]: radar frame features, synthetic sea-clutter
//!   scenes and a linear target detector.
//!
//! Everything random is seeded; the same inputs give byte-identical output.

pub mod assets;
pub mod codec;
pub mod detector;
pub mod dsp;
pub mod optimizer;
pub mod planner;
pub mod prompt;
pub mod provider;
pub mod retrieval;
