//! Core library for privacy-preserving mobility modeling.
//!
//! The crate is organized as a pipeline: raw location records are loaded and
//! resampled ([`dataio`]), discretized into location classes ([`spatial`]),
//! windowed into next-location examples, and fed to an adversarially trained
//! recurrent autoencoder ([`nnpae`], [`training`]). Evaluation utilities
//! ([`metrics`], [`pareto`]) quantify the utility/privacy trade-off across
//! weight settings.

pub mod dataio;
pub mod error;
pub mod fsutil;
pub mod metrics;
pub mod nnpae;
pub mod pareto;
pub mod pipeline;
pub mod seeding;
pub mod spatial;
pub mod training;
