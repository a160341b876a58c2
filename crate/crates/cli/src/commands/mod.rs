//! One module per subcommand; each exposes its clap `Args` struct and a
//! `run` function returning the shared error type.

pub mod evaluate;
pub mod predict;
pub mod sweep;
pub mod synth;
pub mod train;

use privmob_core::nnpae::ModelKind;

/// The stable command-line spelling of each model kind, used in flags,
/// manifests, and report rows.
pub fn kind_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Pae => "pae",
        ModelKind::StandaloneAutoencoder => "standalone-autoencoder",
        ModelKind::StandalonePredictor => "standalone-predictor",
        ModelKind::StandaloneReidentifier => "standalone-reidentifier",
    }
}
