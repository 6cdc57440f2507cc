//! Two-photon (Hong-Ou-Mandel) interference in lossy two-mode directional
//! couplers.
//!
//! The crate is organised bottom-up:
//!
//! - [`coupled_mode`]: non-unitary 2x2 scattering amplitudes of a lossy
//!   coupler built from its supermode effective indices, balanced-split
//!   lengths and the post-selected bunching probability.
//! - [`fock_interference`]: post-selected two-photon output states and
//!   coincidence probabilities for partially distinguishable photons.
//! - [`experiment_sim`]: Poisson-noise coincidence datasets versus delay
//!   position for the standard and modified interferometers.
//! - [`fitting`]: Levenberg-Marquardt fits of dip/peak curves and the two
//!   visibility definitions.
//! - [`config`] and [`cli`]: the TOML run configuration, CSV formats and
//!   the command-line front end.

pub mod cli;
pub mod config;
pub mod coupled_mode;
pub mod error;
pub mod experiment_sim;
pub mod fitting;
pub mod fock_interference;

pub use error::{Error, Result};
