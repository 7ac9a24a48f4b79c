//! Online distribution-shift detection with exchangeability martingales.
//!
//! The primary detector pairs each incoming episode with a held-back training
//! episode, asks a learned classifier which of the two is more recent, and
//! feeds the correctness indicator into an exponential Bernoulli martingale.
//! Under exchangeability the classifier is right with probability exactly one
//! half, so by Doob's inequality the martingale crosses `C` with probability at
//! most `1/C`.
//!
//! Conformal-martingale baselines (nearest-neighbour nonconformity, smoothed
//! p-values, power-martingale betting) share the same detector contract.

pub mod conformal;
pub mod config;
pub mod detector;
pub mod datagen;
pub mod episode;
pub mod harness;
pub mod error;
pub mod martingale;
pub mod nn;
pub mod recency;
pub mod rng;
pub mod stats;

pub use episode::{load_stream, write_episodes, Episode, EpisodeStream, StreamFormat, StreamLabel};
pub use error::{Error, Result};
pub use martingale::{AlertState, ExponentialMartingale, MartingaleParams};
pub use rng::{split_rng, Rng};
