//! Chaos-based coded modulation with adaptive feedback: chaotic-map
//! symbol mapping, the adaptive-size and adaptive-bandwidth schemes,
//! analytic bounds and Monte-Carlo channel campaigns.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive_bandwidth;
pub mod adaptive_size;
pub mod analysis;
pub mod channel_sim;
pub mod config;
pub mod error;
pub mod maps;
pub mod output;
pub mod reliability;
pub mod special;

pub use config::{ExperimentConfig, Scheme};
pub use error::{Error, Result};
pub use maps::{BitPrefix, MapKind, MapModel};
