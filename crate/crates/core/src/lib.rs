//! System-level simulation of a macro cellular network in which idle handsets
//! act as two-hop decode-and-forward relays for active handsets.
//!
//! The access hop (relay <-> edge UE) is a device-to-device link that reuses
//! the uplink spectrum underneath the macro network. Its transmit power is a
//! fixed backoff from the device's own uplink power, so every access link
//! carries a bounded interference budget towards the base stations.
//!
//! Modules follow the simulation pipeline:
//!
//! - [`deployment`]: hexagonal 19-site layout with wrap-around, UE drops.
//! - [`channel`]: pathloss, sector antenna pattern, correlated shadowing and
//!   the per-drop [`channel::LinkTable`].
//! - [`power`]: uplink power control, access-link backoff, SINR assembly and
//!   the SINR-to-rate mapping.
//! - [`relaying`]: relay discovery, selection, pruning, relay buffers and the
//!   half-duplex gate.
//! - [`mac`]: proportional-fair WAN scheduling and SIR-threshold yielding
//!   among access links.
//! - [`engine`]: drops, subframe loop, standalone studies and metrics.

pub mod channel;
pub mod config;
pub mod deployment;
pub mod engine;
pub mod error;
pub mod mac;
pub mod power;
pub mod relaying;
pub mod report;
pub mod rng;
pub mod stats;
pub mod units;

pub use config::{Mode, ScenarioConfig};
pub use error::{Result, SimError};
