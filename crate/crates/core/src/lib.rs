//! Discrete-time simulator of edge-cloud security reliability.
//!
//! The pieces, bottom-up:
//!
//! - [`backhaul`]: the nine-state backhaul reliability chain, outage draws,
//!   horizon forecasts and fitting from logs.
//! - [`mobility`]: the region, UE population and random-walk motion.
//! - [`risk`]: motion statistics learned from trajectories and the per-UE
//!   outage risk estimate.
//! - [`trust_zone`]: the Trust Zone mode/trust state machine with audit log.
//! - [`sync`]: threshold-gated profile synchronization and outage accounting.
//! - [`experiment`]: the warm-up / training / testing pipeline and threshold
//!   sweeps.
//! - [`config`]: scenario configuration parsing and validation.

pub mod backhaul;
pub mod config;
pub mod experiment;
pub mod mobility;
pub mod risk;
pub mod rng;
pub mod sync;
pub mod trust_zone;
