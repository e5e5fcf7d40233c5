//! System-level simulator for DECT-2020 NR mesh networks.
//!
//! The crate models cluster-tree topology formation, listen-before-talk
//! channel access with HARQ retransmissions, and an abstracted SINR -> PER
//! physical layer on top of 3GPP TR 38.901 pathloss, and evaluates packet
//! loss ratio, latency percentiles and energy efficiency of massive
//! machine-type deployments under a discrete-event engine with integer-tick
//! timing.

pub mod config;
pub mod engine;
pub mod mac;
pub mod numerology;
pub mod output;
pub mod propagation;
pub mod runner;
pub mod scenario;
pub mod sim;
pub mod topology;

pub use config::RunConfig;
pub use runner::{run_replicated, run_single, run_sweep};
pub use sim::{run_simulation, RunSummary, SimParams};
