//! Run parameters for the system simulation.

use crate::mac::LbtParams;
use crate::propagation::PerCurve;
use crate::scenario::{EnergyParams, Placement};

/// Everything a single simulation run needs. `Default` is the baseline
/// urban massive-machine-type deployment; sweeps override fields.
#[derive(Debug, Clone)]
pub struct SimParams {
    pub seed: u64,
    pub n_sites: usize,
    pub isd_m: f64,
    pub placement: Placement,
    /// Mesh nodes, excluding the sinks.
    pub n_nodes: usize,
    pub n_carriers: u8,
    pub mu: u8,
    pub beta: u8,
    pub fc_ghz: f64,
    pub noise_figure_db: f64,
    pub sink_power_dbm: f64,
    pub node_power_dbm: f64,
    pub sink_height_m: f64,
    pub node_height_m: f64,
    pub indoor_fraction: f64,
    /// Added to receiver sensitivity to form the advertised join threshold;
    /// higher bias prunes weak links and deepens the tree.
    pub rssi_bias_db: f64,
    pub beacon_period_s: f64,
    pub msgs_per_node_per_hour: f64,
    /// Uplink message length in sub-slots (2 = one slot, 456 payload bits).
    pub payload_subslots: u64,
    /// Traffic generation horizon.
    pub duration_s: f64,
    /// Extra time after the horizon to let in-flight messages finish.
    pub drain_s: f64,
    /// Measurement window for loss bucketing.
    pub window_s: f64,
    /// Association fraction that opens the measurement span.
    pub warmup_assoc_fraction: f64,
    /// Fallback: start measuring at this fraction of the horizon even if
    /// association never reaches the gate.
    pub max_warmup_fraction: f64,
    /// Depth cap: only devices above this hop count relay.
    pub max_hops: u16,
    pub harq_max_retransmissions: u32,
    pub ack_timeout_slots: u64,
    pub lbt: LbtParams,
    pub per_curve: PerCurve,
    /// Fixture hook: fixed packet error probability instead of the
    /// SINR-driven curve.
    pub per_override: Option<f64>,
    pub energy: EnergyParams,
    /// Run structural audits at this cadence (seconds).
    pub audit_every_s: Option<f64>,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            seed: 1,
            n_sites: 19,
            isd_m: 500.0,
            placement: Placement::FullArea,
            n_nodes: 1000,
            n_carriers: 1,
            mu: 1,
            beta: 1,
            fc_ghz: 1.9,
            noise_figure_db: 7.0,
            sink_power_dbm: 23.0,
            node_power_dbm: 7.0,
            sink_height_m: 25.0,
            node_height_m: 1.5,
            indoor_fraction: 0.8,
            rssi_bias_db: 0.0,
            beacon_period_s: 10.0,
            msgs_per_node_per_hour: 0.5,
            payload_subslots: 2,
            duration_s: 600.0,
            drain_s: 60.0,
            window_s: 30.0,
            warmup_assoc_fraction: 0.99,
            max_warmup_fraction: 0.5,
            max_hops: 8,
            harq_max_retransmissions: 3,
            ack_timeout_slots: 2,
            lbt: LbtParams::default(),
            per_curve: PerCurve::default(),
            per_override: None,
            energy: EnergyParams::default(),
            audit_every_s: None,
        }
    }
}
