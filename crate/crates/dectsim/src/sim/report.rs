//! Per-run results.

use serde::Serialize;

/// Terminal causes for lost messages, counted over the measurement span.
/// A multi-transmission message is attributed to its last failing cause.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub below_sensitivity: u64,
    pub channel_error: u64,
    pub half_duplex: u64,
    /// Originator never held an upstream route while the run drained.
    pub no_route: u64,
    /// Still in flight when the drain budget ran out.
    pub drained: u64,
}

impl LossBreakdown {
    pub fn total(&self) -> u64 {
        self.below_sensitivity + self.channel_error + self.half_duplex + self.no_route
            + self.drained
    }
}

/// Measurement-span results of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub n_sites: usize,
    pub n_nodes: usize,
    pub n_carriers: u8,
    pub density_per_km2: f64,
    pub rssi_bias_db: f64,
    pub duration_s: f64,
    pub meas_start_s: f64,
    pub generated: u64,
    pub delivered: u64,
    pub lost: u64,
    pub loss: LossBreakdown,
    pub plr: f64,
    pub latency_mean_ms: f64,
    pub latency_p50_ms: f64,
    pub latency_p99_ms: f64,
    /// Non-sink energy over the measurement span.
    pub energy_total_j: f64,
    pub delivered_payload_mbit: f64,
    pub efficiency_mbit_per_j: f64,
    pub associated_fraction: f64,
    pub mean_hops: f64,
    pub max_hops: u16,
    pub data_tx_count: u64,
    pub beacon_tx_count: u64,
    pub wall_seconds: f64,
}
