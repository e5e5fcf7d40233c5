//! Scenario construction and measurement: site layout and device placement,
//! per-device traffic streams, the device energy model, and the statistics
//! used to report loss, latency and efficiency.

mod deployment;
mod energy;
mod metrics;
mod traffic;

pub use deployment::{
    deployment_area_km2, disc_radius_m, hex_site_centers, place_nodes, DeviceSpec, Placement,
    SINKS_PER_SITE,
};
pub use energy::{tx_energy_j, tx_power_consumption_w, EnergyLedger, EnergyParams};
pub use metrics::{
    batch_means_ci, lag1_autocorrelation, nearest_rank_percentile, steady_state_start,
    student_t_975, WindowedCounts,
};
pub use traffic::TrafficSource;
