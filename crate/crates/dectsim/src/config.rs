//! TOML run configuration and its mapping onto simulation parameters.

use serde::Deserialize;
use thiserror::Error;

use crate::scenario::Placement;
use crate::sim::SimParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Deployment geometry selection.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum PlacementKind {
    /// Uniform over the full hexagonal cell areas.
    FullArea,
    /// Equal-size discs around each site, `disc_area_km2` in total.
    SiteDiscs,
}

/// One simulation run as described in a TOML file. Every field has a
/// default, so an empty document is a valid (small, single-carrier) run.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub n_sites: usize,
    pub isd_m: f64,
    pub placement: PlacementKind,
    /// Total disc area when `placement = "site_discs"`.
    pub disc_area_km2: f64,
    /// Explicit node count; overridden by `density_per_km2` if set.
    pub n_nodes: usize,
    /// Node density; converted to a count over the deployment area.
    pub density_per_km2: Option<f64>,
    pub n_carriers: u8,
    pub fc_ghz: f64,
    pub noise_figure_db: f64,
    pub sink_power_dbm: f64,
    pub node_power_dbm: f64,
    pub sink_height_m: f64,
    pub node_height_m: f64,
    pub indoor_fraction: f64,
    pub rssi_bias_db: f64,
    pub beacon_period_s: f64,
    pub msgs_per_node_per_hour: f64,
    pub payload_subslots: u64,
    pub duration_s: f64,
    pub drain_s: f64,
    pub window_s: f64,
    pub warmup_assoc_fraction: f64,
    pub max_warmup_fraction: f64,
    pub max_hops: u16,
    pub harq_max_retransmissions: u32,
    pub ack_timeout_slots: u64,
    /// Force a fixed packet error probability (diagnostics only).
    pub per_override: Option<f64>,
    /// Run internal consistency audits at this interval.
    pub audit_every_s: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = SimParams::default();
        RunConfig {
            seed: p.seed,
            n_sites: p.n_sites,
            isd_m: p.isd_m,
            placement: PlacementKind::FullArea,
            disc_area_km2: 0.05,
            n_nodes: p.n_nodes,
            density_per_km2: None,
            n_carriers: p.n_carriers,
            fc_ghz: p.fc_ghz,
            noise_figure_db: p.noise_figure_db,
            sink_power_dbm: p.sink_power_dbm,
            node_power_dbm: p.node_power_dbm,
            sink_height_m: p.sink_height_m,
            node_height_m: p.node_height_m,
            indoor_fraction: p.indoor_fraction,
            rssi_bias_db: p.rssi_bias_db,
            beacon_period_s: p.beacon_period_s,
            msgs_per_node_per_hour: p.msgs_per_node_per_hour,
            payload_subslots: p.payload_subslots,
            duration_s: p.duration_s,
            drain_s: p.drain_s,
            window_s: p.window_s,
            warmup_assoc_fraction: p.warmup_assoc_fraction,
            max_warmup_fraction: p.max_warmup_fraction,
            max_hops: p.max_hops,
            harq_max_retransmissions: p.harq_max_retransmissions,
            ack_timeout_slots: p.ack_timeout_slots,
            per_override: None,
            audit_every_s: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.n_sites == 0 {
            return err("n_sites must be at least 1");
        }
        if self.n_carriers == 0 {
            return err("n_carriers must be at least 1");
        }
        if !(self.isd_m > 0.0) {
            return err("isd_m must be positive");
        }
        if self.placement == PlacementKind::SiteDiscs && !(self.disc_area_km2 > 0.0) {
            return err("disc_area_km2 must be positive");
        }
        if !(0.0..=1.0).contains(&self.indoor_fraction) {
            return err("indoor_fraction must lie in [0, 1]");
        }
        if !(self.duration_s > 0.0) {
            return err("duration_s must be positive");
        }
        if !(self.window_s > 0.0) {
            return err("window_s must be positive");
        }
        if self.msgs_per_node_per_hour < 0.0 {
            return err("msgs_per_node_per_hour must be non-negative");
        }
        if self.max_hops == 0 {
            return err("max_hops must be at least 1");
        }
        if let Some(p) = self.per_override {
            if !(0.0..=1.0).contains(&p) {
                return err("per_override must lie in [0, 1]");
            }
        }
        Ok(())
    }

    /// Deployment area implied by the geometry settings.
    pub fn area_km2(&self) -> f64 {
        match self.placement {
            PlacementKind::FullArea => {
                crate::scenario::deployment_area_km2(self.n_sites, self.isd_m)
            }
            PlacementKind::SiteDiscs => self.disc_area_km2,
        }
    }

    /// Node count after applying a density override, if any.
    pub fn effective_n_nodes(&self) -> usize {
        match self.density_per_km2 {
            Some(d) => (d * self.area_km2()).round().max(0.0) as usize,
            None => self.n_nodes,
        }
    }

    /// Translate into the parameter block the simulation core consumes.
    pub fn to_params(&self) -> SimParams {
        SimParams {
            seed: self.seed,
            n_sites: self.n_sites,
            isd_m: self.isd_m,
            placement: match self.placement {
                PlacementKind::FullArea => Placement::FullArea,
                PlacementKind::SiteDiscs => {
                    Placement::SiteDiscs { total_area_km2: self.disc_area_km2 }
                }
            },
            n_nodes: self.effective_n_nodes(),
            n_carriers: self.n_carriers,
            fc_ghz: self.fc_ghz,
            noise_figure_db: self.noise_figure_db,
            sink_power_dbm: self.sink_power_dbm,
            node_power_dbm: self.node_power_dbm,
            sink_height_m: self.sink_height_m,
            node_height_m: self.node_height_m,
            indoor_fraction: self.indoor_fraction,
            rssi_bias_db: self.rssi_bias_db,
            beacon_period_s: self.beacon_period_s,
            msgs_per_node_per_hour: self.msgs_per_node_per_hour,
            payload_subslots: self.payload_subslots,
            duration_s: self.duration_s,
            drain_s: self.drain_s,
            window_s: self.window_s,
            warmup_assoc_fraction: self.warmup_assoc_fraction,
            max_warmup_fraction: self.max_warmup_fraction,
            max_hops: self.max_hops,
            harq_max_retransmissions: self.harq_max_retransmissions,
            ack_timeout_slots: self.ack_timeout_slots,
            per_override: self.per_override,
            audit_every_s: self.audit_every_s,
            ..SimParams::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_a_valid_run() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.n_nodes, SimParams::default().n_nodes);
        assert_eq!(cfg.effective_n_nodes(), cfg.n_nodes);
    }

    #[test]
    fn density_overrides_node_count() {
        let cfg = RunConfig::from_toml(
            "placement = \"site_discs\"\ndisc_area_km2 = 0.05\ndensity_per_km2 = 1.0e6\n",
        )
        .unwrap();
        assert_eq!(cfg.effective_n_nodes(), 50_000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("no_such_key = 1\n").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_toml("n_carriers = 0\n").is_err());
        assert!(RunConfig::from_toml("indoor_fraction = 1.5\n").is_err());
        assert!(RunConfig::from_toml("per_override = 2.0\n").is_err());
    }

    #[test]
    fn params_carry_geometry_through() {
        let cfg = RunConfig::from_toml(
            "n_sites = 7\nplacement = \"site_discs\"\ndisc_area_km2 = 0.02\nn_nodes = 100\n",
        )
        .unwrap();
        let p = cfg.to_params();
        assert_eq!(p.n_sites, 7);
        assert_eq!(p.n_nodes, 100);
        assert!(matches!(p.placement, Placement::SiteDiscs { total_area_km2 } if total_area_km2 == 0.02));
    }
}
