//! Device energy accounting.
//!
//! Transmit draw is the PA input power (output power over a 20% efficiency)
//! plus fixed circuitry overhead; receive windows draw a flat listening
//! power; all remaining time sleeps at a deep-sleep floor. Sinks are mains
//! powered and excluded from the totals.

use crate::numerology::{ticks_to_secs, Ticks};
use crate::propagation::dbm_to_mw;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub pa_efficiency: f64,
    pub tx_overhead_w: f64,
    pub rx_listen_w: f64,
    pub sleep_w: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            pa_efficiency: 0.2,
            tx_overhead_w: 0.010,
            rx_listen_w: 0.005,
            sleep_w: 10e-6,
        }
    }
}

/// Wall power drawn while transmitting at `power_dbm`.
pub fn tx_power_consumption_w(params: &EnergyParams, power_dbm: f64) -> f64 {
    dbm_to_mw(power_dbm) / 1000.0 / params.pa_efficiency + params.tx_overhead_w
}

/// Energy for one transmission of `airtime` ticks.
pub fn tx_energy_j(params: &EnergyParams, power_dbm: f64, airtime: Ticks) -> f64 {
    tx_power_consumption_w(params, power_dbm) * ticks_to_secs(airtime)
}

#[derive(Debug, Clone, Copy, Default)]
struct DeviceEnergy {
    tx_j: f64,
    rx_j: f64,
    active_ticks: Ticks,
}

/// Per-device accumulator; sleep is charged for all non-active time when
/// the ledger is finalised.
#[derive(Clone)]
pub struct EnergyLedger {
    params: EnergyParams,
    devices: Vec<DeviceEnergy>,
}

impl EnergyLedger {
    pub fn new(n_devices: usize, params: EnergyParams) -> Self {
        EnergyLedger { params, devices: vec![DeviceEnergy::default(); n_devices] }
    }

    pub fn params(&self) -> &EnergyParams {
        &self.params
    }

    pub fn charge_tx(&mut self, device: u32, power_dbm: f64, airtime: Ticks) {
        let d = &mut self.devices[device as usize];
        d.tx_j += tx_energy_j(&self.params, power_dbm, airtime);
        d.active_ticks += airtime;
    }

    pub fn charge_rx(&mut self, device: u32, listen: Ticks) {
        let d = &mut self.devices[device as usize];
        d.rx_j += self.params.rx_listen_w * ticks_to_secs(listen);
        d.active_ticks += listen;
    }

    /// Total energy for one device over a run of `total_ticks`, including
    /// sleep for the residual time.
    pub fn device_total_j(&self, device: u32, total_ticks: Ticks) -> f64 {
        let d = &self.devices[device as usize];
        let sleep_ticks = total_ticks.saturating_sub(d.active_ticks);
        d.tx_j + d.rx_j + self.params.sleep_w * ticks_to_secs(sleep_ticks)
    }

    /// Sum over the given devices (callers pass the non-sink population).
    pub fn total_j(&self, devices: impl IntoIterator<Item = u32>, total_ticks: Ticks) -> f64 {
        devices.into_iter().map(|d| self.device_total_j(d, total_ticks)).sum()
    }

    /// Energy spent since an earlier snapshot of this ledger, over a
    /// measurement span of `span_ticks`, summed over `devices`.
    pub fn total_j_since(
        &self,
        baseline: &EnergyLedger,
        devices: impl IntoIterator<Item = u32>,
        span_ticks: Ticks,
    ) -> f64 {
        devices
            .into_iter()
            .map(|dev| {
                let d = &self.devices[dev as usize];
                let b = &baseline.devices[dev as usize];
                let active = d.active_ticks - b.active_ticks;
                (d.tx_j - b.tx_j)
                    + (d.rx_j - b.rx_j)
                    + self.params.sleep_w * ticks_to_secs(span_ticks.saturating_sub(active))
            })
            .sum()
    }

    /// Delivered payload over consumed energy, in Mbit/J.
    pub fn efficiency_mbit_per_j(delivered_payload_bits: u64, total_j: f64) -> f64 {
        if total_j <= 0.0 {
            return 0.0;
        }
        delivered_payload_bits as f64 / 1e6 / total_j
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerology::{secs_to_ticks, TICKS_PER_SLOT};

    #[test]
    fn tx_energy_pin() {
        // One slot at 7 dBm: (5.0119 mW / 0.2 + 10 mW) * 416.67 us.
        let p = EnergyParams::default();
        let e = tx_energy_j(&p, 7.0, TICKS_PER_SLOT);
        assert!((e - 14.608067e-6).abs() < 1e-11, "got {e}");
    }

    #[test]
    fn sleep_dominates_an_idle_dayscale_run() {
        let p = EnergyParams::default();
        let ledger = EnergyLedger::new(2, p);
        // 25 hours of pure sleep at 10 uW = 0.9 J.
        let total = ledger.device_total_j(1, secs_to_ticks(25.0 * 3600.0));
        assert!((total - 0.9).abs() < 1e-12, "got {total}");
    }

    #[test]
    fn active_time_is_not_double_charged() {
        let p = EnergyParams::default();
        let mut ledger = EnergyLedger::new(1, p);
        let run = secs_to_ticks(10.0);
        ledger.charge_tx(0, 7.0, secs_to_ticks(1.0));
        ledger.charge_rx(0, secs_to_ticks(2.0));
        let total = ledger.device_total_j(0, run);
        let expect = tx_power_consumption_w(&p, 7.0) * 1.0 + 0.005 * 2.0 + 10e-6 * 7.0;
        assert!((total - expect).abs() < 1e-12);
    }

    #[test]
    fn totals_sum_selected_devices_only() {
        let p = EnergyParams::default();
        let mut ledger = EnergyLedger::new(3, p);
        ledger.charge_rx(0, secs_to_ticks(1.0));
        ledger.charge_rx(2, secs_to_ticks(1.0));
        let run = secs_to_ticks(1.0);
        let total = ledger.total_j([0, 2], run);
        assert!((total - 2.0 * 0.005).abs() < 1e-12);
    }

    #[test]
    fn snapshot_diff_isolates_the_measurement_span() {
        let p = EnergyParams::default();
        let mut ledger = EnergyLedger::new(1, p);
        ledger.charge_tx(0, 7.0, secs_to_ticks(1.0)); // warm-up, excluded
        let baseline = ledger.clone();
        ledger.charge_rx(0, secs_to_ticks(2.0));
        let span = secs_to_ticks(10.0);
        let got = ledger.total_j_since(&baseline, [0], span);
        let expect = 0.005 * 2.0 + 10e-6 * 8.0;
        assert!((got - expect).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn efficiency_units() {
        // 1 Mbit over 2 J => 0.5 Mbit/J.
        let e = EnergyLedger::efficiency_mbit_per_j(1_000_000, 2.0);
        assert!((e - 0.5).abs() < 1e-12);
        assert_eq!(EnergyLedger::efficiency_mbit_per_j(1, 0.0), 0.0);
    }
}
