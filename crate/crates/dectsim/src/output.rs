//! Result serialization: a fixed-schema CSV table of run summaries plus a
//! TOML metadata echo of the configuration that produced them.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::config::RunConfig;
use crate::sim::RunSummary;

/// Column order of the results table. Kept explicit so downstream scripts
/// can rely on it.
pub const CSV_COLUMNS: &[&str] = &[
    "seed",
    "n_sites",
    "n_nodes",
    "n_carriers",
    "density_per_km2",
    "rssi_bias_db",
    "duration_s",
    "meas_start_s",
    "generated",
    "delivered",
    "lost",
    "loss_below_sensitivity",
    "loss_channel_error",
    "loss_half_duplex",
    "loss_no_route",
    "loss_drained",
    "plr",
    "latency_mean_ms",
    "latency_p50_ms",
    "latency_p99_ms",
    "energy_total_j",
    "delivered_payload_mbit",
    "efficiency_mbit_per_j",
    "associated_fraction",
    "mean_hops",
    "max_hops",
    "data_tx_count",
    "beacon_tx_count",
    "wall_seconds",
];

/// Format a float with nine significant digits, plain notation where
/// possible. NaN becomes an empty cell.
fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return String::new();
    }
    let s = format!("{v:.8e}");
    // Re-parse through shortest-exact formatting when the magnitude is
    // comfortable, to keep small integers readable.
    if v == 0.0 || (v.abs() >= 1e-3 && v.abs() < 1e12) {
        let rounded: f64 = s.parse().expect("formatted float parses");
        format!("{rounded}")
    } else {
        s
    }
}

fn row(s: &RunSummary) -> String {
    let mut line = String::new();
    let cells: Vec<String> = vec![
        s.seed.to_string(),
        s.n_sites.to_string(),
        s.n_nodes.to_string(),
        s.n_carriers.to_string(),
        fmt_f64(s.density_per_km2),
        fmt_f64(s.rssi_bias_db),
        fmt_f64(s.duration_s),
        fmt_f64(s.meas_start_s),
        s.generated.to_string(),
        s.delivered.to_string(),
        s.lost.to_string(),
        s.loss.below_sensitivity.to_string(),
        s.loss.channel_error.to_string(),
        s.loss.half_duplex.to_string(),
        s.loss.no_route.to_string(),
        s.loss.drained.to_string(),
        fmt_f64(s.plr),
        fmt_f64(s.latency_mean_ms),
        fmt_f64(s.latency_p50_ms),
        fmt_f64(s.latency_p99_ms),
        fmt_f64(s.energy_total_j),
        fmt_f64(s.delivered_payload_mbit),
        fmt_f64(s.efficiency_mbit_per_j),
        fmt_f64(s.associated_fraction),
        fmt_f64(s.mean_hops),
        s.max_hops.to_string(),
        s.data_tx_count.to_string(),
        s.beacon_tx_count.to_string(),
        fmt_f64(s.wall_seconds),
    ];
    debug_assert_eq!(cells.len(), CSV_COLUMNS.len());
    for (i, c) in cells.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        line.push_str(c);
    }
    line
}

/// Render summaries as a CSV document with a header row.
pub fn to_csv(summaries: &[RunSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", CSV_COLUMNS.join(","));
    for s in summaries {
        let _ = writeln!(out, "{}", row(s));
    }
    out
}

/// Write the results table and a `<stem>.meta.toml` echo of the
/// configuration next to it.
pub fn write_results(path: &Path, cfg_text: &str, summaries: &[RunSummary]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, to_csv(summaries))?;
    let meta = path.with_extension("meta.toml");
    fs::write(meta, cfg_text)?;
    Ok(())
}

/// Re-parse a configuration echo written by [`write_results`].
pub fn read_config_echo(path: &Path) -> Result<RunConfig, crate::config::ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| crate::config::ConfigError::Invalid(format!("read {path:?}: {e}")))?;
    RunConfig::from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::LossBreakdown;

    fn sample() -> RunSummary {
        RunSummary {
            seed: 1,
            n_sites: 7,
            n_nodes: 100,
            n_carriers: 1,
            density_per_km2: 5000.0,
            rssi_bias_db: 3.0,
            duration_s: 600.0,
            meas_start_s: 60.0,
            generated: 1000,
            delivered: 990,
            lost: 10,
            loss: LossBreakdown {
                below_sensitivity: 1,
                channel_error: 5,
                half_duplex: 2,
                no_route: 1,
                drained: 1,
            },
            plr: 0.01,
            latency_mean_ms: 1.25,
            latency_p50_ms: 1.0,
            latency_p99_ms: 7.5,
            energy_total_j: 12.345678912345,
            delivered_payload_mbit: 0.45144,
            efficiency_mbit_per_j: 0.03657,
            associated_fraction: 1.0,
            mean_hops: 1.5,
            max_hops: 3,
            data_tx_count: 2000,
            beacon_tx_count: 500,
            wall_seconds: 3.25,
        }
    }

    #[test]
    fn header_matches_row_width() {
        let csv = to_csv(&[sample()]);
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        let row = lines.next().unwrap();
        assert_eq!(header.split(',').count(), row.split(',').count());
        assert_eq!(header.split(',').count(), CSV_COLUMNS.len());
    }

    #[test]
    fn floats_keep_nine_significant_digits() {
        assert_eq!(fmt_f64(12.345678912345), "12.3456789");
        assert_eq!(fmt_f64(0.01), "0.01");
        assert_eq!(fmt_f64(1.0e-7), "1.00000000e-7");
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(f64::NAN), "");
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out/results.csv");
        let cfg = "n_nodes = 100\nseed = 9\n";
        write_results(&path, cfg, &[sample()]).unwrap();
        let table = fs::read_to_string(&path).unwrap();
        assert!(table.starts_with("seed,"));
        assert_eq!(table.lines().count(), 2);
        let echo = read_config_echo(&path.with_extension("meta.toml")).unwrap();
        assert_eq!(echo.n_nodes, 100);
        assert_eq!(echo.seed, 9);
    }
}
