//! Command-line front end: run one configuration, a replicated run, or a
//! density sweep, and write a CSV results table.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use dectsim::config::RunConfig;
use dectsim::output::write_results;
use dectsim::runner::{run_replicated, run_sweep};

#[derive(Parser, Debug)]
#[command(
    name = "dectsim",
    about = "Discrete-event simulator for self-organizing low-power mesh networks"
)]
struct Cli {
    /// TOML configuration file; omitted means built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Write a CSV results table (plus a .meta.toml config echo) here.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Comma-separated node densities (per km^2) to sweep.
    #[arg(long, value_delimiter = ',')]
    sweep_density: Vec<f64>,

    /// Independent replications per configuration point.
    #[arg(long, default_value_t = 1)]
    replications: u64,

    /// Override the configuration seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Run internal consistency audits every SECS of simulated time.
    #[arg(long, value_name = "SECS")]
    audit_every: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let cfg_text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => String::new(),
    };
    let mut cfg = match RunConfig::from_toml(&cfg_text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(every) = cli.audit_every {
        cfg.audit_every_s = Some(every);
    }

    let result = if cli.sweep_density.is_empty() {
        run_replicated(&cfg, 0, cli.replications)
    } else {
        run_sweep(&cfg, &cli.sweep_density, cli.replications)
    };
    let summaries = match result {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(3);
        }
    };

    for s in &summaries {
        println!(
            "seed={} nodes={} density={:.0}/km2 bias={} plr={:.5} p99={:.3}ms \
             eff={:.5}Mbit/J assoc={:.3} wall={:.1}s",
            s.seed,
            s.n_nodes,
            s.density_per_km2,
            s.rssi_bias_db,
            s.plr,
            s.latency_p99_ms,
            s.efficiency_mbit_per_j,
            s.associated_fraction,
            s.wall_seconds
        );
    }

    if let Some(out) = &cli.out {
        let echo = if cfg_text.is_empty() {
            format!("# defaults; seed = {}\n", cfg.seed)
        } else {
            cfg_text
        };
        if let Err(e) = write_results(out, &echo, &summaries) {
            eprintln!("error: cannot write {}: {e}", out.display());
            return ExitCode::from(3);
        }
    }
    ExitCode::SUCCESS
}
