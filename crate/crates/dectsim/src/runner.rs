//! Execution of configured runs: single runs, replications and density
//! sweeps, each with deterministic per-run seed derivation.

use anyhow::{Context, Result};

use crate::config::RunConfig;
use crate::engine::mix64;
use crate::sim::{run_simulation, RunSummary};

/// Derive the seed for one run of a series so replications and sweep points
/// never share RNG streams.
pub fn derive_seed(base: u64, series: u64, replication: u64) -> u64 {
    mix64(mix64(base, series.wrapping_add(0x9e37_79b9_7f4a_7c15)), replication)
}

/// Run one configuration once.
pub fn run_single(cfg: &RunConfig) -> Result<RunSummary> {
    let params = cfg.to_params();
    if params.n_nodes == 0 {
        anyhow::bail!("configuration yields zero nodes");
    }
    Ok(run_simulation(params))
}

/// Run `replications` copies of one configuration with derived seeds.
pub fn run_replicated(cfg: &RunConfig, series: u64, replications: u64) -> Result<Vec<RunSummary>> {
    let mut out = Vec::with_capacity(replications as usize);
    for r in 0..replications.max(1) {
        let mut c = cfg.clone();
        c.seed = derive_seed(cfg.seed, series, r);
        out.push(run_single(&c).with_context(|| format!("replication {r}"))?);
    }
    Ok(out)
}

/// Run the configuration across a list of densities (nodes per km^2),
/// holding everything else fixed.
pub fn run_sweep(
    cfg: &RunConfig,
    densities: &[f64],
    replications: u64,
) -> Result<Vec<RunSummary>> {
    let mut out = Vec::new();
    for (i, &d) in densities.iter().enumerate() {
        if !(d > 0.0) {
            anyhow::bail!("sweep density {d} must be positive");
        }
        let mut c = cfg.clone();
        c.density_per_km2 = Some(d);
        let runs = run_replicated(&c, i as u64 + 1, replications)
            .with_context(|| format!("density {d} nodes/km^2"))?;
        out.extend(runs);
    }
    Ok(out)
}
