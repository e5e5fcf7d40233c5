//! Whole-run simulation assembly: parameters, the event-driven core and
//! the summary record it produces.

mod params;
mod report;
mod simulation;

pub use params::SimParams;
pub use report::{LossBreakdown, RunSummary};
pub use simulation::{run_simulation, Simulation};
