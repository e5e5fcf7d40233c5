//! Per-node uplink traffic: independent Poisson arrival streams.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::engine::named_stream;
use crate::numerology::{Ticks, TICKS_PER_SECOND};

/// Poisson message arrivals for one node, drawn from its own named stream.
pub struct TrafficSource {
    rng: ChaCha8Rng,
    exp: Exp<f64>,
}

impl TrafficSource {
    /// `rate_per_hour` messages per hour on average.
    pub fn new(master_seed: u64, node: u32, rate_per_hour: f64) -> Self {
        assert!(rate_per_hour > 0.0, "traffic rate must be positive");
        let rate_per_sec = rate_per_hour / 3600.0;
        TrafficSource {
            rng: named_stream(master_seed, "traffic", node as u64),
            exp: Exp::new(rate_per_sec).expect("positive rate"),
        }
    }

    /// Next arrival strictly after `now`, on the tick grid.
    pub fn next_after(&mut self, now: Ticks) -> Ticks {
        let gap_s = self.exp.sample(&mut self.rng);
        let gap = (gap_s * TICKS_PER_SECOND as f64).round() as u64;
        now + gap.max(1)
    }

    /// Uniform offset within `span`, used to desynchronise first arrivals.
    pub fn jitter(&mut self, span: Ticks) -> Ticks {
        self.rng.gen_range(0..span.max(1))
    }
}
