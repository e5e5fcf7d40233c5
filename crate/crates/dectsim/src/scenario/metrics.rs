//! Measurement statistics: nearest-rank percentiles, generation-window loss
//! accounting, steady-state detection on windowed series, and batch-means
//! confidence intervals.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::numerology::Ticks;

/// Nearest-rank percentile: the ceil(p/100 * n)-th smallest sample.
pub fn nearest_rank_percentile(samples: &[f64], p: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples are finite"));
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

/// Two-sided 95% Student-t quantile for `df` degrees of freedom.
pub fn student_t_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("valid degrees of freedom")
        .inverse_cdf(0.975)
}

/// Split `samples` into `n_batches` equal batches (tail remainder dropped)
/// and return `(mean of batch means, t-based 95% half-width)`.
pub fn batch_means_ci(samples: &[f64], n_batches: usize) -> Option<(f64, f64)> {
    if n_batches < 2 || samples.len() < n_batches {
        return None;
    }
    let batch = samples.len() / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| samples[b * batch..(b + 1) * batch].iter().sum::<f64>() / batch as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
    let half = student_t_975(n_batches - 1) * (var / n_batches as f64).sqrt();
    Some((mean, half))
}

/// Lag-1 autocorrelation; near zero means batches behave independently.
pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let denom: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    num / denom
}

/// First window index from which the series can be treated as steady:
/// the end of the first `span`-wide moving-average pair whose relative
/// change is within `epsilon`. `None` if the series never settles.
pub fn steady_state_start(series: &[f64], span: usize, epsilon: f64) -> Option<usize> {
    if series.len() < span + 1 || span == 0 {
        return None;
    }
    let ma: Vec<f64> = series
        .windows(span)
        .map(|w| w.iter().sum::<f64>() / span as f64)
        .collect();
    for i in 1..ma.len() {
        let denom = ma[i - 1].abs().max(1e-12);
        if (ma[i] - ma[i - 1]).abs() <= epsilon * denom {
            return Some(i - 1 + span);
        }
    }
    None
}

/// Generated/delivered message counts bucketed by generation window, so a
/// message's outcome is always attributed to the window that produced it.
pub struct WindowedCounts {
    window_ticks: Ticks,
    generated: Vec<u64>,
    delivered: Vec<u64>,
}

impl WindowedCounts {
    pub fn new(window_ticks: Ticks) -> Self {
        assert!(window_ticks > 0);
        WindowedCounts { window_ticks, generated: Vec::new(), delivered: Vec::new() }
    }

    fn window_of(&self, gen_tick: Ticks) -> usize {
        (gen_tick / self.window_ticks) as usize
    }

    fn grow(&mut self, w: usize) {
        if self.generated.len() <= w {
            self.generated.resize(w + 1, 0);
            self.delivered.resize(w + 1, 0);
        }
    }

    pub fn record_generated(&mut self, gen_tick: Ticks) {
        let w = self.window_of(gen_tick);
        self.grow(w);
        self.generated[w] += 1;
    }

    /// Keyed by the message's generation tick, not its delivery tick.
    pub fn record_delivered(&mut self, gen_tick: Ticks) {
        let w = self.window_of(gen_tick);
        self.grow(w);
        self.delivered[w] += 1;
    }

    pub fn n_windows(&self) -> usize {
        self.generated.len()
    }

    pub fn generated_from(&self, start_window: usize) -> u64 {
        self.generated.iter().skip(start_window).sum()
    }

    pub fn delivered_from(&self, start_window: usize) -> u64 {
        self.delivered.iter().skip(start_window).sum()
    }

    /// Aggregate loss ratio over windows `start_window..`.
    pub fn plr_from(&self, start_window: usize) -> Option<f64> {
        let gen = self.generated_from(start_window);
        if gen == 0 {
            return None;
        }
        Some(1.0 - self.delivered_from(start_window) as f64 / gen as f64)
    }

    /// Per-window loss ratio; `None` for windows with no arrivals.
    pub fn plr_series(&self) -> Vec<Option<f64>> {
        self.generated
            .iter()
            .zip(&self.delivered)
            .map(|(&g, &d)| if g == 0 { None } else { Some(1.0 - d as f64 / g as f64) })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_golden_cases() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(nearest_rank_percentile(&v, 99.0), Some(99.0));
        assert_eq!(nearest_rank_percentile(&v, 50.0), Some(50.0));
        assert_eq!(nearest_rank_percentile(&v, 100.0), Some(100.0));
        let v: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        assert_eq!(nearest_rank_percentile(&v, 99.0), Some(10.0));
        assert_eq!(nearest_rank_percentile(&[5.0], 99.0), Some(5.0));
        assert_eq!(nearest_rank_percentile(&[], 99.0), None);
        // Order of input must not matter.
        assert_eq!(nearest_rank_percentile(&[3.0, 1.0, 2.0], 50.0), Some(2.0));
    }

    #[test]
    fn t_quantile_pins() {
        assert!((student_t_975(4) - 2.776445105).abs() < 1e-6);
        assert!((student_t_975(9) - 2.262157163).abs() < 1e-6);
        assert!((student_t_975(19) - 2.093024054).abs() < 1e-6);
    }

    #[test]
    fn batch_means_fixture() {
        let v: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let (mean, half) = batch_means_ci(&v, 10).unwrap();
        assert!((mean - 10.5).abs() < 1e-12);
        // Batch means 1.5,3.5,...,19.5: s^2 = 330/9, half = t * s / sqrt(10).
        let s = (330.0f64 / 9.0).sqrt();
        let expect = 2.262157163 * s / 10.0f64.sqrt();
        assert!((half - expect).abs() < 1e-6, "half {half} expect {expect}");
        assert!(batch_means_ci(&v, 30).is_none());
    }

    #[test]
    fn batched_ar1_series_decorrelates() {
        // AR(1) with strong lag-1 correlation; batching restores near
        // independence of the batch means.
        let mut x = 0.0f64;
        let mut state = 42u64;
        let mut noise = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let series: Vec<f64> = (0..20_000)
            .map(|_| {
                x = 0.7 * x + noise();
                x
            })
            .collect();
        assert!(lag1_autocorrelation(&series) > 0.6, "raw series is correlated");
        let batch = 1000;
        let means: Vec<f64> = series
            .chunks(batch)
            .map(|c| c.iter().sum::<f64>() / batch as f64)
            .collect();
        assert!(lag1_autocorrelation(&means).abs() < 0.2, "batch means decorrelate");
    }

    #[test]
    fn steady_state_detection() {
        // Settles once the decay flattens out.
        let series = [1.0, 0.8, 0.6, 0.4, 0.3, 0.22, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2];
        assert_eq!(steady_state_start(&series, 5, 0.05), Some(10));
        // A constant series is steady as soon as one window exists.
        let flat = [0.3; 8];
        assert_eq!(steady_state_start(&flat, 5, 0.05), Some(5));
        // Sustained exponential growth never settles.
        let growth: Vec<f64> = (0..30).map(|i| 1.1f64.powi(i)).collect();
        assert_eq!(steady_state_start(&growth, 5, 0.05), None);
        assert_eq!(steady_state_start(&[1.0, 1.0], 5, 0.05), None);
    }

    #[test]
    fn windowed_counts_attribute_by_generation() {
        let mut w = WindowedCounts::new(100);
        w.record_generated(0);
        w.record_generated(99);
        w.record_generated(100);
        w.record_delivered(99); // delivered later, still window 0
        assert_eq!(w.n_windows(), 2);
        assert_eq!(w.generated_from(0), 3);
        assert_eq!(w.delivered_from(0), 1);
        assert_eq!(w.plr_series(), vec![Some(0.5), Some(1.0)]);
        assert!((w.plr_from(0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(w.plr_from(5), None);
    }
}
