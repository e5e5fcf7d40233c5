//! Shared radio medium: per-carrier transmission records with a bounded
//! history window, power queries for carrier sensing, and duration-weighted
//! SINR resolution over overlapping interference.

use crate::numerology::Ticks;
use crate::propagation::mw_to_dbm;

pub type TxId = u64;

/// One on-air transmission. The end time is fixed when it begins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxRecord {
    pub id: TxId,
    pub sender: u32,
    pub carrier: u8,
    pub start: Ticks,
    pub end: Ticks,
    pub power_dbm: f64,
}

/// One carrier's transmission log, ordered by start time. `head` marks the
/// first retained record so trims are O(1) amortised.
#[derive(Clone, Default)]
struct CarrierLog {
    records: Vec<TxRecord>,
    head: usize,
    max_duration: Ticks,
}

impl CarrierLog {
    fn live(&self) -> &[TxRecord] {
        &self.records[self.head..]
    }
}

/// Per-carrier transmission log. Records are kept for `retention` ticks past
/// their end so that carrier-sense recounts can query the recent past.
pub struct Medium {
    carriers: Vec<CarrierLog>,
    retention: Ticks,
    next_id: TxId,
}

impl Medium {
    pub fn new(n_carriers: usize, retention: Ticks) -> Self {
        Medium { carriers: vec![CarrierLog::default(); n_carriers], retention, next_id: 0 }
    }

    pub fn n_carriers(&self) -> usize {
        self.carriers.len()
    }

    /// Register a transmission spanning `[start, end)`.
    pub fn begin(
        &mut self,
        carrier: u8,
        sender: u32,
        start: Ticks,
        end: Ticks,
        power_dbm: f64,
    ) -> TxId {
        assert!(end > start, "transmission must have positive duration");
        let retention = self.retention;
        let log = &mut self.carriers[carrier as usize];
        debug_assert!(
            log.live().last().map_or(true, |r| r.start <= start),
            "begins arrive in time order"
        );
        // Drop records that ended longer than `retention` ago. Starts are
        // ordered, so once a record is fresh enough the rest are too.
        while log
            .records
            .get(log.head)
            .map_or(false, |r| r.start + log.max_duration + retention < start)
        {
            log.head += 1;
        }
        if log.head > 4096 && log.head * 2 > log.records.len() {
            log.records.drain(..log.head);
            log.head = 0;
        }
        let id = self.next_id;
        self.next_id += 1;
        log.max_duration = log.max_duration.max(end - start);
        log.records.push(TxRecord { id, sender, carrier, start, end, power_dbm });
        id
    }

    pub fn find(&self, carrier: u8, id: TxId) -> Option<&TxRecord> {
        self.carriers[carrier as usize].live().iter().rev().find(|r| r.id == id)
    }

    /// All records overlapping `[w_start, w_end)` (or touching the instant
    /// `w_start` when the window is empty). Binary search bounds the scan:
    /// starts are ordered and no record lasts longer than `max_duration`.
    pub fn overlapping(
        &self,
        carrier: u8,
        w_start: Ticks,
        w_end: Ticks,
    ) -> impl Iterator<Item = &TxRecord> {
        let log = &self.carriers[carrier as usize];
        let live = log.live();
        let w_end = w_end.max(w_start + 1);
        let lo = live.partition_point(|r| r.start + log.max_duration <= w_start);
        let hi = live.partition_point(|r| r.start < w_end);
        live[lo..hi.max(lo)].iter().filter(move |r| r.end > w_start)
    }

    /// Peak total received power over `[w_start, w_end)` in dBm. Power is
    /// piecewise constant, so it suffices to evaluate at the window start and
    /// at every transmission start inside the window. The closure maps a
    /// record to received power in mW (return 0.0 to ignore it).
    pub fn peak_power_dbm(
        &self,
        carrier: u8,
        w_start: Ticks,
        w_end: Ticks,
        mut rx_mw: impl FnMut(&TxRecord) -> f64,
    ) -> f64 {
        let records: Vec<(&TxRecord, f64)> = self
            .overlapping(carrier, w_start, w_end)
            .map(|r| (r, 0.0))
            .collect();
        let mut records: Vec<(&TxRecord, f64)> =
            records.into_iter().map(|(r, _)| (r, rx_mw(r))).collect();
        records.retain(|(_, p)| *p > 0.0);
        let mut points: Vec<Ticks> = vec![w_start];
        for (r, _) in &records {
            if r.start > w_start && r.start < w_end {
                points.push(r.start);
            }
        }
        let mut peak = 0.0f64;
        for t in points {
            let sum: f64 = records
                .iter()
                .filter(|(r, _)| r.start <= t && t < r.end)
                .map(|(_, p)| p)
                .sum();
            peak = peak.max(sum);
        }
        mw_to_dbm(peak)
    }

    /// Interference overlapping the desired span, clamped to it, as
    /// `(start, end, rx_mw)` segments. The desired record is skipped.
    pub fn interference_segments(
        &self,
        carrier: u8,
        desired_id: TxId,
        span_start: Ticks,
        span_end: Ticks,
        mut rx_mw: impl FnMut(&TxRecord) -> f64,
    ) -> Vec<(Ticks, Ticks, f64)> {
        self.overlapping(carrier, span_start, span_end)
            .filter(|r| r.id != desired_id)
            .filter_map(|r| {
                let p = rx_mw(r);
                if p > 0.0 {
                    Some((r.start.max(span_start), r.end.min(span_end), p))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Structural sanity check over the transmission logs.
    pub fn audit(&self) -> Result<(), String> {
        for (c, log) in self.carriers.iter().enumerate() {
            let mut prev_start = 0;
            for r in log.live() {
                if r.end <= r.start {
                    return Err(format!("carrier {c}: record {} has empty span", r.id));
                }
                if r.start < prev_start {
                    return Err(format!("carrier {c}: record {} out of order", r.id));
                }
                prev_start = r.start;
            }
        }
        Ok(())
    }
}

/// Duration-weighted mean of the linear SINR across the desired span, with
/// the span partitioned at every interferer boundary.
pub fn mean_linear_sinr(
    desired_mw: f64,
    span_start: Ticks,
    span_end: Ticks,
    interferers: &[(Ticks, Ticks, f64)],
    noise_mw: f64,
) -> f64 {
    if span_end <= span_start {
        return desired_mw / noise_mw;
    }
    let mut bounds: Vec<Ticks> = vec![span_start, span_end];
    for &(s, e, _) in interferers {
        if s > span_start && s < span_end {
            bounds.push(s);
        }
        if e > span_start && e < span_end {
            bounds.push(e);
        }
    }
    bounds.sort_unstable();
    bounds.dedup();
    let mut weighted = 0.0;
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        let interference: f64 = interferers
            .iter()
            .filter(|&&(s, e, _)| s <= a && b <= e)
            .map(|&(_, _, p)| p)
            .sum();
        weighted += (b - a) as f64 * desired_mw / (noise_mw + interference);
    }
    weighted / (span_end - span_start) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip() {
        let mut m = Medium::new(2, 1000);
        let a = m.begin(0, 7, 100, 340, 10.0);
        let b = m.begin(1, 8, 120, 360, 7.0);
        assert_ne!(a, b);
        assert_eq!(m.find(0, a).unwrap().sender, 7);
        assert_eq!(m.find(1, b).unwrap().end, 360);
        assert!(m.find(0, b).is_none(), "records are per carrier");
        assert!(m.audit().is_ok());
    }

    #[test]
    fn retention_trims_old_records() {
        let mut m = Medium::new(1, 1000);
        let old = m.begin(0, 1, 0, 100, 0.0);
        m.begin(0, 2, 1101, 1200, 0.0);
        assert!(m.find(0, old).is_none(), "ended 1001 ticks before the new begin");
        // A record ending exactly `retention` ago is still queryable.
        let kept = m.begin(0, 3, 1300, 1400, 0.0);
        m.begin(0, 4, 2400, 2500, 0.0);
        assert!(m.find(0, kept).is_some());
    }

    #[test]
    fn peak_power_sums_concurrent_transmissions() {
        let mut m = Medium::new(1, 1000);
        m.begin(0, 1, 0, 200, 0.0);
        m.begin(0, 2, 100, 300, 0.0);
        // Received at -80 and -90 dBm; concurrent section sums to -79.586.
        let rx = |r: &TxRecord| if r.sender == 1 { 1e-8 } else { 1e-9 };
        let peak = m.peak_power_dbm(0, 0, 300, rx);
        assert!((peak - (-79.58607314841775)).abs() < 1e-9);
        // A window covering only the lone second transmission sees -90.
        let peak = m.peak_power_dbm(0, 200, 300, rx);
        assert!((peak - (-90.0)).abs() < 1e-9);
        // Empty window probes the instant.
        let peak = m.peak_power_dbm(0, 150, 150, rx);
        assert!((peak - (-79.58607314841775)).abs() < 1e-9);
        // Quiet window.
        assert_eq!(m.peak_power_dbm(0, 400, 500, rx), f64::NEG_INFINITY);
    }

    #[test]
    fn ignored_records_do_not_contribute() {
        let mut m = Medium::new(1, 1000);
        m.begin(0, 1, 0, 100, 0.0);
        let peak = m.peak_power_dbm(0, 0, 100, |_| 0.0);
        assert_eq!(peak, f64::NEG_INFINITY);
    }

    #[test]
    fn segments_clamp_to_span() {
        let mut m = Medium::new(1, 1000);
        m.begin(0, 2, 0, 160, 10.0);
        let d = m.begin(0, 1, 100, 340, 10.0);
        m.begin(0, 3, 300, 500, 10.0);
        let segs = m.interference_segments(0, d, 100, 340, |_| 1e-9);
        assert_eq!(segs, vec![(100, 160, 1e-9), (300, 340, 1e-9)]);
    }

    #[test]
    fn mean_sinr_weights_by_duration() {
        // Desired 4 mW over [0,100); interferer 4 mW over [50,150); noise 1 mW.
        // Clean half: SINR 4; jammed half: 4/5. Mean = 2.4.
        let segs = vec![(50, 100, 4.0)];
        let got = mean_linear_sinr(4.0, 0, 100, &segs, 1.0);
        assert!((got - 2.4).abs() < 1e-12);
    }

    #[test]
    fn equal_power_full_overlap_sits_at_zero_db() {
        let p = 1e-9;
        let segs = vec![(0, 240, p)];
        let got = mean_linear_sinr(p, 0, 240, &segs, 1e-15);
        assert!((10.0 * got.log10()).abs() < 0.01, "linear ratio {got} should be ~1");
    }

    #[test]
    fn no_interference_reduces_to_snr() {
        let got = mean_linear_sinr(2e-9, 0, 240, &[], 1e-9);
        assert!((got - 2.0).abs() < 1e-12);
    }

    #[test]
    fn extra_interference_never_helps() {
        let mut state = 0xD1CEu64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as u64
        };
        for _ in 0..200 {
            let n = (next() % 5) as usize;
            let mut segs: Vec<(Ticks, Ticks, f64)> = (0..n)
                .map(|_| {
                    let s = next() % 900;
                    let e = s + 1 + next() % 200;
                    (s, e.min(1000), 1e-12 * (1 + next() % 1000) as f64)
                })
                .collect();
            let base = mean_linear_sinr(1e-9, 0, 1000, &segs, 1e-12);
            let s = next() % 900;
            segs.push((s, s + 1 + next() % 100, 1e-12 * (1 + next() % 1000) as f64));
            let more = mean_linear_sinr(1e-9, 0, 1000, &segs, 1e-12);
            assert!(more <= base + 1e-18, "added interference raised SINR: {base} -> {more}");
        }
    }
}
