//! MAC primitives: listen-before-talk with binary exponential backoff,
//! random-access resource masks, HARQ retransmission state and per-FT
//! scheduled sub-slot allocations.
//!
//! These are pure state machines; the discrete-event engine drives them and
//! supplies carrier sensing results and feedback outcomes.

use crate::numerology::{Ticks, TimeBase, SLOTS_PER_FRAME, TICKS_PER_FRAME, TICKS_PER_SYMBOL};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MacError {
    #[error("no free allocation of {0} sub-slots in the frame")]
    NoCapacity(u64),
    #[error("unknown allocation id {0}")]
    UnknownAllocation(u64),
    #[error("random-access mask permits no sub-slot")]
    EmptyRachMask,
}

// ======================================================================
// Listen-before-talk
// ======================================================================

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbtParams {
    /// Initial contention window in sub-slots.
    pub cw_min: u32,
    /// Window cap in sub-slots.
    pub cw_max: u32,
    /// Channel considered busy above this received power.
    pub busy_threshold_dbm: f64,
    /// Sensing duration before a transmission, in OFDM symbols.
    pub sense_symbols: u64,
}

impl Default for LbtParams {
    fn default() -> Self {
        LbtParams { cw_min: 8, cw_max: 256, busy_threshold_dbm: -82.0, sense_symbols: 2 }
    }
}

impl LbtParams {
    pub fn sense_ticks(&self) -> Ticks {
        self.sense_symbols * TICKS_PER_SYMBOL
    }
}

/// Backoff state for one access attempt chain.
///
/// The window starts at `cw_min` sub-slots and doubles on every busy initial
/// sense, saturating at `cw_max`. The pending counter decrements only on
/// idle permitted sub-slots; the engine reports those.
#[derive(Debug, Clone, Copy, Default)]
pub struct LbtState {
    pub backoff_stage: u32,
    pub pending_backoff: Option<u32>,
}

impl LbtState {
    /// Current contention window in sub-slots.
    pub fn contention_window(&self, p: &LbtParams) -> u32 {
        p.cw_max.min(p.cw_min.saturating_mul(1u32 << self.backoff_stage.min(16)))
    }

    /// Busy initial sense: draw a backoff from the current window, then
    /// escalate the window for the next collision.
    pub fn on_busy(&mut self, p: &LbtParams, draw_uniform: impl FnOnce(u32) -> u32) -> u32 {
        let cw = self.contention_window(p);
        let k = draw_uniform(cw);
        debug_assert!(k < cw);
        self.pending_backoff = Some(k);
        self.backoff_stage += 1;
        k
    }

    /// Successful exchange: the next access attempt starts from `cw_min`.
    pub fn reset_stage(&mut self) {
        self.backoff_stage = 0;
        self.pending_backoff = None;
    }

    /// Count `idle` permitted sub-slots against the pending backoff;
    /// returns true once the countdown is exhausted.
    pub fn count_idle(&mut self, idle: u32) -> bool {
        match self.pending_backoff {
            Some(k) if idle >= k => {
                self.pending_backoff = None;
                true
            }
            Some(k) => {
                self.pending_backoff = Some(k - idle);
                false
            }
            None => true,
        }
    }
}

// ======================================================================
// Random access resources
// ======================================================================

/// Permitted random-access sub-slots over one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RachConfig {
    /// One flag per sub-slot position in the frame.
    pub permitted: Vec<bool>,
}

impl RachConfig {
    /// All sub-slots permitted (the default data path).
    pub fn all(tb: &TimeBase) -> Self {
        let n = (SLOTS_PER_FRAME * tb.subslots_per_slot) as usize;
        RachConfig { permitted: vec![true; n] }
    }

    pub fn subslots_per_frame(&self) -> u64 {
        self.permitted.len() as u64
    }

    pub fn is_permitted(&self, tb: &TimeBase, t: Ticks) -> bool {
        debug_assert_eq!(t % tb.ticks_per_subslot(), 0);
        let idx = (t % TICKS_PER_FRAME) / tb.ticks_per_subslot();
        self.permitted[idx as usize]
    }

    /// First permitted sub-slot boundary at or after `t`.
    pub fn next_permitted(&self, tb: &TimeBase, t: Ticks) -> Result<Ticks, MacError> {
        if !self.permitted.iter().any(|&p| p) {
            return Err(MacError::EmptyRachMask);
        }
        let step = tb.ticks_per_subslot();
        let mut b = tb.next_subslot_boundary(t);
        loop {
            if self.is_permitted(tb, b) {
                return Ok(b);
            }
            b += step;
        }
    }

    /// Permitted boundary strictly after `t`.
    pub fn next_permitted_after(&self, tb: &TimeBase, t: Ticks) -> Result<Ticks, MacError> {
        self.next_permitted(tb, t + 1)
    }
}

// ======================================================================
// HARQ
// ======================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarqFeedback {
    Ack,
    Nack,
    /// No feedback arrived before the sender timeout; treated as NACK.
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarqOutcome {
    /// Transmission acknowledged; the process is complete.
    Delivered,
    /// Schedule another transmission through a fresh access cycle.
    Retransmit,
    /// Retransmission budget exhausted; the transport block is lost.
    Failed,
}

/// Stop-and-wait HARQ process for one transport block.
#[derive(Debug, Clone, Copy)]
pub struct HarqProcess {
    pub max_retransmissions: u32,
    pub transmissions: u32,
}

impl HarqProcess {
    pub fn new(max_retransmissions: u32) -> Self {
        HarqProcess { max_retransmissions, transmissions: 0 }
    }

    /// Total transmissions allowed: the initial one plus retransmissions.
    pub fn max_transmissions(&self) -> u32 {
        self.max_retransmissions + 1
    }

    /// Record that one transmission went on air.
    pub fn on_transmit(&mut self) {
        self.transmissions += 1;
        debug_assert!(self.transmissions <= self.max_transmissions());
    }

    /// Advance on feedback (or its absence).
    pub fn step(&mut self, fb: HarqFeedback) -> HarqOutcome {
        match fb {
            HarqFeedback::Ack => HarqOutcome::Delivered,
            HarqFeedback::Nack | HarqFeedback::Timeout => {
                if self.transmissions >= self.max_transmissions() {
                    HarqOutcome::Failed
                } else {
                    HarqOutcome::Retransmit
                }
            }
        }
    }
}

/// Receiver-side feedback decision: a decoded block is acknowledged. A block
/// whose decode draw failed produces no on-air feedback at all in this
/// abstraction (control and data are folded into one draw), so the sender
/// timeout path carries the NACK meaning.
pub fn harq_feedback(decode_ok: bool) -> HarqFeedback {
    if decode_ok {
        HarqFeedback::Ack
    } else {
        HarqFeedback::Nack
    }
}

/// Feedback schedule: the acknowledgement occupies one slot starting at the
/// first slot boundary after the data ends; the sender times out a fixed
/// number of slots after the acknowledgement should have ended.
pub fn feedback_deadline(tb: &TimeBase, data_end: Ticks, timeout_slots: u64) -> Ticks {
    let ack_start = tb.next_slot_boundary(data_end);
    let ack_end = ack_start + crate::numerology::TICKS_PER_SLOT;
    ack_end + timeout_slots * crate::numerology::TICKS_PER_SLOT
}

// ======================================================================
// Scheduled allocations
// ======================================================================

/// One granted allocation: contiguous sub-slots repeating every frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Allocation {
    pub id: u64,
    /// First sub-slot index within the frame.
    pub start_subslot: u64,
    pub n_subslots: u64,
}

/// Per-FT allocation grid; grants never overlap within the cluster.
#[derive(Debug, Clone, Default)]
pub struct AllocationGrid {
    taken: Vec<bool>,
    grants: BTreeMap<u64, Allocation>,
    next_id: u64,
}

impl AllocationGrid {
    pub fn new(tb: &TimeBase) -> Self {
        let n = (SLOTS_PER_FRAME * tb.subslots_per_slot) as usize;
        AllocationGrid { taken: vec![false; n], grants: BTreeMap::new(), next_id: 0 }
    }

    /// Grant the first contiguous free run of `n_subslots`, if any.
    pub fn allocate(&mut self, n_subslots: u64) -> Result<Allocation, MacError> {
        let n = n_subslots as usize;
        if n == 0 || n > self.taken.len() {
            return Err(MacError::NoCapacity(n_subslots));
        }
        let mut run = 0usize;
        for i in 0..self.taken.len() {
            if self.taken[i] {
                run = 0;
            } else {
                run += 1;
                if run == n {
                    let start = i + 1 - n;
                    for flag in &mut self.taken[start..=i] {
                        *flag = true;
                    }
                    let alloc = Allocation {
                        id: self.next_id,
                        start_subslot: start as u64,
                        n_subslots,
                    };
                    self.next_id += 1;
                    self.grants.insert(alloc.id, alloc);
                    return Ok(alloc);
                }
            }
        }
        Err(MacError::NoCapacity(n_subslots))
    }

    pub fn release(&mut self, id: u64) -> Result<(), MacError> {
        let alloc = self.grants.remove(&id).ok_or(MacError::UnknownAllocation(id))?;
        let s = alloc.start_subslot as usize;
        for flag in &mut self.taken[s..s + alloc.n_subslots as usize] {
            *flag = false;
        }
        Ok(())
    }

    pub fn grants(&self) -> impl Iterator<Item = &Allocation> {
        self.grants.values()
    }

    /// True when no two grants share a sub-slot (audit hook).
    pub fn is_conflict_free(&self) -> bool {
        let mut seen = vec![false; self.taken.len()];
        for g in self.grants.values() {
            for i in g.start_subslot..g.start_subslot + g.n_subslots {
                if seen[i as usize] {
                    return false;
                }
                seen[i as usize] = true;
            }
        }
        true
    }
}
