//! Event queue ordered by (time, insertion sequence) and epoch counters for
//! invalidating stale timers without removing them from the queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::numerology::Ticks;

struct Entry<E> {
    at: Ticks,
    seq: u64,
    ev: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}
impl<E> Eq for Entry<E> {}
impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Entry<E> {
    // Reversed so the max-heap pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Time-ordered queue; ties pop in insertion order.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    seq: u64,
    now: Ticks,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue { heap: BinaryHeap::new(), seq: 0, now: 0 }
    }

    /// Current simulation time: the timestamp of the last popped event.
    pub fn now(&self) -> Ticks {
        self.now
    }

    /// Schedule `ev` at absolute tick `at`. Scheduling into the past is a
    /// logic error and aborts the run.
    pub fn schedule(&mut self, at: Ticks, ev: E) {
        assert!(
            at >= self.now,
            "event scheduled into the past: at={} now={}",
            at,
            self.now
        );
        self.heap.push(Entry { at, seq: self.seq, ev });
        self.seq += 1;
    }

    pub fn pop(&mut self) -> Option<(Ticks, E)> {
        let e = self.heap.pop()?;
        debug_assert!(e.at >= self.now);
        self.now = e.at;
        Some((e.at, e.ev))
    }

    pub fn peek_time(&self) -> Option<Ticks> {
        self.heap.peek().map(|e| e.at)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Per-slot monotone counters. Bumping a slot invalidates every timer event
/// that captured the previous value; stale events are dropped on pop.
#[derive(Clone, Debug)]
pub struct Epochs {
    counters: Vec<u64>,
}

impl Epochs {
    pub fn new(n: usize) -> Self {
        Epochs { counters: vec![0; n] }
    }

    pub fn current(&self, i: usize) -> u64 {
        self.counters[i]
    }

    /// Invalidate outstanding timers for slot `i`; returns the new epoch.
    pub fn bump(&mut self, i: usize) -> u64 {
        self.counters[i] += 1;
        self.counters[i]
    }

    pub fn is_current(&self, i: usize, epoch: u64) -> bool {
        self.counters[i] == epoch
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_pop_in_time_order() {
        let mut q = EventQueue::new();
        q.schedule(30, "c");
        q.schedule(10, "a");
        q.schedule(20, "b");
        assert_eq!(q.pop(), Some((10, "a")));
        assert_eq!(q.pop(), Some((20, "b")));
        assert_eq!(q.now(), 20);
        assert_eq!(q.pop(), Some((30, "c")));
        assert_eq!(q.pop(), None);
    }

    #[test]
    fn ties_pop_in_insertion_order() {
        let mut q = EventQueue::new();
        for i in 0..100 {
            q.schedule(42, i);
        }
        for i in 0..100 {
            assert_eq!(q.pop(), Some((42, i)));
        }
    }

    #[test]
    fn interleaved_ties_keep_fifo() {
        let mut q = EventQueue::new();
        q.schedule(5, "early");
        q.schedule(9, "x1");
        q.schedule(9, "x2");
        assert_eq!(q.pop(), Some((5, "early")));
        q.schedule(9, "x3");
        assert_eq!(q.pop(), Some((9, "x1")));
        assert_eq!(q.pop(), Some((9, "x2")));
        assert_eq!(q.pop(), Some((9, "x3")));
    }

    #[test]
    #[should_panic(expected = "scheduled into the past")]
    fn scheduling_into_the_past_aborts() {
        let mut q = EventQueue::new();
        q.schedule(100, ());
        q.pop();
        q.schedule(99, ());
    }

    #[test]
    fn scheduling_at_now_is_allowed() {
        let mut q = EventQueue::new();
        q.schedule(100, 1);
        q.pop();
        q.schedule(100, 2);
        assert_eq!(q.pop(), Some((100, 2)));
    }

    #[test]
    fn epochs_invalidate_stale_timers() {
        let mut e = Epochs::new(3);
        let t = e.current(1);
        assert!(e.is_current(1, t));
        e.bump(1);
        assert!(!e.is_current(1, t));
        assert!(e.is_current(1, t + 1));
        assert!(e.is_current(0, 0), "other slots untouched");
    }
}
