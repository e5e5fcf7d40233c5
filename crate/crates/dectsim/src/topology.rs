//! Cluster-tree topology: beacon candidate filtering, parent selection,
//! association records and the forest bookkeeping rooted at the sinks.
//!
//! The registry is the single source of truth for parent/child relations and
//! hop counts. Re-association replaces the previous record atomically, and
//! every mutation keeps the structure a forest (checked by the audit).

use thiserror::Error;

pub type DeviceIdx = u32;
pub const NO_HOP: u16 = u16::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("device {0} is not associated")]
    NotAssociated(DeviceIdx),
    #[error("sinks do not originate or forward upward traffic")]
    SinkHasNoParent,
    #[error("parent {parent} is a descendant of {child}; association would create a cycle")]
    WouldCycle { child: DeviceIdx, parent: DeviceIdx },
    #[error("device {0} cannot parent: not in FT mode")]
    ParentNotFt(DeviceIdx),
}

// ======================================================================
// Beacons and candidates
// ======================================================================

/// Contents of a cluster beacon relevant to parent selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beacon {
    pub sender: DeviceIdx,
    pub sender_long_id: u32,
    pub hop_count: u16,
    pub carrier: u8,
    /// Minimum RSSI a joining device must observe (sensitivity + bias).
    pub min_quality_dbm: f64,
}

/// A heard beacon with its observed RSSI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub device: DeviceIdx,
    pub long_id: u32,
    pub hop_count: u16,
    pub carrier: u8,
    pub rssi_dbm: f64,
}

/// Keep only candidates heard at or above the advertised minimum quality.
pub fn filter_candidates(heard: &[(Beacon, f64)]) -> Vec<Candidate> {
    heard
        .iter()
        .filter(|(b, rssi)| *rssi >= b.min_quality_dbm)
        .map(|(b, rssi)| Candidate {
            device: b.sender,
            long_id: b.sender_long_id,
            hop_count: b.hop_count,
            carrier: b.carrier,
            rssi_dbm: *rssi,
        })
        .collect()
}

/// Rank candidates lexicographically: fewest hops, then strongest RSSI,
/// then lowest long RD id as the final tiebreak.
pub fn select_parent(candidates: &[Candidate]) -> Option<Candidate> {
    candidates.iter().copied().min_by(|a, b| {
        a.hop_count
            .cmp(&b.hop_count)
            .then(b.rssi_dbm.partial_cmp(&a.rssi_dbm).expect("rssi is finite"))
            .then(a.long_id.cmp(&b.long_id))
    })
}

/// Reselection rule: switch from the current parent only for a strictly
/// better hop count, or for at least `hysteresis_db` more RSSI without a
/// worse hop count.
pub fn is_better_parent(
    current_hop: u16,
    current_rssi: f64,
    cand: &Candidate,
    hysteresis_db: f64,
) -> bool {
    let cand_hop = cand.hop_count.saturating_add(1);
    cand_hop < current_hop
        || (cand_hop <= current_hop && cand.rssi_dbm >= current_rssi + hysteresis_db)
}

// ======================================================================
// Association registry
// ======================================================================

/// Durable association record; one per associated child.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssociationRecord {
    pub child: DeviceIdx,
    pub parent: DeviceIdx,
    pub child_long_id: u32,
    pub child_short_id: u16,
}

/// Forest of cluster trees rooted at the sinks.
#[derive(Debug, Clone)]
pub struct TopologyRegistry {
    parent: Vec<Option<DeviceIdx>>,
    children: Vec<Vec<DeviceIdx>>,
    hop: Vec<u16>,
    is_sink: Vec<bool>,
    records: Vec<Option<AssociationRecord>>,
    associated_count: usize,
}

impl TopologyRegistry {
    pub fn new(n_devices: usize, sinks: impl IntoIterator<Item = DeviceIdx>) -> Self {
        let mut reg = TopologyRegistry {
            parent: vec![None; n_devices],
            children: vec![Vec::new(); n_devices],
            hop: vec![NO_HOP; n_devices],
            is_sink: vec![false; n_devices],
            records: vec![None; n_devices],
            associated_count: 0,
        };
        for s in sinks {
            reg.is_sink[s as usize] = true;
            reg.hop[s as usize] = 0;
        }
        reg
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn is_sink(&self, d: DeviceIdx) -> bool {
        self.is_sink[d as usize]
    }

    pub fn is_associated(&self, d: DeviceIdx) -> bool {
        self.parent[d as usize].is_some()
    }

    pub fn parent_of(&self, d: DeviceIdx) -> Option<DeviceIdx> {
        self.parent[d as usize]
    }

    pub fn children_of(&self, d: DeviceIdx) -> &[DeviceIdx] {
        &self.children[d as usize]
    }

    /// Hop count to the rooting sink; `NO_HOP` when unassociated.
    pub fn hop_count(&self, d: DeviceIdx) -> u16 {
        self.hop[d as usize]
    }

    pub fn record(&self, child: DeviceIdx) -> Option<&AssociationRecord> {
        self.records[child as usize].as_ref()
    }

    /// Fraction of non-sink devices currently associated.
    pub fn associated_fraction(&self) -> f64 {
        let nodes = self.len() - self.is_sink.iter().filter(|&&s| s).count();
        if nodes == 0 {
            1.0
        } else {
            self.associated_count as f64 / nodes as f64
        }
    }

    /// True when `maybe_descendant` lies in the subtree of `root`.
    pub fn is_descendant(&self, maybe_descendant: DeviceIdx, root: DeviceIdx) -> bool {
        let mut cur = Some(maybe_descendant);
        while let Some(d) = cur {
            if d == root {
                return true;
            }
            cur = self.parent[d as usize];
        }
        false
    }

    /// Associate `child` under `parent`, replacing any previous record
    /// atomically and propagating hop counts through the child's subtree.
    pub fn associate(
        &mut self,
        child: DeviceIdx,
        parent: DeviceIdx,
        child_long_id: u32,
        child_short_id: u16,
    ) -> Result<AssociationRecord, TopologyError> {
        if self.is_sink[child as usize] {
            return Err(TopologyError::SinkHasNoParent);
        }
        if self.is_descendant(parent, child) {
            return Err(TopologyError::WouldCycle { child, parent });
        }
        if self.parent[child as usize].is_some() {
            self.detach_internal(child);
        }
        self.parent[child as usize] = Some(parent);
        self.children[parent as usize].push(child);
        self.associated_count += 1;
        let rec = AssociationRecord { child, parent, child_long_id, child_short_id };
        self.records[child as usize] = Some(rec);
        self.refresh_subtree_hops(child);
        Ok(rec)
    }

    /// Drop `child`'s association (parent loss); its subtree keeps pointing
    /// at it and is refreshed once the device rejoins.
    pub fn detach(&mut self, child: DeviceIdx) -> Result<(), TopologyError> {
        if self.parent[child as usize].is_none() {
            return Err(TopologyError::NotAssociated(child));
        }
        self.detach_internal(child);
        self.hop[child as usize] = NO_HOP;
        self.refresh_subtree_hops(child);
        Ok(())
    }

    fn detach_internal(&mut self, child: DeviceIdx) {
        if let Some(p) = self.parent[child as usize].take() {
            let kids = &mut self.children[p as usize];
            if let Some(pos) = kids.iter().position(|&c| c == child) {
                kids.remove(pos);
            }
            self.records[child as usize] = None;
            self.associated_count -= 1;
        }
    }

    /// Recompute hop counts below `root` after a parent change.
    fn refresh_subtree_hops(&mut self, root: DeviceIdx) {
        let base = match self.parent[root as usize] {
            Some(p) => {
                let ph = self.hop[p as usize];
                if ph == NO_HOP {
                    NO_HOP
                } else {
                    ph + 1
                }
            }
            None if self.is_sink[root as usize] => 0,
            None => NO_HOP,
        };
        self.hop[root as usize] = base;
        let mut stack = vec![root];
        while let Some(d) = stack.pop() {
            let h = self.hop[d as usize];
            for &c in &self.children[d as usize] {
                self.hop[c as usize] = if h == NO_HOP { NO_HOP } else { h.saturating_add(1) };
                stack.push(c);
            }
        }
    }

    /// Upstream forwarding target: the parent.
    pub fn route_next_hop(&self, d: DeviceIdx) -> Result<DeviceIdx, TopologyError> {
        if self.is_sink[d as usize] {
            return Err(TopologyError::SinkHasNoParent);
        }
        self.parent[d as usize].ok_or(TopologyError::NotAssociated(d))
    }

    /// Audit: parent pointers form a forest rooted at sinks and hop counts
    /// are consistent. Returns a description of the first violation.
    pub fn audit(&self) -> Result<(), String> {
        for d in 0..self.len() as DeviceIdx {
            // Cycle check by ancestor walk with a step bound.
            let mut cur = self.parent[d as usize];
            let mut steps = 0usize;
            while let Some(p) = cur {
                steps += 1;
                if steps > self.len() {
                    return Err(format!("cycle reachable from device {d}"));
                }
                cur = self.parent[p as usize];
            }
            if let Some(p) = self.parent[d as usize] {
                if self.is_sink[d as usize] {
                    return Err(format!("sink {d} has a parent"));
                }
                let (hd, hp) = (self.hop[d as usize], self.hop[p as usize]);
                if hp != NO_HOP && hd != hp + 1 {
                    return Err(format!("device {d} hop {hd} != parent hop {hp} + 1"));
                }
                if !self.children[p as usize].contains(&d) {
                    return Err(format!("device {d} missing from parent {p} child list"));
                }
            } else if !self.is_sink[d as usize] && self.hop[d as usize] != NO_HOP {
                return Err(format!("unassociated device {d} has hop {}", self.hop[d as usize]));
            }
        }
        Ok(())
    }
}

/// Draw a short RD id avoiding the given neighbourhood; collisions are
/// legal protocol-wide but re-drawn locally at association time.
pub fn draw_short_id(taken: &[u16], mut draw: impl FnMut() -> u16) -> u16 {
    loop {
        let id = draw();
        if !taken.contains(&id) {
            return id;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beacon(sender: DeviceIdx, hop: u16, minq: f64) -> Beacon {
        Beacon {
            sender,
            sender_long_id: 1000 + sender,
            hop_count: hop,
            carrier: 0,
            min_quality_dbm: minq,
        }
    }

    #[test]
    fn filter_drops_weak_beacons() {
        let heard = vec![
            (beacon(1, 1, -88.0), -95.0),
            (beacon(2, 1, -88.0), -90.0),
            (beacon(3, 1, -88.0), -85.0),
        ];
        let kept = filter_candidates(&heard);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].device, 3);
    }

    #[test]
    fn filter_is_monotone_in_bias() {
        // Raising the advertised minimum quality can only shrink the set.
        let rssis = [-97.0, -91.5, -88.0, -83.2, -70.0];
        let mut prev_len = usize::MAX;
        for bias in [0.0, 3.0, 10.0, 20.0] {
            let heard: Vec<_> = rssis
                .iter()
                .enumerate()
                .map(|(i, &r)| (beacon(i as DeviceIdx, 1, -98.0 + bias), r))
                .collect();
            let kept = filter_candidates(&heard);
            assert!(kept.len() <= prev_len);
            prev_len = kept.len();
        }
    }

    #[test]
    fn selection_order() {
        let c = |device, hop, rssi, long_id| Candidate {
            device,
            long_id,
            hop_count: hop,
            carrier: 0,
            rssi_dbm: rssi,
        };
        // Fewer hops beats stronger RSSI.
        let best = select_parent(&[c(1, 3, -60.0, 10), c(2, 2, -80.0, 11)]).unwrap();
        assert_eq!(best.device, 2);
        // Equal hops: strongest RSSI.
        let best = select_parent(&[c(1, 2, -75.0, 10), c(2, 2, -71.0, 11)]).unwrap();
        assert_eq!(best.device, 2);
        // Full tie: lowest long id.
        let best = select_parent(&[c(1, 2, -75.0, 12), c(2, 2, -75.0, 11)]).unwrap();
        assert_eq!(best.device, 2);
        assert!(select_parent(&[]).is_none());
    }

    #[test]
    fn reselection_hysteresis() {
        let cand = |hop, rssi| Candidate { device: 9, long_id: 9, hop_count: hop, carrier: 0, rssi_dbm: rssi };
        // 5.9 dB better at equal hops: stay.
        assert!(!is_better_parent(2, -80.0, &cand(1, -74.1), 6.0));
        // 6 dB better: switch.
        assert!(is_better_parent(2, -80.0, &cand(1, -74.0), 6.0));
        // Hop improvement switches regardless of RSSI.
        assert!(is_better_parent(3, -60.0, &cand(1, -90.0), 6.0));
        // Worse hop never switches on RSSI alone.
        assert!(!is_better_parent(2, -80.0, &cand(2, -60.0), 6.0));
    }

    fn registry() -> TopologyRegistry {
        // Devices 0,1 are sinks; 2..8 nodes.
        TopologyRegistry::new(8, [0, 1])
    }

    #[test]
    fn association_sets_hops() {
        let mut reg = registry();
        reg.associate(2, 0, 102, 2).unwrap();
        reg.associate(3, 2, 103, 3).unwrap();
        assert_eq!(reg.hop_count(0), 0);
        assert_eq!(reg.hop_count(2), 1);
        assert_eq!(reg.hop_count(3), 2);
        assert_eq!(reg.route_next_hop(3).unwrap(), 2);
        assert_eq!(reg.route_next_hop(0), Err(TopologyError::SinkHasNoParent));
        assert!(reg.audit().is_ok());
    }

    #[test]
    fn reassociation_replaces_record_and_updates_subtree() {
        let mut reg = registry();
        reg.associate(2, 0, 102, 2).unwrap();
        reg.associate(3, 2, 103, 3).unwrap();
        reg.associate(4, 3, 104, 4).unwrap();
        assert_eq!(reg.hop_count(4), 3);
        // Device 3 finds the other sink directly.
        reg.associate(3, 1, 103, 3).unwrap();
        assert_eq!(reg.parent_of(3), Some(1));
        assert_eq!(reg.hop_count(3), 1);
        assert_eq!(reg.hop_count(4), 2, "subtree hops follow the move");
        assert!(!reg.children_of(2).contains(&3));
        assert_eq!(reg.record(3).unwrap().parent, 1);
        assert!(reg.audit().is_ok());
    }

    #[test]
    fn cycles_are_rejected() {
        let mut reg = registry();
        reg.associate(2, 0, 102, 2).unwrap();
        reg.associate(3, 2, 103, 3).unwrap();
        reg.associate(4, 3, 104, 4).unwrap();
        // 2 adopting its grandchild's line as parent would loop.
        assert_eq!(
            reg.associate(2, 4, 102, 2),
            Err(TopologyError::WouldCycle { child: 2, parent: 4 })
        );
        // Self-parenting is the degenerate cycle.
        assert!(reg.associate(2, 2, 102, 2).is_err());
        assert!(reg.audit().is_ok());
    }

    #[test]
    fn detach_orphans_subtree_hops() {
        let mut reg = registry();
        reg.associate(2, 0, 102, 2).unwrap();
        reg.associate(3, 2, 103, 3).unwrap();
        reg.detach(2).unwrap();
        assert!(!reg.is_associated(2));
        assert_eq!(reg.hop_count(2), NO_HOP);
        assert_eq!(reg.hop_count(3), NO_HOP);
        assert_eq!(reg.detach(2), Err(TopologyError::NotAssociated(2)));
        assert!(reg.audit().is_ok());
        // Rejoining restores the chain.
        reg.associate(2, 1, 102, 2).unwrap();
        assert_eq!(reg.hop_count(3), 2);
    }

    #[test]
    fn associated_fraction_counts_nodes_only() {
        let mut reg = registry();
        assert_eq!(reg.associated_fraction(), 0.0);
        reg.associate(2, 0, 102, 2).unwrap();
        assert!((reg.associated_fraction() - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn churn_keeps_forest_invariants() {
        // Randomized associate/reselect/detach churn; the forest stays
        // acyclic with consistent hops after every event.
        let n = 40u32;
        let mut reg = TopologyRegistry::new(n as usize, [0, 1, 2]);
        let mut state = 0x5EEDu64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as u32
        };
        for _ in 0..1000 {
            let child = 3 + next() % (n - 3);
            match next() % 4 {
                0..=2 => {
                    let parent = next() % n;
                    if parent != child && !reg.is_descendant(parent, child) {
                        reg.associate(child, parent, 1000 + child, child as u16).unwrap();
                    } else if parent != child {
                        assert!(reg.associate(child, parent, 1000 + child, child as u16).is_err());
                    }
                }
                _ => {
                    let _ = reg.detach(child);
                }
            }
            if let Err(e) = reg.audit() {
                panic!("audit failed after churn: {e}");
            }
        }
    }

    #[test]
    fn short_id_redraw_avoids_neighbours() {
        let taken = vec![7, 8];
        let mut seq = vec![9u16, 8, 7].into_iter();
        let id = draw_short_id(&taken, || seq.next().unwrap());
        assert_eq!(id, 9);
    }
}
