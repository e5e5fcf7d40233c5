//! Full-system simulation: devices, tree formation, channel access, HARQ
//! delivery and measurement, driven by one discrete-event loop.
//!
//! Design notes:
//! - Transmissions all start on sub-slot boundaries. Listen-before-talk
//!   senses the first two symbols of a sub-slot; backoff counts idle
//!   permitted sub-slots using optimistic wake-ups plus a recount against
//!   the medium history, so saturation never floods the event queue.
//! - Reception is resolved when a transmission ends: half-duplex deafness,
//!   then a sensitivity check, then one error draw from the mean-SINR error
//!   curve over the overlap-partitioned span.
//! - Messages are held by exactly one custodian device at a time. A decoded
//!   duplicate (lost acknowledgement) is re-acknowledged, never re-queued,
//!   so generated == delivered + lost holds exactly at drain.

use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::engine::{mean_linear_sinr, named_stream, EventQueue, Medium, TxId, TxRecord};
use crate::mac::{
    feedback_deadline, AllocationGrid, HarqFeedback, HarqOutcome, HarqProcess, LbtState,
    RachConfig,
};
use crate::numerology::{
    channel_bandwidth_hz, lookup_mcs, secs_to_ticks, ticks_to_ms, ticks_to_secs,
    transport_block_bits_mixed, TimeBase, Ticks, TICKS_PER_FRAME, TICKS_PER_SLOT,
};
use crate::propagation::{
    dbm_to_mw, noise_floor_dbm, sensitivity_dbm, Endpoint, LinkSampler,
};
use crate::scenario::{
    deployment_area_km2, hex_site_centers, place_nodes, EnergyLedger, Placement, WindowedCounts,
};
use crate::sim::params::SimParams;
use crate::sim::report::{LossBreakdown, RunSummary};
use crate::topology::{
    draw_short_id, is_better_parent, select_parent, Candidate, TopologyRegistry, NO_HOP,
};

const BROADCAST: u32 = u32::MAX;
const NO_MSG: u64 = u64::MAX;
/// Consecutive missed cluster beacons that trigger reselection.
const BEACON_MISS_LIMIT: u8 = 3;
/// Reselection hysteresis: a new parent must be this much stronger.
const RESELECT_HYSTERESIS_DB: f64 = 6.0;
/// Portable devices scan for foreign beacons at this duty; a device with an
/// empty candidate list scans continuously.
const SCAN_DUTY: f64 = 0.25;
/// Association response window, in frames.
const ASSOC_RESPONSE_FRAMES: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Purpose {
    Data,
    Beacon,
    AssocReq,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum MacState {
    Idle,
    LbtInit { purpose: Purpose, boundary: Ticks },
    LbtCount { purpose: Purpose, from: Ticks },
    TxPending { purpose: Purpose, start: Ticks },
    OnAir { purpose: Purpose },
    WaitAck { msg: u64, since: Ticks },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum NodeState {
    Sink,
    Unassoc,
    Associating { target: u32, since: Ticks, waiting: bool },
    Assoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TxKind {
    Beacon,
    Data,
    Ack,
    AssocReq,
    AssocResp,
}

#[derive(Debug, Clone, Copy)]
struct TxCtx {
    kind: TxKind,
    sender: u32,
    dest: u32,
    /// Message id for data/acks; grant id for association responses.
    msg: u64,
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    Arrival { node: u32 },
    BeaconDue { dev: u32 },
    LbtSense { dev: u32, epoch: u64 },
    LbtRecount { dev: u32, epoch: u64 },
    TxStart { dev: u32 },
    TxEnd { tx: TxId },
    SendAck { from: u32, to: u32, msg: u64 },
    SendResp { from: u32, to: u32, grant: u64 },
    AckTimeout { dev: u32, epoch: u64 },
    AssocTimeout { node: u32, epoch: u64 },
    AssocRetry { node: u32 },
    Watchdog { node: u32, epoch: u64 },
    Gate,
    Snapshot,
    Audit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FailCause {
    Sensitivity,
    Channel,
    HalfDuplex,
}

struct Msg {
    gen: Ticks,
    holder: u32,
    hops: u16,
    done: bool,
    last_fail: FailCause,
}

enum RxOutcome {
    Deaf,
    BelowSensitivity,
    Failed,
    Ok,
}

struct Dev {
    ep: Endpoint,
    site: u32,
    carrier: u8,
    short_id: u16,
    ft: bool,
    beacon_scheduled: bool,
    retry_pending: bool,
    state: NodeState,
    mac: MacState,
    lbt: LbtState,
    queue: VecDeque<u64>,
    harq: HarqProcess,
    head_started: bool,
    cands: Vec<Candidate>,
    parent_rssi: f64,
    miss: u8,
    assoc_attempts: u32,
    ep_lbt: u64,
    ep_ack: u64,
    ep_assoc: u64,
    ep_wd: u64,
    /// Recent and planned own transmissions (half-duplex bookkeeping).
    radio: Vec<(Ticks, Ticks)>,
}

/// One mesh run. Construct with [`Simulation::new`], execute with
/// [`Simulation::run`].
pub struct Simulation {
    p: SimParams,
    tb: TimeBase,
    rach: RachConfig,
    links: LinkSampler,
    devs: Vec<Dev>,
    reg: TopologyRegistry,
    med: Medium,
    q: EventQueue<Ev>,
    in_flight: HashMap<TxId, TxCtx>,
    grids: HashMap<u32, AllocationGrid>,
    msgs: Vec<Msg>,
    counts: WindowedCounts,
    latencies_ms: Vec<f64>,
    loss: LossBreakdown,
    energy: EnergyLedger,
    energy_base: Option<EnergyLedger>,
    interested: Vec<Vec<u32>>,
    interested_pos: Vec<u32>,
    traffic_rng: ChaCha8Rng,
    decode_rng: ChaCha8Rng,
    backoff_rng: ChaCha8Rng,
    misc_rng: ChaCha8Rng,
    arrival_gap: Exp<f64>,
    noise_mw: f64,
    sens_dbm: f64,
    min_quality_dbm: f64,
    payload_bits: u64,
    subslot: Ticks,
    sense: Ticks,
    period: Ticks,
    window: Ticks,
    gen_end: Ticks,
    hard_end: Ticks,
    meas_tick: Option<Ticks>,
    outstanding: u64,
    delivered_bits: u64,
    data_tx_count: u64,
    beacon_tx_count: u64,
    stop: bool,
}

impl Simulation {
    pub fn new(p: SimParams) -> Self {
        assert!(p.n_carriers >= 1, "at least one carrier");
        assert!(p.payload_subslots >= 1);
        let tb = TimeBase::default();
        let bw = channel_bandwidth_hz(p.mu, p.beta).expect("valid numerology") as f64;
        let noise_dbm = noise_floor_dbm(bw, p.noise_figure_db);
        let sens_dbm = sensitivity_dbm(noise_dbm, &p.per_curve);
        let mcs = lookup_mcs("qpsk-3/4").expect("baseline modulation");
        let payload_bits = transport_block_bits_mixed(mcs, &tb, 0, p.payload_subslots);

        let centers = hex_site_centers(p.n_sites, p.isd_m);
        let mut placement_rng = named_stream(p.seed, "placement", 0);
        let specs = place_nodes(
            &centers,
            p.isd_m,
            p.placement,
            p.n_nodes,
            p.indoor_fraction,
            p.sink_height_m,
            p.node_height_m,
            p.n_carriers,
            &mut placement_rng,
        );
        let n = specs.len();
        let sinks: Vec<u32> =
            (0..n as u32).filter(|&i| specs[i as usize].endpoint.is_sink).collect();
        let reg = TopologyRegistry::new(n, sinks.iter().copied());

        let devs: Vec<Dev> = specs
            .iter()
            .map(|s| Dev {
                ep: s.endpoint,
                site: s.site as u32,
                carrier: s.carrier,
                short_id: 0,
                ft: s.endpoint.is_sink,
                beacon_scheduled: false,
                retry_pending: false,
                state: if s.endpoint.is_sink { NodeState::Sink } else { NodeState::Unassoc },
                mac: MacState::Idle,
                lbt: LbtState::default(),
                queue: VecDeque::new(),
                harq: HarqProcess::new(p.harq_max_retransmissions),
                head_started: false,
                cands: Vec::new(),
                parent_rssi: f64::NEG_INFINITY,
                miss: 0,
                assoc_attempts: 0,
                ep_lbt: 0,
                ep_ack: 0,
                ep_assoc: 0,
                ep_wd: 0,
                radio: Vec::new(),
            })
            .collect();

        let rate_per_sec = p.msgs_per_node_per_hour / 3600.0;
        let arrival_gap = Exp::new(rate_per_sec.max(1e-300)).expect("positive rate");
        let gen_end = secs_to_ticks(p.duration_s);
        let hard_end = gen_end + secs_to_ticks(p.drain_s);
        let window = secs_to_ticks(p.window_s).max(1);
        let energy = EnergyLedger::new(n, p.energy);
        let n_sites = centers.len();

        Simulation {
            tb,
            rach: RachConfig::all(&TimeBase::default()),
            links: LinkSampler::new(p.seed, p.fc_ghz),
            reg,
            med: Medium::new(p.n_carriers as usize, secs_to_ticks(1.0)),
            q: EventQueue::new(),
            in_flight: HashMap::new(),
            grids: HashMap::new(),
            msgs: Vec::new(),
            counts: WindowedCounts::new(window),
            latencies_ms: Vec::new(),
            loss: LossBreakdown::default(),
            energy,
            energy_base: None,
            interested: vec![Vec::new(); n_sites],
            interested_pos: vec![u32::MAX; n],
            traffic_rng: named_stream(p.seed, "traffic", 0),
            decode_rng: named_stream(p.seed, "decode", 0),
            backoff_rng: named_stream(p.seed, "backoff", 0),
            misc_rng: named_stream(p.seed, "misc", 0),
            arrival_gap,
            noise_mw: dbm_to_mw(noise_dbm),
            sens_dbm,
            min_quality_dbm: sens_dbm + p.rssi_bias_db,
            payload_bits,
            subslot: tb.ticks_per_subslot(),
            sense: p.lbt.sense_ticks(),
            period: secs_to_ticks(p.beacon_period_s).max(TICKS_PER_FRAME),
            window,
            gen_end,
            hard_end,
            meas_tick: None,
            outstanding: 0,
            delivered_bits: 0,
            data_tx_count: 0,
            beacon_tx_count: 0,
            stop: false,
            devs,
            p,
        }
    }

    // ------------------------------------------------------------------
    // Small helpers
    // ------------------------------------------------------------------

    fn now(&self) -> Ticks {
        self.q.now()
    }

    fn is_measured(&self, gen: Ticks) -> bool {
        self.meas_tick.map_or(false, |t| gen >= t)
    }

    fn node_ids(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.devs.len() as u32).filter(|&i| !self.devs[i as usize].ep.is_sink)
    }

    fn tx_power_dbm(&self, dev: u32) -> f64 {
        if self.devs[dev as usize].ep.is_sink {
            self.p.sink_power_dbm
        } else {
            self.p.node_power_dbm
        }
    }

    fn radio_busy(&self, dev: u32, start: Ticks, end: Ticks) -> bool {
        self.devs[dev as usize].radio.iter().any(|&(s, e)| s < end && e > start)
    }

    fn reserve_radio(&mut self, dev: u32, start: Ticks, end: Ticks) {
        let now = self.now();
        let d = &mut self.devs[dev as usize];
        d.radio.retain(|&(_, e)| e + 2 * TICKS_PER_FRAME >= now);
        d.radio.push((start, end));
    }

    fn set_interested(&mut self, dev: u32, want: bool) {
        if self.devs[dev as usize].ep.is_sink {
            return;
        }
        let site = self.devs[dev as usize].site as usize;
        let pos = self.interested_pos[dev as usize];
        if want && pos == u32::MAX {
            self.interested_pos[dev as usize] = self.interested[site].len() as u32;
            self.interested[site].push(dev);
        } else if !want && pos != u32::MAX {
            let list = &mut self.interested[site];
            let last = *list.last().expect("non-empty by membership");
            list.swap_remove(pos as usize);
            if last != dev {
                self.interested_pos[last as usize] = pos;
            }
            self.interested_pos[dev as usize] = u32::MAX;
        }
    }

    /// Sub-slot boundary grid for a purpose: random-access requests use the
    /// permitted bitmap, everything else the plain grid.
    fn next_boundary(&self, purpose: Purpose, t: Ticks) -> Ticks {
        match purpose {
            Purpose::AssocReq => {
                self.rach.next_permitted(&self.tb, t).expect("permitted mask is non-empty")
            }
            _ => self.tb.next_subslot_boundary(t),
        }
    }

    /// Position of the k-th permitted boundary at or after `from` (k >= 1).
    fn kth_boundary(&self, purpose: Purpose, from: Ticks, k: u32) -> Ticks {
        let mut b = self.next_boundary(purpose, from);
        for _ in 1..k {
            b = match purpose {
                Purpose::AssocReq => {
                    self.rach.next_permitted_after(&self.tb, b).expect("non-empty mask")
                }
                _ => b + self.subslot,
            };
        }
        b
    }

    fn lbt_carrier(&self, dev: u32) -> u8 {
        let d = &self.devs[dev as usize];
        match d.state {
            NodeState::Associating { target, .. } if matches!(d.mac,
                MacState::LbtInit { purpose: Purpose::AssocReq, .. }
                | MacState::LbtCount { purpose: Purpose::AssocReq, .. }
                | MacState::TxPending { purpose: Purpose::AssocReq, .. }) =>
            {
                self.devs[target as usize].carrier
            }
            _ => d.carrier,
        }
    }

    /// Carrier-sense verdict for the sub-slot starting at `b`.
    fn subslot_idle(&self, dev: u32, carrier: u8, b: Ticks) -> bool {
        if self.radio_busy(dev, b, b + self.sense) {
            return false;
        }
        let devs = &self.devs;
        let links = &self.links;
        let me = &devs[dev as usize].ep;
        let peak = self.med.peak_power_dbm(carrier, b, b + self.sense, |r: &TxRecord| {
            if r.sender == dev {
                0.0
            } else {
                dbm_to_mw(links.rx_power_dbm(
                    r.power_dbm,
                    r.sender,
                    &devs[r.sender as usize].ep,
                    dev,
                    me,
                ))
            }
        });
        peak < self.p.lbt.busy_threshold_dbm
    }

    // ------------------------------------------------------------------
    // MAC pipeline
    // ------------------------------------------------------------------

    /// Start channel access if the device is idle and has something to send.
    fn try_start_mac(&mut self, dev: u32) {
        let d = &self.devs[dev as usize];
        if d.mac != MacState::Idle {
            return;
        }
        let purpose = match d.state {
            NodeState::Associating { waiting: false, .. } => Purpose::AssocReq,
            NodeState::Assoc | NodeState::Sink if !d.queue.is_empty() => Purpose::Data,
            _ => return,
        };
        if purpose == Purpose::Data && self.devs[dev as usize].ep.is_sink {
            return;
        }
        if purpose == Purpose::Data && !self.devs[dev as usize].head_started {
            let d = &mut self.devs[dev as usize];
            d.harq = HarqProcess::new(self.p.harq_max_retransmissions);
            d.head_started = true;
        }
        self.begin_lbt(dev, purpose);
    }

    fn begin_lbt(&mut self, dev: u32, purpose: Purpose) {
        let b = self.next_boundary(purpose, self.now());
        self.devs[dev as usize].mac = MacState::LbtInit { purpose, boundary: b };
        self.devs[dev as usize].ep_lbt += 1;
        let epoch = self.devs[dev as usize].ep_lbt;
        self.q.schedule(b + self.sense, Ev::LbtSense { dev, epoch });
    }

    fn on_lbt_sense(&mut self, dev: u32, epoch: u64) {
        if self.devs[dev as usize].ep_lbt != epoch {
            return;
        }
        let (purpose, boundary) = match self.devs[dev as usize].mac {
            MacState::LbtInit { purpose, boundary } => (purpose, boundary),
            _ => return,
        };
        let carrier = self.lbt_carrier(dev);
        self.energy.charge_rx(dev, self.sense);
        if self.subslot_idle(dev, carrier, boundary) {
            self.schedule_tx(dev, purpose);
            return;
        }
        let lbt_params = self.p.lbt;
        let draw = {
            let rng = &mut self.backoff_rng;
            self.devs[dev as usize].lbt.on_busy(&lbt_params, |cw| rng.gen_range(0..cw))
        };
        let from = self.next_boundary(purpose, boundary + self.subslot);
        if draw == 0 {
            self.devs[dev as usize].lbt.count_idle(0);
            self.schedule_tx_at(dev, purpose, from);
            return;
        }
        self.devs[dev as usize].mac = MacState::LbtCount { purpose, from };
        let wake = self.kth_boundary(purpose, from, draw) + self.subslot;
        self.devs[dev as usize].ep_lbt += 1;
        let epoch = self.devs[dev as usize].ep_lbt;
        self.q.schedule(wake, Ev::LbtRecount { dev, epoch });
    }

    fn on_lbt_recount(&mut self, dev: u32, epoch: u64) {
        if self.devs[dev as usize].ep_lbt != epoch {
            return;
        }
        let (purpose, from) = match self.devs[dev as usize].mac {
            MacState::LbtCount { purpose, from } => (purpose, from),
            _ => return,
        };
        let now = self.now();
        let carrier = self.lbt_carrier(dev);
        // Count idle permitted sub-slots fully elapsed since `from`.
        let mut idle = 0u32;
        let mut scanned = 0u64;
        let mut b = self.next_boundary(purpose, from);
        while b + self.subslot <= now {
            if self.subslot_idle(dev, carrier, b) {
                idle += 1;
            }
            scanned += 1;
            b = match purpose {
                Purpose::AssocReq => {
                    self.rach.next_permitted_after(&self.tb, b).expect("non-empty mask")
                }
                _ => b + self.subslot,
            };
        }
        self.energy.charge_rx(dev, scanned * self.sense);
        if self.devs[dev as usize].lbt.count_idle(idle) {
            self.schedule_tx_at(dev, purpose, now);
            return;
        }
        let deficit = self.devs[dev as usize]
            .lbt
            .pending_backoff
            .expect("count_idle returned false, so a balance remains");
        self.devs[dev as usize].mac = MacState::LbtCount { purpose, from: now };
        let wake = self.kth_boundary(purpose, now, deficit) + self.subslot;
        self.devs[dev as usize].ep_lbt += 1;
        let epoch = self.devs[dev as usize].ep_lbt;
        self.q.schedule(wake, Ev::LbtRecount { dev, epoch });
    }

    fn tx_duration(&self, purpose: Purpose) -> Ticks {
        match purpose {
            Purpose::Data => self.p.payload_subslots * self.subslot,
            Purpose::Beacon | Purpose::AssocReq => self.subslot,
        }
    }

    /// Channel is clear: transmit at the next boundary the radio is free.
    fn schedule_tx(&mut self, dev: u32, purpose: Purpose) {
        let at = self.next_boundary(purpose, self.now());
        self.schedule_tx_at(dev, purpose, at);
    }

    fn schedule_tx_at(&mut self, dev: u32, purpose: Purpose, at: Ticks) {
        let dur = self.tx_duration(purpose);
        let mut start = self.next_boundary(purpose, at);
        while self.radio_busy(dev, start, start + dur) {
            start = self.next_boundary(purpose, start + self.subslot);
        }
        self.devs[dev as usize].mac = MacState::TxPending { purpose, start };
        self.reserve_radio(dev, start, start + dur);
        self.q.schedule(start, Ev::TxStart { dev });
    }

    fn on_tx_start(&mut self, dev: u32) {
        let purpose = match self.devs[dev as usize].mac {
            MacState::TxPending { purpose, start } if start == self.now() => purpose,
            _ => return,
        };
        let now = self.now();
        let dur = self.tx_duration(purpose);
        let (kind, dest, msg) = match purpose {
            Purpose::Beacon => {
                if !self.devs[dev as usize].ft {
                    self.devs[dev as usize].mac = MacState::Idle;
                    self.try_start_mac(dev);
                    return;
                }
                (TxKind::Beacon, BROADCAST, NO_MSG)
            }
            Purpose::AssocReq => match self.devs[dev as usize].state {
                NodeState::Associating { target, waiting: false, .. } => {
                    (TxKind::AssocReq, target, NO_MSG)
                }
                _ => {
                    self.devs[dev as usize].mac = MacState::Idle;
                    return;
                }
            },
            Purpose::Data => {
                let head = self.devs[dev as usize].queue.front().copied();
                let parent = self.reg.parent_of(dev);
                match (head, parent) {
                    (Some(m), Some(p)) => (TxKind::Data, p, m),
                    _ => {
                        // Route vanished between clearance and start.
                        self.devs[dev as usize].mac = MacState::Idle;
                        self.try_start_mac(dev);
                        return;
                    }
                }
            }
        };
        let carrier = match kind {
            TxKind::AssocReq => self.devs[dest as usize].carrier,
            _ => self.devs[dev as usize].carrier,
        };
        let power = self.tx_power_dbm(dev);
        let tx = self.med.begin(carrier, dev, now, now + dur, power);
        self.in_flight.insert(tx, TxCtx { kind, sender: dev, dest, msg });
        self.energy.charge_tx(dev, power, dur);
        self.devs[dev as usize].mac = MacState::OnAir { purpose };
        match kind {
            TxKind::Data => {
                self.devs[dev as usize].harq.on_transmit();
                self.data_tx_count += 1;
            }
            TxKind::Beacon => self.beacon_tx_count += 1,
            _ => {}
        }
        self.q.schedule(now + dur, Ev::TxEnd { tx });
    }

    // ------------------------------------------------------------------
    // Reception
    // ------------------------------------------------------------------

    /// Resolve one receiver's attempt to decode `rec`; charges listening
    /// energy for genuine decode attempts.
    fn resolve_reception(&mut self, rec: &TxRecord, receiver: u32) -> RxOutcome {
        if self.radio_busy(receiver, rec.start, rec.end) {
            return RxOutcome::Deaf;
        }
        let rcv_ep = self.devs[receiver as usize].ep;
        let rx_dbm = self.links.rx_power_dbm(
            rec.power_dbm,
            rec.sender,
            &self.devs[rec.sender as usize].ep,
            receiver,
            &rcv_ep,
        );
        if rx_dbm < self.sens_dbm {
            return RxOutcome::BelowSensitivity;
        }
        self.energy.charge_rx(receiver, rec.end - rec.start);
        if self.decode_with_desired(rec, receiver, rx_dbm) {
            RxOutcome::Ok
        } else {
            RxOutcome::Failed
        }
    }

    /// One decode draw against the mean-SINR error curve, given the desired
    /// received power.
    fn decode_with_desired(&mut self, rec: &TxRecord, receiver: u32, rx_dbm: f64) -> bool {
        let per = match self.p.per_override {
            Some(v) => v,
            None => {
                let rcv_ep = self.devs[receiver as usize].ep;
                let devs = &self.devs;
                let links = &self.links;
                let segs = self.med.interference_segments(
                    rec.carrier,
                    rec.id,
                    rec.start,
                    rec.end,
                    |r: &TxRecord| {
                        if r.sender == receiver {
                            0.0
                        } else {
                            dbm_to_mw(links.rx_power_dbm(
                                r.power_dbm,
                                r.sender,
                                &devs[r.sender as usize].ep,
                                receiver,
                                &rcv_ep,
                            ))
                        }
                    },
                );
                let sinr = mean_linear_sinr(
                    dbm_to_mw(rx_dbm),
                    rec.start,
                    rec.end,
                    &segs,
                    self.noise_mw,
                );
                self.p.per_curve.per(10.0 * sinr.log10())
            }
        };
        self.decode_rng.gen::<f64>() >= per
    }

    fn rssi_from(&self, sender: u32, receiver: u32) -> f64 {
        self.links.rx_power_dbm(
            self.tx_power_dbm(sender),
            sender,
            &self.devs[sender as usize].ep,
            receiver,
            &self.devs[receiver as usize].ep,
        )
    }

    // ------------------------------------------------------------------
    // Transmission completion
    // ------------------------------------------------------------------

    fn on_tx_end(&mut self, tx: TxId) {
        let ctx = self.in_flight.remove(&tx).expect("every transmission has context");
        let rec = match ctx.kind {
            TxKind::AssocReq => *self
                .med
                .find(self.devs[ctx.dest as usize].carrier, tx)
                .expect("record retained"),
            _ => *self
                .med
                .find(self.devs[ctx.sender as usize].carrier, tx)
                .expect("record retained"),
        };
        match ctx.kind {
            TxKind::Data => self.end_data(&rec, &ctx),
            TxKind::Ack => self.end_ack(&rec, &ctx),
            TxKind::Beacon => self.end_beacon(&rec, &ctx),
            TxKind::AssocReq => self.end_assoc_req(&rec, &ctx),
            TxKind::AssocResp => self.end_assoc_resp(&rec, &ctx),
        }
    }

    fn end_data(&mut self, rec: &TxRecord, ctx: &TxCtx) {
        let s = ctx.sender;
        // Sender turns around to listen for the acknowledgement.
        if matches!(self.devs[s as usize].mac, MacState::OnAir { purpose: Purpose::Data }) {
            self.devs[s as usize].mac = MacState::WaitAck { msg: ctx.msg, since: self.now() };
            self.devs[s as usize].ep_ack += 1;
            let epoch = self.devs[s as usize].ep_ack;
            let deadline = feedback_deadline(&self.tb, self.now(), self.p.ack_timeout_slots);
            self.q.schedule(deadline, Ev::AckTimeout { dev: s, epoch });
        }
        match self.resolve_reception(rec, ctx.dest) {
            RxOutcome::Ok => self.deliver_data(ctx.dest, ctx.msg, s),
            RxOutcome::Deaf => self.msgs[ctx.msg as usize].last_fail = FailCause::HalfDuplex,
            RxOutcome::BelowSensitivity => {
                self.msgs[ctx.msg as usize].last_fail = FailCause::Sensitivity
            }
            RxOutcome::Failed => self.msgs[ctx.msg as usize].last_fail = FailCause::Channel,
        }
    }

    /// Receiver decoded a data packet: take custody (or re-acknowledge a
    /// duplicate) and acknowledge.
    fn deliver_data(&mut self, r: u32, m: u64, s: u32) {
        let now = self.now();
        let already_held = self.msgs[m as usize].holder == r || self.msgs[m as usize].done;
        if !already_held {
            self.msgs[m as usize].holder = r;
            self.msgs[m as usize].hops += 1;
            if self.devs[r as usize].ep.is_sink {
                self.finish_delivered(m);
            } else {
                self.devs[r as usize].queue.push_back(m);
            }
        }
        // Acknowledge on the same carrier, next slot boundary, no LBT.
        let ack_start = self.tb.next_slot_boundary(now);
        let ack_end = ack_start + TICKS_PER_SLOT;
        if !self.radio_busy(r, ack_start, ack_end) {
            self.reserve_radio(r, ack_start, ack_end);
            self.q.schedule(ack_start, Ev::SendAck { from: r, to: s, msg: m });
        }
        if !already_held && !self.devs[r as usize].ep.is_sink {
            self.try_start_mac(r);
        }
    }

    fn on_send_ack(&mut self, from: u32, to: u32, msg: u64) {
        let now = self.now();
        let carrier = self.devs[from as usize].carrier;
        let power = self.tx_power_dbm(from);
        let tx = self.med.begin(carrier, from, now, now + TICKS_PER_SLOT, power);
        self.in_flight.insert(tx, TxCtx { kind: TxKind::Ack, sender: from, dest: to, msg });
        self.energy.charge_tx(from, power, TICKS_PER_SLOT);
        self.q.schedule(now + TICKS_PER_SLOT, Ev::TxEnd { tx });
    }

    fn end_ack(&mut self, rec: &TxRecord, ctx: &TxCtx) {
        let s = ctx.dest; // original data sender
        match self.devs[s as usize].mac {
            MacState::WaitAck { msg, since } if msg == ctx.msg => {
                if matches!(self.resolve_reception(rec, s), RxOutcome::Ok) {
                    // Listening window closes now.
                    self.energy.charge_rx(s, self.now().saturating_sub(since + (rec.end - rec.start)));
                    self.devs[s as usize].ep_ack += 1;
                    self.harq_success(s, msg);
                }
            }
            _ => {}
        }
    }

    fn harq_success(&mut self, s: u32, m: u64) {
        let d = &mut self.devs[s as usize];
        debug_assert_eq!(d.queue.front().copied(), Some(m));
        d.queue.pop_front();
        d.head_started = false;
        d.lbt.reset_stage();
        d.mac = MacState::Idle;
        let _ = d.harq.step(HarqFeedback::Ack);
        self.try_start_mac(s);
    }

    fn on_ack_timeout(&mut self, dev: u32, epoch: u64) {
        if self.devs[dev as usize].ep_ack != epoch {
            return;
        }
        let (m, since) = match self.devs[dev as usize].mac {
            MacState::WaitAck { msg, since } => (msg, since),
            _ => return,
        };
        self.energy.charge_rx(dev, self.now() - since);
        self.devs[dev as usize].mac = MacState::Idle;
        match self.devs[dev as usize].harq.step(HarqFeedback::Timeout) {
            HarqOutcome::Retransmit => self.try_start_mac(dev),
            HarqOutcome::Failed | HarqOutcome::Delivered => {
                let d = &mut self.devs[dev as usize];
                debug_assert_eq!(d.queue.front().copied(), Some(m));
                d.queue.pop_front();
                d.head_started = false;
                if self.msgs[m as usize].holder == dev && !self.msgs[m as usize].done {
                    self.finish_lost_in_flight(m);
                }
                self.try_start_mac(dev);
            }
        }
    }

    // ------------------------------------------------------------------
    // Beacons, discovery and reselection
    // ------------------------------------------------------------------

    fn on_beacon_due(&mut self, dev: u32) {
        if !self.devs[dev as usize].ft {
            self.devs[dev as usize].beacon_scheduled = false;
            return;
        }
        if self.now() + self.period <= self.hard_end {
            self.q.schedule(self.now() + self.period, Ev::BeaconDue { dev });
        } else {
            self.devs[dev as usize].beacon_scheduled = false;
        }
        if self.devs[dev as usize].mac == MacState::Idle {
            self.begin_lbt(dev, Purpose::Beacon);
        }
    }

    fn end_beacon(&mut self, rec: &TxRecord, ctx: &TxCtx) {
        let f = ctx.sender;
        if matches!(self.devs[f as usize].mac, MacState::OnAir { purpose: Purpose::Beacon }) {
            self.devs[f as usize].mac = MacState::Idle;
            self.try_start_mac(f);
        }
        let hop = self.reg.hop_count(f);
        // Children always track their parent's beacon.
        let children: Vec<u32> = self.reg.children_of(f).to_vec();
        for l in children {
            let decoded = matches!(self.resolve_reception(rec, l), RxOutcome::Ok);
            self.parent_beacon_feedback(l, f, hop, decoded);
        }
        // Interested same-site nodes (unassociated, associating or degraded)
        // scan for candidates at a limited duty.
        let site = self.devs[f as usize].site as usize;
        let scanners: Vec<u32> = self.interested[site]
            .iter()
            .copied()
            .filter(|&l| l != f && self.reg.parent_of(l) != Some(f))
            .collect();
        for l in scanners {
            let eager = self.devs[l as usize].cands.is_empty();
            if !eager && self.decode_rng.gen::<f64>() >= SCAN_DUTY {
                continue;
            }
            if self.radio_busy(l, rec.start, rec.end) {
                continue;
            }
            let rx_dbm = self.rssi_from(f, l);
            if rx_dbm < self.min_quality_dbm {
                continue;
            }
            self.energy.charge_rx(l, rec.end - rec.start);
            if self.decode_with_desired(rec, l, rx_dbm) {
                self.candidate_beacon(l, f, hop, rx_dbm);
            }
        }
    }

    /// Child heard (or failed to hear) its own parent's beacon.
    fn parent_beacon_feedback(&mut self, l: u32, f: u32, hop: u16, decoded: bool) {
        if decoded && hop != NO_HOP {
            self.devs[l as usize].miss = 0;
            self.devs[l as usize].parent_rssi = self.rssi_from(f, l);
            self.devs[l as usize].ep_wd += 1;
            let epoch = self.devs[l as usize].ep_wd;
            let deadline = self.now() + 3 * self.period + self.period / 2;
            self.q.schedule(deadline, Ev::Watchdog { node: l, epoch });
            if matches!(self.devs[l as usize].state, NodeState::Assoc) {
                self.set_interested(l, false);
            }
        } else {
            self.devs[l as usize].miss += 1;
            self.set_interested(l, true);
            if self.devs[l as usize].miss >= BEACON_MISS_LIMIT {
                self.parent_loss(l);
            }
        }
    }

    /// A non-parent beacon decoded by an interested node.
    fn candidate_beacon(&mut self, l: u32, f: u32, hop: u16, rssi: f64) {
        if rssi < self.min_quality_dbm || hop == NO_HOP || hop >= self.p.max_hops {
            return;
        }
        let cand = Candidate {
            device: f,
            long_id: f,
            hop_count: hop,
            carrier: self.devs[f as usize].carrier,
            rssi_dbm: rssi,
        };
        let cands = &mut self.devs[l as usize].cands;
        if let Some(existing) = cands.iter_mut().find(|c| c.device == f) {
            *existing = cand;
        } else {
            cands.push(cand);
            if cands.len() > 6 {
                // Keep the strongest few by the selection order.
                cands.sort_by(|a, b| {
                    a.hop_count
                        .cmp(&b.hop_count)
                        .then(b.rssi_dbm.partial_cmp(&a.rssi_dbm).expect("finite"))
                });
                cands.truncate(6);
            }
        }
        match self.devs[l as usize].state {
            NodeState::Unassoc => {
                if !self.devs[l as usize].retry_pending {
                    self.devs[l as usize].retry_pending = true;
                    let jitter = self.misc_rng.gen_range(0..secs_to_ticks(1.0));
                    self.q.schedule(self.now() + jitter, Ev::AssocRetry { node: l });
                }
            }
            NodeState::Assoc if self.devs[l as usize].miss > 0 => {
                let cur_hop = self.reg.hop_count(l);
                let cur_rssi = self.devs[l as usize].parent_rssi;
                if is_better_parent(cur_hop, cur_rssi, &cand, RESELECT_HYSTERESIS_DB)
                    && !self.reg.is_descendant(f, l)
                {
                    self.parent_loss(l);
                    self.start_association(l);
                }
            }
            _ => {}
        }
    }

    fn parent_loss(&mut self, l: u32) {
        if let Some(p) = self.reg.parent_of(l) {
            self.devs[l as usize].cands.retain(|c| c.device != p);
            self.reg.detach(l).expect("was associated");
        }
        let d = &mut self.devs[l as usize];
        d.state = NodeState::Unassoc;
        d.miss = 0;
        d.parent_rssi = f64::NEG_INFINITY;
        d.ep_wd += 1;
        self.set_interested(l, true);
        if !self.devs[l as usize].retry_pending {
            self.devs[l as usize].retry_pending = true;
            let jitter = self.misc_rng.gen_range(0..secs_to_ticks(1.0));
            self.q.schedule(self.now() + jitter, Ev::AssocRetry { node: l });
        }
    }

    // ------------------------------------------------------------------
    // Association
    // ------------------------------------------------------------------

    fn on_assoc_retry(&mut self, node: u32) {
        self.devs[node as usize].retry_pending = false;
        if matches!(self.devs[node as usize].state, NodeState::Unassoc) {
            self.start_association(node);
        }
    }

    fn start_association(&mut self, node: u32) {
        let filtered: Vec<Candidate> = self.devs[node as usize]
            .cands
            .iter()
            .filter(|c| {
                c.rssi_dbm >= self.min_quality_dbm
                    && c.hop_count != NO_HOP
                    && c.hop_count < self.p.max_hops
                    && !self.reg.is_descendant(c.device, node)
            })
            .copied()
            .collect();
        let Some(best) = select_parent(&filtered) else {
            return; // wait for more beacons
        };
        self.devs[node as usize].state =
            NodeState::Associating { target: best.device, since: self.now(), waiting: false };
        self.try_start_mac(node);
    }

    fn end_assoc_req(&mut self, rec: &TxRecord, ctx: &TxCtx) {
        let u = ctx.sender;
        let p = ctx.dest;
        // Requester turns around and waits for the scheduled response.
        if matches!(self.devs[u as usize].mac, MacState::OnAir { purpose: Purpose::AssocReq }) {
            self.devs[u as usize].mac = MacState::Idle;
            if let NodeState::Associating { target, .. } = self.devs[u as usize].state {
                self.devs[u as usize].state =
                    NodeState::Associating { target, since: self.now(), waiting: true };
                self.devs[u as usize].ep_assoc += 1;
                let epoch = self.devs[u as usize].ep_assoc;
                let deadline = self.now() + ASSOC_RESPONSE_FRAMES * TICKS_PER_FRAME;
                self.q.schedule(deadline, Ev::AssocTimeout { node: u, epoch });
            }
        }
        // The target only grants while it routes to a sink with headroom.
        let hop = self.reg.hop_count(p);
        if !self.devs[p as usize].ft || hop == NO_HOP || hop >= self.p.max_hops {
            return;
        }
        if !matches!(self.resolve_reception(rec, p), RxOutcome::Ok) {
            return;
        }
        let tb = self.tb;
        let grid = self.grids.entry(p).or_insert_with(|| AllocationGrid::new(&tb));
        let Ok(grant) = grid.allocate(1) else {
            return;
        };
        let frame_base = self.now() - self.now() % TICKS_PER_FRAME;
        let mut t = frame_base + grant.start_subslot * self.subslot;
        while t < self.now() + self.subslot {
            t += TICKS_PER_FRAME;
        }
        if self.radio_busy(p, t, t + self.subslot) {
            self.grids.get_mut(&p).expect("just inserted").release(grant.id).expect("live grant");
            return;
        }
        self.reserve_radio(p, t, t + self.subslot);
        self.q.schedule(t, Ev::SendResp { from: p, to: u, grant: grant.id });
    }

    fn on_send_resp(&mut self, from: u32, to: u32, grant: u64) {
        let now = self.now();
        let carrier = self.devs[from as usize].carrier;
        let power = self.tx_power_dbm(from);
        let tx = self.med.begin(carrier, from, now, now + self.subslot, power);
        self.in_flight
            .insert(tx, TxCtx { kind: TxKind::AssocResp, sender: from, dest: to, msg: grant });
        self.energy.charge_tx(from, power, self.subslot);
        self.q.schedule(now + self.subslot, Ev::TxEnd { tx });
    }

    fn end_assoc_resp(&mut self, rec: &TxRecord, ctx: &TxCtx) {
        let p = ctx.sender;
        let u = ctx.dest;
        if let Some(grid) = self.grids.get_mut(&p) {
            let _ = grid.release(ctx.msg);
        }
        match self.devs[u as usize].state {
            NodeState::Associating { target, since, waiting: true } if target == p => {
                if matches!(self.resolve_reception(rec, u), RxOutcome::Ok) {
                    self.energy.charge_rx(u, self.now().saturating_sub(since + (rec.end - rec.start)));
                    self.devs[u as usize].ep_assoc += 1;
                    self.complete_association(u, p);
                }
            }
            _ => {}
        }
    }

    fn complete_association(&mut self, u: u32, p: u32) {
        let taken: Vec<u16> = self
            .reg
            .children_of(p)
            .iter()
            .map(|&c| self.devs[c as usize].short_id)
            .collect();
        let rng = &mut self.misc_rng;
        let short = draw_short_id(&taken, || rng.gen());
        match self.reg.associate(u, p, u, short) {
            Ok(_) => {}
            Err(_) => {
                // Joining under a descendant would loop; drop the candidate.
                self.devs[u as usize].cands.retain(|c| c.device != p);
                self.devs[u as usize].state = NodeState::Unassoc;
                self.start_association(u);
                return;
            }
        }
        let hop = self.reg.hop_count(u);
        let cand_rssi = self.rssi_from(p, u);
        let parent_carrier = self.devs[p as usize].carrier;
        let d = &mut self.devs[u as usize];
        d.short_id = short;
        d.state = NodeState::Assoc;
        d.carrier = parent_carrier;
        d.miss = 0;
        d.parent_rssi = cand_rssi;
        d.assoc_attempts = 0;
        d.ep_wd += 1;
        let epoch = self.devs[u as usize].ep_wd;
        let deadline = self.now() + 3 * self.period + self.period / 2;
        self.q.schedule(deadline, Ev::Watchdog { node: u, epoch });
        self.set_interested(u, false);
        // Relay promotion, bounded by the depth cap.
        let promote = hop < self.p.max_hops;
        self.devs[u as usize].ft = promote;
        if promote && !self.devs[u as usize].beacon_scheduled {
            self.devs[u as usize].beacon_scheduled = true;
            let jitter = self.misc_rng.gen_range(0..self.period);
            let at = self.now() + jitter;
            if at <= self.hard_end {
                self.q.schedule(at, Ev::BeaconDue { dev: u });
            }
        }
        self.try_start_mac(u);
    }

    fn on_assoc_timeout(&mut self, node: u32, epoch: u64) {
        if self.devs[node as usize].ep_assoc != epoch {
            return;
        }
        let since = match self.devs[node as usize].state {
            NodeState::Associating { since, waiting: true, .. } => since,
            _ => return,
        };
        self.energy.charge_rx(node, self.now() - since);
        let d = &mut self.devs[node as usize];
        d.state = NodeState::Unassoc;
        d.assoc_attempts += 1;
        let attempts = d.assoc_attempts;
        if !self.devs[node as usize].retry_pending {
            self.devs[node as usize].retry_pending = true;
            let base = secs_to_ticks(0.25) * (1u64 << attempts.min(5));
            let wait = self.misc_rng.gen_range(base..2 * base);
            self.q.schedule(self.now() + wait, Ev::AssocRetry { node });
        }
    }

    fn on_watchdog(&mut self, node: u32, epoch: u64) {
        if self.devs[node as usize].ep_wd != epoch {
            return;
        }
        if matches!(self.devs[node as usize].state, NodeState::Assoc) {
            self.parent_loss(node);
        }
    }

    // ------------------------------------------------------------------
    // Traffic and measurement
    // ------------------------------------------------------------------

    fn next_arrival_gap(&mut self) -> Ticks {
        let gap_s = self.arrival_gap.sample(&mut self.traffic_rng);
        (secs_to_ticks(gap_s)).max(1)
    }

    fn on_arrival(&mut self, node: u32) {
        let now = self.now();
        let id = self.msgs.len() as u64;
        self.msgs.push(Msg {
            gen: now,
            holder: node,
            hops: 0,
            done: false,
            last_fail: FailCause::Channel,
        });
        self.counts.record_generated(now);
        self.outstanding += 1;
        self.devs[node as usize].queue.push_back(id);
        let gap = self.next_arrival_gap();
        if now + gap <= self.gen_end {
            self.q.schedule(now + gap, Ev::Arrival { node });
        }
        self.try_start_mac(node);
    }

    fn finish_delivered(&mut self, m: u64) {
        let msg = &mut self.msgs[m as usize];
        msg.done = true;
        self.outstanding -= 1;
        let gen = msg.gen;
        self.counts.record_delivered(gen);
        if self.is_measured(gen) {
            self.latencies_ms.push(ticks_to_ms(self.now() - gen));
            self.delivered_bits += self.payload_bits;
        }
    }

    fn finish_lost_in_flight(&mut self, m: u64) {
        let cause = self.msgs[m as usize].last_fail;
        self.msgs[m as usize].done = true;
        self.outstanding -= 1;
        if self.is_measured(self.msgs[m as usize].gen) {
            match cause {
                FailCause::Sensitivity => self.loss.below_sensitivity += 1,
                FailCause::Channel => self.loss.channel_error += 1,
                FailCause::HalfDuplex => self.loss.half_duplex += 1,
            }
        }
    }

    fn on_gate(&mut self) {
        let now = self.now();
        if self.meas_tick.is_none() {
            let assoc_ok = self.reg.associated_fraction() >= self.p.warmup_assoc_fraction;
            let fallback =
                now >= (self.gen_end as f64 * self.p.max_warmup_fraction) as Ticks;
            if assoc_ok || fallback {
                let w0 = now / self.window + 1;
                let t0 = w0 * self.window;
                self.meas_tick = Some(t0);
                self.q.schedule(t0, Ev::Snapshot);
            }
        }
        if now >= self.gen_end && self.outstanding == 0 {
            self.stop = true;
            return;
        }
        let next = now + secs_to_ticks(1.0);
        if next <= self.hard_end {
            self.q.schedule(next, Ev::Gate);
        }
    }

    fn on_audit(&mut self) {
        if let Err(e) = self.reg.audit() {
            panic!("topology audit failed at t={}: {e}", self.now());
        }
        if let Err(e) = self.med.audit() {
            panic!("medium audit failed at t={}: {e}", self.now());
        }
        for (dev, grid) in &self.grids {
            assert!(grid.is_conflict_free(), "allocation overlap at device {dev}");
        }
        if let Some(every) = self.p.audit_every_s {
            let next = self.now() + secs_to_ticks(every);
            if next <= self.hard_end {
                self.q.schedule(next, Ev::Audit);
            }
        }
    }

    // ------------------------------------------------------------------
    // Run loop
    // ------------------------------------------------------------------

    pub fn run(mut self) -> RunSummary {
        let wall = Instant::now();
        // Sinks beacon from the start, staggered across one period.
        for s in 0..self.devs.len() as u32 {
            if self.devs[s as usize].ep.is_sink {
                self.devs[s as usize].beacon_scheduled = true;
                let at = self.misc_rng.gen_range(0..self.period);
                self.q.schedule(at, Ev::BeaconDue { dev: s });
            } else {
                self.set_interested(s, true);
                let gap = self.next_arrival_gap();
                if gap <= self.gen_end {
                    self.q.schedule(gap, Ev::Arrival { node: s });
                }
            }
        }
        self.q.schedule(secs_to_ticks(1.0), Ev::Gate);
        if self.p.warmup_assoc_fraction <= 0.0 {
            self.meas_tick = Some(0);
            self.energy_base = Some(self.energy.clone());
        }
        if let Some(every) = self.p.audit_every_s {
            self.q.schedule(secs_to_ticks(every), Ev::Audit);
        }

        while let Some((t, ev)) = self.q.pop() {
            if t > self.hard_end {
                break;
            }
            match ev {
                Ev::Arrival { node } => self.on_arrival(node),
                Ev::BeaconDue { dev } => self.on_beacon_due(dev),
                Ev::LbtSense { dev, epoch } => self.on_lbt_sense(dev, epoch),
                Ev::LbtRecount { dev, epoch } => self.on_lbt_recount(dev, epoch),
                Ev::TxStart { dev } => self.on_tx_start(dev),
                Ev::TxEnd { tx } => self.on_tx_end(tx),
                Ev::SendAck { from, to, msg } => self.on_send_ack(from, to, msg),
                Ev::SendResp { from, to, grant } => self.on_send_resp(from, to, grant),
                Ev::AckTimeout { dev, epoch } => self.on_ack_timeout(dev, epoch),
                Ev::AssocTimeout { node, epoch } => self.on_assoc_timeout(node, epoch),
                Ev::AssocRetry { node } => self.on_assoc_retry(node),
                Ev::Watchdog { node, epoch } => self.on_watchdog(node, epoch),
                Ev::Gate => self.on_gate(),
                Ev::Snapshot => {
                    self.energy_base = Some(self.energy.clone());
                }
                Ev::Audit => self.on_audit(),
            }
            if self.stop {
                break;
            }
        }
        let end_tick = self.now().min(self.hard_end);
        self.finalize(end_tick, wall.elapsed().as_secs_f64())
    }

    fn finalize(mut self, end_tick: Ticks, wall_seconds: f64) -> RunSummary {
        // Messages still pending when the drain budget expires are lost.
        for m in 0..self.msgs.len() as u64 {
            if !self.msgs[m as usize].done {
                let holder = self.msgs[m as usize].holder;
                let routed = self.reg.is_associated(holder);
                self.msgs[m as usize].done = true;
                self.outstanding -= 1;
                if self.is_measured(self.msgs[m as usize].gen) {
                    if routed {
                        self.loss.drained += 1;
                    } else {
                        self.loss.no_route += 1;
                    }
                }
            }
        }
        assert_eq!(self.outstanding, 0, "all messages reach a terminal state");

        let meas_tick = self.meas_tick.unwrap_or(end_tick);
        let w0 = (meas_tick / self.window) as usize;
        let generated = self.counts.generated_from(w0);
        let delivered = self.counts.delivered_from(w0);
        let lost = generated - delivered;
        assert_eq!(
            lost,
            self.loss.total(),
            "loss breakdown accounts for every undelivered message"
        );
        let plr = self.counts.plr_from(w0).unwrap_or(0.0);

        let mut lat = std::mem::take(&mut self.latencies_ms);
        lat.sort_by(|a, b| a.partial_cmp(b).expect("finite latencies"));
        let pct = |p: f64| -> f64 {
            crate::scenario::nearest_rank_percentile(&lat, p).unwrap_or(f64::NAN)
        };
        let latency_mean_ms = if lat.is_empty() {
            f64::NAN
        } else {
            lat.iter().sum::<f64>() / lat.len() as f64
        };

        let span = end_tick.saturating_sub(meas_tick);
        let nodes: Vec<u32> = self.node_ids().collect();
        let energy_total_j = match &self.energy_base {
            Some(base) => self.energy.total_j_since(base, nodes.iter().copied(), span),
            None => self.energy.total_j(nodes.iter().copied(), span),
        };
        let delivered_payload_mbit = self.delivered_bits as f64 / 1e6;
        let efficiency = EnergyLedger::efficiency_mbit_per_j(self.delivered_bits, energy_total_j);

        let hops: Vec<u16> = nodes
            .iter()
            .filter(|&&d| self.reg.is_associated(d))
            .map(|&d| self.reg.hop_count(d))
            .collect();
        let mean_hops = if hops.is_empty() {
            0.0
        } else {
            hops.iter().map(|&h| h as f64).sum::<f64>() / hops.len() as f64
        };
        let area_km2 = match self.p.placement {
            Placement::FullArea => deployment_area_km2(self.p.n_sites, self.p.isd_m),
            Placement::SiteDiscs { total_area_km2 } => total_area_km2,
        };

        if let Err(e) = self.reg.audit() {
            panic!("final topology audit failed: {e}");
        }

        RunSummary {
            seed: self.p.seed,
            n_sites: self.p.n_sites,
            n_nodes: self.p.n_nodes,
            n_carriers: self.p.n_carriers,
            density_per_km2: self.p.n_nodes as f64 / area_km2,
            rssi_bias_db: self.p.rssi_bias_db,
            duration_s: self.p.duration_s,
            meas_start_s: ticks_to_secs(meas_tick),
            generated,
            delivered,
            lost,
            loss: self.loss,
            plr,
            latency_mean_ms,
            latency_p50_ms: pct(50.0),
            latency_p99_ms: pct(99.0),
            energy_total_j,
            delivered_payload_mbit,
            efficiency_mbit_per_j: efficiency,
            associated_fraction: self.reg.associated_fraction(),
            mean_hops,
            max_hops: hops.iter().copied().max().unwrap_or(0),
            data_tx_count: self.data_tx_count,
            beacon_tx_count: self.beacon_tx_count,
            wall_seconds,
        }
    }
}

/// Build and execute one run.
pub fn run_simulation(params: SimParams) -> RunSummary {
    Simulation::new(params).run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_params() -> SimParams {
        SimParams {
            seed: 7,
            n_sites: 1,
            placement: Placement::SiteDiscs { total_area_km2: 0.002 },
            n_nodes: 5,
            msgs_per_node_per_hour: 600.0,
            duration_s: 60.0,
            drain_s: 30.0,
            window_s: 10.0,
            warmup_assoc_fraction: 0.0,
            beacon_period_s: 5.0,
            audit_every_s: Some(5.0),
            ..SimParams::default()
        }
    }

    #[test]
    fn tiny_network_delivers_everything() {
        let s = run_simulation(tiny_params());
        assert_eq!(s.generated, s.delivered + s.lost);
        assert!(s.generated > 20, "traffic flowed: {}", s.generated);
        assert!(s.plr < 0.05, "plr {}", s.plr);
        assert!((s.associated_fraction - 1.0).abs() < 1e-9);
        assert!(s.latency_p99_ms > 0.5 && s.latency_p99_ms < 5000.0);
        assert!(s.energy_total_j > 0.0);
    }

    #[test]
    fn runs_are_reproducible() {
        let a = run_simulation(tiny_params());
        let b = run_simulation(tiny_params());
        assert_eq!(a.generated, b.generated);
        assert_eq!(a.delivered, b.delivered);
        assert_eq!(a.loss, b.loss);
        assert_eq!(a.latency_p99_ms, b.latency_p99_ms);
        assert_eq!(a.energy_total_j, b.energy_total_j);
        assert_eq!(a.data_tx_count, b.data_tx_count);
        assert_eq!(a.beacon_tx_count, b.beacon_tx_count);
    }

    #[test]
    fn different_seeds_differ() {
        let a = run_simulation(tiny_params());
        let b = run_simulation(SimParams { seed: 8, ..tiny_params() });
        assert_ne!(
            (a.generated, a.data_tx_count),
            (b.generated, b.data_tx_count)
        );
    }

    #[test]
    fn jammed_links_mean_no_network() {
        // Every decode fails: nothing associates, every message is lost
        // with no route.
        let s = run_simulation(SimParams { per_override: Some(1.0), ..tiny_params() });
        assert_eq!(s.delivered, 0);
        assert_eq!(s.associated_fraction, 0.0);
        assert_eq!(s.loss.no_route, s.lost);
        assert!(s.plr >= 1.0 - 1e-12);
    }

    #[test]
    fn forced_per_matches_harq_math() {
        // Strong single-hop links with a forced 30% per-transmission error:
        // loss needs 4 consecutive failures, so PLR ~ 0.3^4 = 0.81%.
        let p = SimParams {
            per_override: Some(0.3),
            n_nodes: 30,
            msgs_per_node_per_hour: 480.0,
            duration_s: 600.0,
            drain_s: 60.0,
            max_hops: 1,
            ..tiny_params()
        };
        let s = run_simulation(p);
        assert!(s.generated > 2000, "enough samples: {}", s.generated);
        let expect = 0.3f64.powi(4);
        assert!(
            (s.plr - expect).abs() < 0.006,
            "plr {} vs expected {expect}",
            s.plr
        );
    }
}
